"""Exception hierarchy.

Every error carries a stable class name; the command line maps the three
families below onto exit codes 2, 3 and 4.
"""


class VolfillError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class ConfigError(VolfillError):
    """Invalid input data or configuration (exit code 2)."""

    exit_code = 2


class ParseError(ConfigError):
    pass


class ValidationError(ConfigError):
    pass


class SymmetryViolation(ValidationError):
    pass


class NonPositiveRate(ValidationError):
    pass


class SimplexViolation(ValidationError):
    pass


class BoundaryPoint(ValidationError):
    pass


class ShapeMismatch(ValidationError):
    pass


class GridMismatch(ValidationError):
    pass


class InsufficientMeshes(ValidationError):
    pass


class AssumptionViolated(VolfillError):
    """Coefficient set does not satisfy K > 2 n kappa (exit code 3)."""

    exit_code = 3


class NumericalFailure(VolfillError):
    """A solver or sampler could not deliver its contract (exit code 4)."""

    exit_code = 4


class LinearSolveFailure(NumericalFailure):
    pass


class PicardDivergence(NumericalFailure):
    pass


class ProbabilityOverflow(NumericalFailure):
    pass
