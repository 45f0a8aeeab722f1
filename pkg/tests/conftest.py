import numpy as np
import pytest

from volfill.coefficients import from_pairs, uniform_coefficients

MARGIN_PAIRS = {(0, 1): 1.0, (0, 2): 1.1, (1, 2): 0.95}


@pytest.fixture
def margin_set():
    """n = 2 rates with K = 1.025, kappa = 0.075, margin 0.725."""
    return from_pairs(2, MARGIN_PAIRS)


@pytest.fixture
def equal_set():
    return uniform_coefficients(2, 1.0)


@pytest.fixture
def rng():
    return np.random.default_rng(20261016)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
