"""Time stepping for the volume-filling cross-diffusion system.

Each species obeys

    du_i/dt - K Lap u_i = sum_{j != i} (K_ij - K) (u_j Lap u_i - u_i Lap u_j)

(strong form) or, equivalently when the densities sum to one, the
divergence of the exchange fluxes ``sum_j K_ij (u_j grad u_i - u_i grad u_j)``
(flux form). A time step is backward Euler on ``K Lap`` with the coupling
evaluated on a frozen, clamped lag and the previous Picard iterate; the
Picard loop re-linearises until successive iterates agree.

With a positive margin ``K - 2 n kappa`` one sweep contracts the iterate
difference by at most ``2 n kappa / K`` in the norm
``sum_i sqrt(||e_i / dt||^2 + K^2 ||Lap e_i||^2)`` (exactly for a fixed lag,
up to ``O(dt)`` when the lag follows the iterate).
"""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .coefficients import CoefficientSet, contraction_factor
from .errors import AssumptionViolated, LinearSolveFailure, PicardDivergence, ValidationError
from .fields import (
    TOL_NEG,
    TOL_SUM,
    Grid,
    StateField,
    check_simplex,
    clamp,
    entropy_field,
    face_averages,
    face_differences,
    gradient_norm_sq,
    l2_norm_sq,
    laplacian_neumann,
)

LINEAR_RTOL = 1e-12


@dataclass(frozen=True)
class SolverConfig:
    dt: float
    t_end: float
    picard_tol: float = 1e-10
    picard_max: int = 50
    theta: float = 1.0
    flux_form: bool = True
    tol_sum: float = TOL_SUM
    tol_neg: float = TOL_NEG

    def __post_init__(self):
        if not self.dt > 0:
            raise ValidationError(f"dt must be positive, got {self.dt}")
        if not self.t_end >= 0:
            raise ValidationError(f"t_end must be non-negative, got {self.t_end}")
        if not self.picard_tol > 0:
            raise ValidationError(f"picard_tol must be positive, got {self.picard_tol}")
        if self.picard_max < 1:
            raise ValidationError(f"picard_max must be >= 1, got {self.picard_max}")
        if not 0.0 <= self.theta <= 1.0:
            raise ValidationError(f"theta must lie in [0, 1], got {self.theta}")


def default_dt(c: CoefficientSet, grid: Grid, theta: float = 1.0) -> float:
    """Empirical step-size default: ``h`` for implicit coupling, else ``h^2 / (2 K+)``."""
    if theta >= 1.0:
        return grid.h
    return 0.5 * grid.h ** 2 / c.k_plus


@dataclass
class SolverStep:
    residuals: list = field(default_factory=list)
    ratios: list = field(default_factory=list)
    energy_residuals: list = field(default_factory=list)
    energy_ratios: list = field(default_factory=list)
    linear_solves: int = 0
    sum_deviation: float = 0.0
    min_value: float = 0.0

    @property
    def sweeps(self) -> int:
        return len(self.residuals)

    def summary(self) -> dict:
        return {
            "sweeps": self.sweeps,
            "final_residual": self.residuals[-1] if self.residuals else None,
            "max_ratio": max(self.ratios) if self.ratios else None,
            "max_energy_ratio": max(self.energy_ratios) if self.energy_ratios else None,
            "linear_solves": self.linear_solves,
            "sum_deviation": self.sum_deviation,
            "min_value": self.min_value,
        }


def laplacian_matrix(grid: Grid) -> sp.csc_matrix:
    """Sparse Neumann Laplacian matching :func:`laplacian_neumann` (C order)."""
    ops = []
    for n in grid.cells:
        main = -2.0 * np.ones(n)
        main[0] = main[-1] = -1.0
        ops.append(sp.diags([np.ones(n - 1), main, np.ones(n - 1)], [-1, 0, 1]))
    if grid.dim == 1:
        lap = ops[0]
    else:
        lap = sp.kron(ops[0], sp.identity(grid.cells[1])) + sp.kron(sp.identity(grid.cells[0]), ops[1])
    return sp.csc_matrix(lap / grid.h ** 2)


class HeatOperator:
    """Factorised ``I - dt K Lap`` for repeated backward-Euler solves."""

    def __init__(self, grid: Grid, rate: float, dt: float):
        self.grid = grid
        self.rate = rate
        self.dt = dt
        self.matrix = sp.csc_matrix(sp.identity(int(np.prod(grid.shape))) - dt * rate * laplacian_matrix(grid))
        self._lu = splu(self.matrix)
        self._norm = float(abs(self.matrix).sum(axis=1).max())

    def step(self, u: np.ndarray, forcing: np.ndarray | None = None) -> np.ndarray:
        """Backward-Euler step ``u + dt (rate Lap u_new + forcing)``.

        Solved for the increment, so round-off scales with the change
        rather than with ``u`` itself.
        """
        rhs = self.rate * laplacian_neumann(u, self.grid)
        if forcing is not None:
            rhs = rhs + forcing
        return u + self.solve(self.dt * rhs)

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        """Solve for a batch ``(m, *grid.shape)`` or a single field."""
        shape = rhs.shape
        b = rhs.reshape(-1, int(np.prod(self.grid.shape))).T
        x = self._lu.solve(np.ascontiguousarray(b))
        res = np.abs(self.matrix @ x - b).max()
        # backward-error scale: ||A|| ||x|| + ||b||
        scale = self._norm * np.abs(x).max() + np.abs(b).max()
        if not np.isfinite(res) or res > LINEAR_RTOL * scale:
            raise LinearSolveFailure(f"linear residual {res:.3e} exceeds {LINEAR_RTOL:g} relative")
        return x.T.reshape(shape)


@functools.lru_cache(maxsize=32)
def heat_operator(grid: Grid, rate: float, dt: float) -> HeatOperator:
    return HeatOperator(grid, rate, dt)


def heat_reference(initial, rate: float, grid: Grid, dt: float, t_end: float) -> np.ndarray:
    """Implicit-Euler solution of ``du/dt = rate Lap u`` with Neumann walls."""
    u = np.asarray(initial, dtype=float).copy()
    for step_dt in _step_sizes(dt, t_end):
        u = heat_operator(grid, rate, step_dt).step(u)
    return u


def _step_sizes(dt: float, t_end: float) -> list:
    nsteps = int(math.floor(t_end / dt + 1e-9))
    sizes = [dt] * nsteps
    rest = t_end - nsteps * dt
    if rest > 1e-9 * max(dt, t_end):
        sizes.append(rest)
    return sizes


def _require_margin(c: CoefficientSet) -> None:
    if not c.holds:
        raise AssumptionViolated(
            f"K={c.k_mean:g} must exceed 2 n kappa={2 * c.n * c.kappa:g} "
            f"(contraction factor {contraction_factor(c):.4g} >= 1)"
        )


def strong_coupling(u_star: np.ndarray, lag: np.ndarray, c: CoefficientSet, grid: Grid) -> np.ndarray:
    """``sum_j (K_ij - K)(lag_j Lap u_i - lag_i Lap u_j)`` per cell."""
    d = c.deviation()
    lap = laplacian_neumann(u_star, grid)
    return lap * np.tensordot(d, lag, axes=1) - lag * np.tensordot(d, lap, axes=1)


def coupling_fluxes(u_star: np.ndarray, lag: np.ndarray, c: CoefficientSet, grid: Grid, axis: int = 0) -> np.ndarray:
    """Interior-face fluxes ``sum_j (K_ij - K)(lag_j du_i - lag_i du_j)``.

    ``lag`` is averaged arithmetically onto faces; gradients are centred
    differences. The species sum vanishes identically at every face.
    """
    d = c.deviation()
    grad = face_differences(u_star, grid, axis) / grid.h
    lag_f = face_averages(lag, grid, axis)
    return grad * np.tensordot(d, lag_f, axes=1) - lag_f * np.tensordot(d, grad, axes=1)


def full_fluxes(u: np.ndarray, c: CoefficientSet, grid: Grid, axis: int = 0) -> np.ndarray:
    """Face fluxes ``sum_j K_ij (u_j du_i - u_i du_j)`` of the n+1 system."""
    grad = face_differences(u, grid, axis) / grid.h
    uf = face_averages(u, grid, axis)
    return grad * np.tensordot(c.k, uf, axes=1) - uf * np.tensordot(c.k, grad, axes=1)


def flux_divergence(fluxes: np.ndarray, grid: Grid, axis: int = 0) -> np.ndarray:
    """Divergence of interior-face fluxes with zero flux through the walls."""
    ax = fluxes.ndim - grid.dim + axis
    widths = [(0, 0)] * fluxes.ndim
    widths[ax] = (1, 1)
    return np.diff(np.pad(fluxes, widths), axis=ax) / grid.h


def flux_coupling(u_star: np.ndarray, lag: np.ndarray, c: CoefficientSet, grid: Grid) -> np.ndarray:
    return sum(flux_divergence(coupling_fluxes(u_star, lag, c, grid, a), grid, a) for a in range(grid.dim))


def linearized_step(
    state: StateField,
    lag: StateField,
    c: CoefficientSet,
    cfg: SolverConfig,
    iterate: np.ndarray | None = None,
) -> StateField:
    """One linear backward-Euler solve with frozen coefficients.

    ``lag`` supplies the clamped densities multiplying the coupling terms;
    ``iterate`` (default: ``lag``) is the previous Picard iterate, blended
    with the old state by ``cfg.theta`` before its Laplacian is taken.
    """
    _require_margin(c)
    if lag.grid != state.grid:
        raise ValidationError("state and lag must live on the same grid")
    grid = state.grid
    prev = lag.u if iterate is None else iterate
    u_star = cfg.theta * prev + (1.0 - cfg.theta) * state.u
    frozen = clamp(lag.u)
    if cfg.flux_form:
        coupling = flux_coupling(u_star, frozen, c, grid)
    else:
        coupling = strong_coupling(u_star, frozen, c, grid)
    u_new = heat_operator(grid, c.k_mean, cfg.dt).step(state.u, coupling)
    return StateField(grid, u_new, state.time + cfg.dt)


def flux_form_step(state: StateField, lag: StateField, c: CoefficientSet, cfg: SolverConfig) -> StateField:
    """Conservative variant of :func:`linearized_step`."""
    if not cfg.flux_form:
        cfg = SolverConfig(**{**cfg.__dict__, "flux_form": True})
    return linearized_step(state, lag, c, cfg)


def _energy_norm(e: np.ndarray, grid: Grid, rate: float, dt: float) -> float:
    lap = laplacian_neumann(e, grid)
    return sum(
        math.sqrt(l2_norm_sq(e[i], grid) / dt ** 2 + rate ** 2 * l2_norm_sq(lap[i], grid))
        for i in range(e.shape[0])
    )


def advance(state: StateField, c: CoefficientSet, cfg: SolverConfig, dt: float | None = None):
    """Advance one time step by Picard iteration; return ``(state, SolverStep)``.

    The lag and the iterate both follow the latest Picard iterate, starting
    from the old state. Stops once the largest per-species L2 change drops
    below ``cfg.picard_tol``.
    """
    _require_margin(c)
    if dt is not None and dt != cfg.dt:
        cfg = SolverConfig(**{**cfg.__dict__, "dt": dt})
    grid = state.grid
    record = SolverStep()
    current = state
    growth = 0
    for _ in range(cfg.picard_max):
        nxt = linearized_step(state, current, c, cfg, iterate=current.u)
        record.linear_solves += nxt.u.shape[0]
        diff = nxt.u - current.u
        res = max(math.sqrt(l2_norm_sq(diff[i], grid)) for i in range(diff.shape[0]))
        eres = _energy_norm(diff, grid, c.k_mean, cfg.dt)
        if record.residuals:
            prev = record.residuals[-1]
            record.ratios.append(res / prev if prev > 0 else 0.0)
            eprev = record.energy_residuals[-1]
            record.energy_ratios.append(eres / eprev if eprev > 0 else 0.0)
            growth = growth + 1 if res > prev else 0
        record.residuals.append(res)
        record.energy_residuals.append(eres)
        current = nxt
        if not np.isfinite(res):
            raise PicardDivergence("non-finite Picard residual")
        if res < cfg.picard_tol:
            break
        if growth >= 3:
            raise PicardDivergence(f"Picard residual grew for 3 consecutive sweeps (last {res:.3e})")
    else:
        raise PicardDivergence(
            f"no convergence in {cfg.picard_max} sweeps (residual {record.residuals[-1]:.3e})"
        )
    record.sum_deviation = float(np.abs(current.u.sum(axis=0) - 1.0).max())
    record.min_value = float(current.u.min())
    return current, record


@dataclass
class DiagnosticSeries:
    """Per-step scalar diagnostics; index 0 is the initial state."""

    times: list = field(default_factory=list)
    masses: list = field(default_factory=list)
    entropy: list = field(default_factory=list)
    min_value: list = field(default_factory=list)
    sum_deviation: list = field(default_factory=list)
    grad_sq: list = field(default_factory=list)
    l2_sq: list = field(default_factory=list)
    lap_sq: list = field(default_factory=list)
    dudt_sq: list = field(default_factory=list)
    grad_sup: list = field(default_factory=list)
    dts: list = field(default_factory=list)

    def record(self, state: StateField, previous: StateField | None, dt: float | None) -> None:
        g, u = state.grid, state.u
        lap = laplacian_neumann(u, g)
        self.times.append(state.time)
        self.masses.append(state.masses())
        self.entropy.append(float(entropy_field(u).sum() * g.cell_volume))
        self.min_value.append(float(u.min()))
        self.sum_deviation.append(float(np.abs(u.sum(axis=0) - 1.0).max()))
        self.grad_sq.append(sum(gradient_norm_sq(u[i], g) for i in range(u.shape[0])))
        self.l2_sq.append(l2_norm_sq(u, g))
        self.lap_sq.append(l2_norm_sq(lap, g))
        self.grad_sup.append(vector_gradient_sup(u, g))
        if previous is None:
            self.dudt_sq.append(0.0)
            self.dts.append(0.0)
        else:
            self.dudt_sq.append(l2_norm_sq((u - previous.u) / dt, g))
            self.dts.append(dt)

    def arrays(self) -> dict:
        return {k: np.asarray(v) for k, v in self.__dict__.items()}


def vector_gradient_sup(u: np.ndarray, grid: Grid) -> float:
    """``max_faces |grad u|`` with the Euclidean norm taken over species."""
    best = 0.0
    for a in range(grid.dim):
        d = face_differences(u, grid, a) / grid.h
        best = max(best, float(np.sqrt((d * d).sum(axis=0)).max()))
    return best


@dataclass
class Trajectory:
    grid: Grid
    times: np.ndarray
    states: np.ndarray
    steps: list
    diagnostics: DiagnosticSeries
    config: SolverConfig

    def state_at(self, k: int) -> StateField:
        return StateField(self.grid, self.states[k], float(self.times[k]))

    @property
    def final(self) -> StateField:
        return self.state_at(-1)


def simulate(
    initial: StateField,
    c: CoefficientSet,
    cfg: SolverConfig,
    output_times=None,
    record_every: int | None = None,
) -> Trajectory:
    """Run from ``initial.time`` to ``cfg.t_end``.

    Snapshots are kept at ``output_times`` (snapped to the nearest step) or
    every ``record_every`` steps; scalar diagnostics are kept every step.
    """
    _require_margin(c)
    check_simplex(initial.u, cfg.tol_sum, cfg.tol_neg)
    sizes = _step_sizes(cfg.dt, cfg.t_end - initial.time)
    step_times = initial.time + np.cumsum([0.0] + sizes)
    keep = _snapshot_indices(step_times, output_times, record_every)
    diag = DiagnosticSeries()
    diag.record(initial, None, None)
    times, states, steps = [], [], []
    if 0 in keep:
        times.append(initial.time)
        states.append(initial.u.copy())
    state = initial
    for k, dt in enumerate(sizes, start=1):
        new, rec = advance(state, c, cfg, dt)
        new.time = float(step_times[k])
        diag.record(new, state, dt)
        steps.append(rec)
        if k in keep:
            times.append(new.time)
            states.append(new.u.copy())
        state = new
    return Trajectory(initial.grid, np.array(times), np.array(states), steps, diag, cfg)


def _snapshot_indices(step_times: np.ndarray, output_times, record_every) -> set:
    last = len(step_times) - 1
    if output_times is not None:
        return {int(np.argmin(np.abs(step_times - t))) for t in output_times}
    every = record_every or 1
    return set(range(0, last + 1, every)) | {last}
