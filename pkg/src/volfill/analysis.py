"""Post-processing: stability bound, a priori bounds, convergence tables."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .coefficients import CoefficientSet
from .errors import AssumptionViolated, GridMismatch, InsufficientMeshes
from .fields import Grid, StateField, gradient_norm_sq, l2_norm, l2_norm_sq
from .profiles import cosine_mixture
from .solver import SolverConfig, Trajectory, heat_reference, simulate, vector_gradient_sup

STABILITY_SLACK = 1e-9
APRIORI_SLACK = 0.1


@dataclass
class StabilityReport:
    times: np.ndarray
    distance_sq: np.ndarray
    exponent: np.ndarray
    bound: np.ndarray
    constant: float
    epsilon: float
    verdict: str

    @property
    def margin(self) -> np.ndarray:
        return self.bound - self.distance_sq

    @property
    def holds(self) -> bool:
        return self.verdict == "holds"

    def rows(self) -> list:
        return [
            {"time": t, "distance_sq": d, "exponent": e, "bound": b, "margin": b - d}
            for t, d, e, b in zip(self.times, self.distance_sq, self.exponent, self.bound)
        ]


@dataclass
class ConvergenceTable:
    h: np.ndarray
    errors: np.ndarray
    orders: np.ndarray = field(init=False)

    def __post_init__(self):
        order = np.argsort(-np.asarray(self.h))
        self.h = np.asarray(self.h, dtype=float)[order]
        self.errors = np.asarray(self.errors, dtype=float)[order]
        self.orders = np.log(self.errors[:-1] / self.errors[1:]) / np.log(self.h[:-1] / self.h[1:])

    @property
    def ratios(self) -> np.ndarray:
        return self.errors[:-1] / self.errors[1:]

    def rows(self) -> list:
        orders = [math.nan] + list(self.orders)
        return [{"h": h, "error": e, "order": o} for h, e, o in zip(self.h, self.errors, orders)]


def gronwall_constant(c: CoefficientSet) -> tuple[float, float]:
    """``(C, eps)`` with ``eps = (K - 2 n kappa) / 2`` and ``C = 2 n kappa / (4 eps)``."""
    eps = 0.5 * (c.k_mean - 2 * c.n * c.kappa)
    if eps <= 0:
        raise AssumptionViolated(f"K - 2 n kappa = {2 * eps:g} must be positive")
    return 2 * c.n * c.kappa / (4 * eps), eps


def _trapezoid(y: np.ndarray, t: np.ndarray) -> np.ndarray:
    out = np.zeros_like(t, dtype=float)
    out[1:] = np.cumsum(0.5 * (y[1:] + y[:-1]) * np.diff(t))
    return out


def stability_check(run_a: Trajectory, run_b: Trajectory, c: CoefficientSet) -> StabilityReport:
    """Compare ``||u_a - u_b||^2(t)`` with ``exp(C int_0^t ||grad u_a||_inf^2) ||u_a - u_b||^2(0)``.

    ``run_a`` plays the strong solution: only its gradients enter the
    exponent. A failing comparison is reported as ``"inconclusive"``
    because the theorem's constant is only known to exist.
    """
    if run_a.grid != run_b.grid or run_a.states.shape != run_b.states.shape:
        raise GridMismatch("trajectories must share grid and snapshot layout")
    if not np.allclose(run_a.times, run_b.times, rtol=0, atol=1e-12):
        raise GridMismatch("trajectories must share output times")
    const, eps = gronwall_constant(c)
    grid = run_a.grid
    times = np.asarray(run_a.times)
    dist = np.array([l2_norm_sq(a - b, grid) for a, b in zip(run_a.states, run_b.states)])
    gsup = np.array([vector_gradient_sup(u, grid) for u in run_a.states])
    exponent = const * _trapezoid(gsup ** 2, times)
    bound = np.exp(exponent) * dist[0]
    ok = np.all(dist <= bound + STABILITY_SLACK)
    return StabilityReport(times, dist, exponent, bound, const, eps, "holds" if ok else "inconclusive")


def apriori_constants(u0: np.ndarray, grid: Grid, c: CoefficientSet, T: float) -> dict:
    margin = c.k_mean - 2 * c.n * c.kappa
    if margin <= 0:
        raise AssumptionViolated(f"K - 2 n kappa = {margin:g} must be positive")
    nk = 2 * c.n * c.kappa
    grad0 = sum(gradient_norm_sq(u0[i], grid) for i in range(u0.shape[0]))
    c0 = 2 * max(1.0, 1.0 / margin) * grad0
    c1 = math.exp(nk * T) * (l2_norm_sq(u0, grid) + nk * c0)
    c2 = (c.k_mean + nk) * c0
    return {"C0": c0, "C1": c1, "C2": c2}


def _ratio(lhs: float, rhs: float) -> float:
    if rhs == 0.0:
        return 0.0 if lhs == 0.0 else math.inf
    return lhs / rhs


def apriori_check(run: Trajectory, c: CoefficientSet, slack: float = APRIORI_SLACK) -> dict:
    """Discrete versions of the three linear-problem energy bounds.

    * ``sup_t sum_i ||grad u_i||^2 + sum_i int ||Lap u_i||^2 <= C0``
    * ``sup_t sum_i ||u_i||^2 <= C1``
    * ``sum_i int ||du_i/dt||^2 <= C2``

    Time integrals are backward-Euler sums over steps, matching the scheme.
    """
    d = run.diagnostics.arrays()
    u0 = run.states[0] if np.isclose(run.times[0], d["times"][0]) else None
    if u0 is None:
        raise GridMismatch("trajectory must keep its initial snapshot")
    T = float(d["times"][-1] - d["times"][0])
    consts = apriori_constants(u0, run.grid, c, T)
    dts = d["dts"][1:]
    lhs = {
        "C0": float(d["grad_sq"].max() + np.sum(dts * d["lap_sq"][1:])),
        "C1": float(d["l2_sq"].max()),
        "C2": float(np.sum(dts * d["dudt_sq"][1:])),
    }
    ratios = {k: _ratio(lhs[k], consts[k]) for k in consts}
    return {
        "constants": consts,
        "lhs": lhs,
        "ratios": ratios,
        "holds": all(r <= 1.0 + slack for r in ratios.values()),
    }


def _check_meshes(h) -> np.ndarray:
    h = np.sort(np.asarray(h, dtype=float))[::-1]
    if len(h) < 3:
        raise InsufficientMeshes(f"need at least 3 meshes, got {len(h)}")
    if not np.allclose(h[:-1] / h[1:], 2.0, rtol=1e-9):
        raise InsufficientMeshes(f"meshes must refine by 2, got h = {h}")
    return h


def convergence_study(error_fn, h) -> ConvergenceTable:
    """Tabulate ``error_fn(h)`` over meshes that each halve the previous one."""
    h = _check_meshes(h)
    return ConvergenceTable(h, np.array([error_fn(x) for x in h]))


def self_convergence(solution_fn, h, restrict) -> ConvergenceTable:
    """Errors against the finest mesh for problems without an exact answer.

    ``solution_fn(h)`` returns the discrete solution; ``restrict(fine, coarse)``
    maps the finest solution onto the coarser mesh and returns an error norm.
    The finest mesh itself is dropped from the table.
    """
    h = _check_meshes(h)
    sols = [solution_fn(x) for x in h]
    ref = sols[-1]
    return ConvergenceTable(h[:-1], np.array([restrict(ref, s) for s in sols[:-1]]))


def heat_mode_error(cells: int, dt: float, t_end: float, rate: float = 1.0, length: float = 1.0) -> float:
    """Max error of the implicit heat solver on the first cosine mode."""
    grid = Grid.uniform(cells, length)
    x = grid.centers()[0]
    k = math.pi / length
    u0 = np.cos(k * x)
    u = heat_reference(u0, rate, grid, dt, t_end)
    exact = math.exp(-rate * k * k * t_end) * u0
    return float(np.abs(u - exact).max())


def block_average(fine: np.ndarray, factor: int) -> np.ndarray:
    """Average consecutive groups of ``factor`` cells along the last axis."""
    shape = fine.shape[:-1] + (fine.shape[-1] // factor, factor)
    return fine.reshape(shape).mean(axis=-1)


def mixture_state(n: int, cells: int, length: float = 1.0) -> StateField:
    """Smooth test data: one cosine mode per species around a uniform mixture."""
    grid = Grid.uniform(cells, length)
    base = np.full(n, 0.8 / (n + 1))
    amp = np.full(n, 0.1 / n) * np.where(np.arange(n) % 2, -1.0, 1.0)
    return StateField(grid, cosine_mixture(grid, base, amp))


def _final(c, cells, t_end, dt, length, flux):
    cfg = SolverConfig(dt=dt, t_end=t_end, flux_form=flux, picard_tol=1e-12)
    return simulate(mixture_state(c.n, cells, length), c, cfg, output_times=[t_end]).states[-1]


def form_discrepancy(c: CoefficientSet, cells: int, t_end: float, dt: float, length: float = 1.0) -> float:
    """Max difference between flux-form and strong-form runs on a cosine mixture.

    With arithmetic face averages the two discrete operators agree exactly
    once the Picard lag equals the iterate, so this is round-off sized.
    """
    return float(np.abs(_final(c, cells, t_end, dt, length, True) - _final(c, cells, t_end, dt, length, False)).max())


def flux_self_convergence(c: CoefficientSet, cells, t_end: float, dt: float, length: float = 1.0) -> ConvergenceTable:
    """Richardson table for the flux form: ``e(h) = ||u_h - R u_{h/2}||``.

    ``dt`` is shared by every mesh so the temporal error cancels. ``R`` block
    averages pairs of fine cells. For a second-order scheme ``e(h)/e(h/2) -> 4``.
    """
    h = _check_meshes([length / int(n) for n in cells])
    sols = [_final(c, int(round(length / x)), t_end, dt, length, True) for x in h]
    errors = [
        l2_norm(block_average(fine, 2) - coarse, Grid.uniform(coarse.shape[-1], length))
        for coarse, fine in zip(sols[:-1], sols[1:])
    ]
    return ConvergenceTable(h[:-1], np.array(errors))
