"""Cross-diffusion rate matrices and the constants derived from them.

A :class:`CoefficientSet` holds the symmetric matrix of pairwise exchange
rates ``k[i, j]`` between species ``0..n`` (species 0 is the complement /
vacancy), together with

* ``k_plus``, ``k_minus``: largest and smallest off-diagonal rate,
* ``k_mean = (k_plus + k_minus) / 2`` and ``kappa = (k_plus - k_minus) / 2``,
* ``closeness_margin = k_mean - 2 n kappa``.

A positive margin is what makes the linearised problem coercive and the
Picard map a contraction with factor ``2 n kappa / k_mean``.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .errors import NonPositiveRate, ShapeMismatch, SimplexViolation, SymmetryViolation

SIMPLEX_TOL = 1e-12


@dataclass(frozen=True)
class CoefficientSet:
    n: int
    k: np.ndarray = field(repr=False)
    k_plus: float
    k_minus: float
    k_mean: float
    kappa: float
    alpha: float
    closeness_margin: float

    @property
    def size(self) -> int:
        return self.n + 1

    @property
    def holds(self) -> bool:
        return self.closeness_margin > 0.0

    def deviation(self) -> np.ndarray:
        """``k[i, j] - k_mean`` off the diagonal, zero on it."""
        d = self.k - self.k_mean
        np.fill_diagonal(d, 0.0)
        return d

    def as_dict(self) -> dict:
        return {
            "n": self.n,
            "k": self.k.tolist(),
            "k_plus": self.k_plus,
            "k_minus": self.k_minus,
            "k_mean": self.k_mean,
            "kappa": self.kappa,
            "alpha": self.alpha,
            "closeness_margin": self.closeness_margin,
            "contraction_factor": contraction_factor(self),
        }


def _off_diagonal(k: np.ndarray) -> np.ndarray:
    return k[~np.eye(k.shape[0], dtype=bool)]


def build_coefficients(n: int, entries) -> CoefficientSet:
    """Validate a rate matrix and compute every derived constant.

    The diagonal of ``entries`` is ignored (stored as zero). Symmetry is
    checked with exact equality. A non-positive closeness margin is
    recorded, not rejected; the solver refuses such sets on its own.
    """
    if n < 1:
        raise ShapeMismatch(f"species count n must be >= 1, got {n}")
    k = np.array(entries, dtype=float)
    if k.shape != (n + 1, n + 1):
        raise ShapeMismatch(f"rate matrix must be {(n + 1, n + 1)}, got {k.shape}")
    np.fill_diagonal(k, 0.0)
    off = _off_diagonal(k)
    if not np.all(np.isfinite(off)):
        raise ShapeMismatch("off-diagonal rates must be finite")
    for i, j in itertools.combinations(range(n + 1), 2):
        if k[i, j] != k[j, i]:
            raise SymmetryViolation(f"K[{i},{j}]={k[i, j]!r} differs from K[{j},{i}]={k[j, i]!r}")
    if np.any(off <= 0.0):
        i, j = np.argwhere((k <= 0.0) & ~np.eye(n + 1, dtype=bool))[0]
        raise NonPositiveRate(f"K[{i},{j}]={k[i, j]!r} must be > 0")
    k.setflags(write=False)
    k_plus = float(off.max())
    k_minus = float(off.min())
    k_mean = (k_plus + k_minus) / 2
    kappa = (k_plus - k_minus) / 2
    return CoefficientSet(
        n=n,
        k=k,
        k_plus=k_plus,
        k_minus=k_minus,
        k_mean=k_mean,
        kappa=kappa,
        alpha=k_minus,
        closeness_margin=k_mean - 2 * n * kappa,
    )


def from_pairs(n: int, pairs: dict) -> CoefficientSet:
    """Build from ``{(i, j): rate}`` with each unordered pair given once."""
    k = np.zeros((n + 1, n + 1))
    seen = {}
    for (i, j), rate in pairs.items():
        key = (min(i, j), max(i, j))
        if i == j or not (0 <= i <= n and 0 <= j <= n):
            raise ShapeMismatch(f"invalid species pair ({i}, {j}) for n={n}")
        if key in seen and seen[key] != rate:
            raise SymmetryViolation(f"K{i}{j}={rate!r} differs from K{j}{i}={seen[key]!r}")
        seen[key] = rate
        k[i, j] = k[j, i] = rate
    missing = [p for p in itertools.combinations(range(n + 1), 2) if p not in seen]
    if missing:
        raise ShapeMismatch(f"missing rates for pairs {missing}")
    return build_coefficients(n, k)


def uniform_coefficients(n: int, rate: float) -> CoefficientSet:
    """All off-diagonal rates equal: the independent-heat-equations case."""
    k = np.full((n + 1, n + 1), float(rate))
    return build_coefficients(n, k)


def check_closeness(c: CoefficientSet) -> tuple[bool, float]:
    """Return ``(holds, margin)`` for the strict test ``k_mean > 2 n kappa``."""
    margin = c.k_mean - 2 * c.n * c.kappa
    return bool(margin > 0.0), margin


def contraction_factor(c: CoefficientSet) -> float:
    return 2 * c.n * c.kappa / c.k_mean


def _check_reduced_point(u, n: int, tol: float = SIMPLEX_TOL) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    if u.shape != (n,):
        raise ShapeMismatch(f"expected {n} reduced coordinates, got shape {u.shape}")
    if np.any(u < -tol) or u.sum() > 1 + tol:
        raise SimplexViolation(f"point {u} is outside the closed simplex")
    return u


def assemble_A(c: CoefficientSet, u) -> np.ndarray:
    """Diffusion matrix of the reduced n-species system at ``U = (u_1..u_n)``."""
    u = _check_reduced_point(u, c.n)
    n = c.n
    # d[i, j] = K_ij - K_i0 for species 1..n
    d = c.k[1:, 1:] - c.k[1:, :1]
    np.fill_diagonal(d, 0.0)
    a = -d * u[:, None]
    np.fill_diagonal(a, d @ u + c.k[1:, 0])
    assert a.shape == (n, n)
    return a


def assemble_PB(c: CoefficientSet, u_clamped) -> np.ndarray:
    """Matrix ``P - B(u)`` of the linearised system ``du/dt = (P - B) Lap u``.

    ``P = k_mean * I``; row ``i`` of ``B`` has diagonal
    ``sum_{j != i} (K_ij - K) u_j`` and off-diagonals ``-(K_ij - K) u_i``.
    """
    u = np.asarray(u_clamped, dtype=float)
    if u.shape != (c.size,):
        raise ShapeMismatch(f"expected {c.size} clamped values, got shape {u.shape}")
    d = c.deviation()
    b = -d * u[:, None]
    np.fill_diagonal(b, d @ u)
    return c.k_mean * np.eye(c.size) - b


def min_symmetric_eigenvalue(m: np.ndarray) -> float:
    return float(np.linalg.eigvalsh(0.5 * (m + m.T))[0])


def coercivity_certificate(c: CoefficientSet, n_random: int = 1000, rng=None) -> dict:
    """Smallest eigenvalue of ``sym(P - B)`` over the clamp cube.

    Evaluates every vertex of ``[0, 1]^(n+1)`` plus ``n_random`` uniform
    interior points and compares against the bound ``k_mean - 2 n kappa``.
    """
    rng = np.random.default_rng(rng)
    vertices = np.array(list(itertools.product((0.0, 1.0), repeat=c.size)))
    points = np.vstack([vertices, rng.random((n_random, c.size))])
    eigs = np.array([min_symmetric_eigenvalue(assemble_PB(c, p)) for p in points])
    worst = int(np.argmin(eigs))
    return {
        "bound": c.closeness_margin,
        "min_eigenvalue": float(eigs[worst]),
        "argmin": points[worst],
        "n_points": len(points),
        "vertex_min": float(eigs[: len(vertices)].min()),
        "interior_min": float(eigs[len(vertices):].min()) if n_random else np.inf,
    }


def random_admissible(n: int, rng, k_mean_range=(0.5, 2.0), margin_fraction=0.9) -> CoefficientSet:
    """Draw a random symmetric rate set that satisfies the closeness condition ``K > 2 n kappa``.

    Rates are drawn from ``[center - s, center + s]`` with
    ``(2n + 1) s < margin_fraction * center``, which keeps the realised
    margin positive whatever the extremes of the draw turn out to be.
    """
    rng = np.random.default_rng(rng)
    k_mean = rng.uniform(*k_mean_range)
    kappa_max = margin_fraction * k_mean / (2 * n + 1)
    half = rng.uniform(0.0, kappa_max)
    k = np.zeros((n + 1, n + 1))
    iu = np.triu_indices(n + 1, 1)
    vals = rng.uniform(k_mean - half, k_mean + half, size=len(iu[0]))
    k[iu] = vals
    k = k + k.T
    return build_coefficients(n, k)
