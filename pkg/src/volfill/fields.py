"""Cell-centred density fields on uniform grids with no-flux boundaries.

Arrays holding several species carry the species index first, so a state
with ``n + 1`` species on a 1D grid of ``N`` cells has shape ``(n + 1, N)``.
The Neumann condition is imposed by mirrored ghost cells (``f[-1] = f[0]``),
which makes the discrete Laplacian symmetric and exactly conservative.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import logsumexp, xlogy

from .errors import BoundaryPoint, ShapeMismatch, SimplexViolation, ValidationError

TOL_SUM = 1e-10
TOL_NEG = 1e-12


@dataclass(frozen=True)
class Grid:
    """Uniform grid on ``[0, cells * h]`` (per axis)."""

    cells: tuple
    h: float

    def __post_init__(self):
        cells = tuple(int(c) for c in np.atleast_1d(self.cells))
        object.__setattr__(self, "cells", cells)
        if len(cells) not in (1, 2):
            raise ValidationError(f"grid dimension must be 1 or 2, got {len(cells)}")
        if min(cells) < 3:
            raise ValidationError(f"need at least 3 cells per axis, got {cells}")
        if not self.h > 0:
            raise ValidationError(f"spacing h must be positive, got {self.h}")

    @classmethod
    def uniform(cls, cells, length=1.0) -> "Grid":
        cells = tuple(np.atleast_1d(cells))
        return cls(cells, float(length) / cells[0])

    @property
    def dim(self) -> int:
        return len(self.cells)

    @property
    def shape(self) -> tuple:
        return self.cells

    @property
    def lengths(self) -> tuple:
        return tuple(c * self.h for c in self.cells)

    @property
    def cell_volume(self) -> float:
        return self.h ** self.dim

    def centers(self) -> list:
        """Cell-centre coordinates along each axis."""
        return [(np.arange(c) + 0.5) * self.h for c in self.cells]

    def mesh(self) -> list:
        return np.meshgrid(*self.centers(), indexing="ij")


@dataclass
class StateField:
    grid: Grid
    u: np.ndarray
    time: float = 0.0

    @property
    def n(self) -> int:
        return self.u.shape[0] - 1

    def copy(self) -> "StateField":
        return replace(self, u=self.u.copy())

    def masses(self) -> np.ndarray:
        return species_masses(self.u, self.grid)

    def validate(self, tol_sum: float = TOL_SUM, tol_neg: float = TOL_NEG) -> "StateField":
        check_simplex(self.u, tol_sum, tol_neg)
        return self


@dataclass
class EntropyReport:
    density: np.ndarray = field(repr=False)
    total: float
    dissipation: float | None = None


def _check_shape(f: np.ndarray, grid: Grid) -> np.ndarray:
    f = np.asarray(f, dtype=float)
    if f.shape[f.ndim - grid.dim:] != grid.shape:
        raise ShapeMismatch(f"array shape {f.shape} does not end with grid shape {grid.shape}")
    return f


def check_simplex(u: np.ndarray, tol_sum: float = TOL_SUM, tol_neg: float = TOL_NEG) -> None:
    """Raise :class:`SimplexViolation` unless ``u >= -tol_neg`` and columns sum to 1."""
    u = np.asarray(u)
    low = u.min()
    if low < -tol_neg:
        raise SimplexViolation(f"negative density {low:.3e} (tolerance {tol_neg:g})")
    drift = np.abs(u.sum(axis=0) - 1.0).max()
    if drift > tol_sum:
        raise SimplexViolation(f"species sum deviates from 1 by {drift:.3e} (tolerance {tol_sum:g})")


def clamp(x):
    """Project onto ``[0, 1]``; works on scalars and arrays."""
    return np.clip(x, 0.0, 1.0)


def _reduced_point(u, tol: float = TOL_NEG) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    if u.ndim != 1:
        raise ShapeMismatch(f"expected a single point, got shape {u.shape}")
    if np.any(u < -tol) or u.sum() > 1 + tol:
        raise SimplexViolation(f"point {u} is outside the closed simplex")
    return np.clip(u, 0.0, None)


def entropy_density(u) -> float:
    """Mixing entropy ``sum u_i log u_i + u_0 log u_0`` at reduced point ``U``.

    ``u_0 = 1 - sum(U)``; the convention ``0 log 0 = 0`` applies.
    """
    u = _reduced_point(u)
    u0 = max(1.0 - u.sum(), 0.0)
    return float(xlogy(u, u).sum() + xlogy(u0, u0))


def entropy_field(u: np.ndarray) -> np.ndarray:
    """Pointwise entropy of a full ``(n + 1, ...)`` state array.

    Values are clipped into ``[0, 1]`` first so round-off negatives near the
    boundary do not produce NaNs.
    """
    v = np.clip(u, 0.0, 1.0)
    return xlogy(v, v).sum(axis=0)


def total_entropy(state: StateField) -> float:
    return float(entropy_field(state.u).sum() * state.grid.cell_volume)


def entropy_report(state: StateField, previous: float | None = None) -> EntropyReport:
    dens = entropy_field(state.u)
    total = float(dens.sum() * state.grid.cell_volume)
    return EntropyReport(dens, total, None if previous is None else total - previous)


def entropy_variables(u) -> np.ndarray:
    """``w_i = log(u_i / u_0)`` for an interior reduced point ``U``."""
    u = np.asarray(u, dtype=float)
    u0 = 1.0 - u.sum(axis=0)
    if np.any(u <= 0.0) or np.any(u0 <= 0.0):
        raise BoundaryPoint("entropy variables need every species, including u_0, strictly positive")
    return np.log(u) - np.log(u0)


def inverse_entropy_variables(w) -> np.ndarray:
    """Inverse of :func:`entropy_variables`: ``u_i = e^{w_i} / (1 + sum_j e^{w_j})``."""
    w = np.asarray(w, dtype=float)
    padded = np.concatenate([np.zeros((1,) + w.shape[1:]), w], axis=0)
    return np.exp(w - logsumexp(padded, axis=0))


def _pad(f: np.ndarray, axis: int) -> np.ndarray:
    widths = [(0, 0)] * f.ndim
    widths[axis] = (1, 1)
    return np.pad(f, widths, mode="edge")


def laplacian_neumann(f, grid: Grid) -> np.ndarray:
    """Five/three-point Laplacian with mirrored ghost cells.

    Leading axes beyond the grid dimensions are treated as a batch.
    """
    f = _check_shape(f, grid)
    out = np.zeros_like(f)
    for ax in range(f.ndim - grid.dim, f.ndim):
        g = _pad(f, ax)
        n = f.shape[ax]
        lo = np.take(g, range(0, n), axis=ax)
        hi = np.take(g, range(2, n + 2), axis=ax)
        out += lo + hi - 2 * f
    return out / grid.h ** 2


def face_differences(f, grid: Grid, axis: int = 0) -> np.ndarray:
    """Interior-face differences ``f[k+1] - f[k]`` along a grid axis."""
    f = _check_shape(f, grid)
    return np.diff(f, axis=f.ndim - grid.dim + axis)


def face_averages(f, grid: Grid, axis: int = 0) -> np.ndarray:
    f = _check_shape(f, grid)
    ax = f.ndim - grid.dim + axis
    n = f.shape[ax]
    return 0.5 * (np.take(f, range(0, n - 1), axis=ax) + np.take(f, range(1, n), axis=ax))


def gradient_sup_norm(f, grid: Grid) -> float:
    """Largest one-sided difference quotient over all interior faces."""
    f = _check_shape(f, grid)
    return max(float(np.abs(face_differences(f, grid, a)).max()) for a in range(grid.dim)) / grid.h


def l2_norm_sq(f, grid: Grid) -> float:
    f = _check_shape(f, grid)
    return float(np.sum(f * f) * grid.cell_volume)


def l2_norm(f, grid: Grid) -> float:
    return float(np.sqrt(l2_norm_sq(f, grid)))


def gradient_norm_sq(f, grid: Grid) -> float:
    """Discrete ``||grad f||^2`` from face differences; equals ``-<f, Lap f>``."""
    f = _check_shape(f, grid)
    total = sum(np.sum(face_differences(f, grid, a) ** 2) for a in range(grid.dim))
    return float(total * grid.cell_volume / grid.h ** 2)


def species_masses(u, grid: Grid) -> np.ndarray:
    u = _check_shape(u, grid)
    axes = tuple(range(u.ndim - grid.dim, u.ndim))
    return u.sum(axis=axes) * grid.cell_volume


def snapshot_csv(state: StateField) -> str:
    """Serialise a state as CSV: one row per cell, ``x[, y], u_0..u_n``.

    Floats use ``repr`` so files are exact and byte-reproducible.
    """
    grid = state.grid
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    coords = ["x", "y"][: grid.dim]
    writer.writerow(coords + [f"u_{i}" for i in range(state.u.shape[0])])
    mesh = [m.ravel() for m in grid.mesh()]
    flat = state.u.reshape(state.u.shape[0], -1)
    for k in range(flat.shape[1]):
        writer.writerow([repr(float(m[k])) for m in mesh] + [repr(float(v)) for v in flat[:, k]])
    return buf.getvalue()


def write_snapshot(path, state: StateField) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(snapshot_csv(state))


def read_snapshot(path, grid: Grid | None = None) -> StateField:
    """Read a snapshot written by :func:`write_snapshot`.

    When ``grid`` is omitted a 1D grid is inferred from the ``x`` column.
    """
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], np.array(rows[1:], dtype=float)
    ncoord = 2 if "y" in header else 1
    species = body[:, ncoord:].T
    if grid is None:
        if ncoord != 1:
            raise ValidationError("2D snapshots need an explicit grid")
        x = body[:, 0]
        grid = Grid((len(x),), float(2 * x[0]))
    return StateField(grid, species.reshape((species.shape[0],) + grid.shape))
