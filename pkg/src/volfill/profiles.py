"""Named initial profiles.

Every profile returns a full ``(n + 1, *grid.shape)`` array whose columns
lie in the closed simplex; species 0 is always the remainder ``1 - sum``.
Profiles vary along the first axis only.
"""
from __future__ import annotations

import numpy as np

from .errors import SimplexViolation, ValidationError
from .fields import Grid, StateField, check_simplex, read_snapshot


def _complete(reduced: np.ndarray, grid: Grid) -> np.ndarray:
    reduced = np.asarray(reduced, dtype=float)
    if grid.dim == 2:
        reduced = np.repeat(reduced[..., None], grid.cells[1], axis=-1)
    u = np.concatenate([1.0 - reduced.sum(axis=0, keepdims=True), reduced], axis=0)
    return u


def uniform(grid: Grid, fractions) -> np.ndarray:
    """Constant fractions ``u_1..u_n``."""
    f = np.asarray(fractions, dtype=float)
    reduced = np.repeat(f[:, None], grid.cells[0], axis=1)
    return _complete(reduced, grid)


def smoothed_step(grid: Grid, n: int, low: float = 0.1, high: float = 0.7, width: float = 0.05) -> np.ndarray:
    """Species ``i`` sits at ``high`` on the i-th of n equal slabs, ``low`` elsewhere.

    Slab indicators are differences of tanh ramps of the given width, so
    they form a partition of unity and ``u_0 = 1 - n*low - (high - low)``
    everywhere.
    """
    if width <= 0:
        raise ValidationError("smoothed-step width must be positive")
    x = grid.centers()[0]
    length = grid.lengths[0]
    cuts = [length * k / n for k in range(1, n)]
    ramps = [0.5 * (1.0 + np.tanh((x - c) / width)) for c in cuts]
    upper = [np.ones_like(x)] + ramps
    lower = ramps + [np.zeros_like(x)]
    windows = np.array([a - b for a, b in zip(upper, lower)])
    return _complete(low + (high - low) * windows, grid)


def cosine_mixture(grid: Grid, base, amplitude, modes=None) -> np.ndarray:
    """``u_i = base_i + amplitude_i cos(m_i pi x / L)``; Neumann-compatible."""
    base = np.asarray(base, dtype=float)
    amplitude = np.asarray(amplitude, dtype=float)
    modes = np.arange(1, len(base) + 1) if modes is None else np.asarray(modes)
    x = grid.centers()[0]
    length = grid.lengths[0]
    reduced = base[:, None] + amplitude[:, None] * np.cos(np.pi * modes[:, None] * x[None, :] / length)
    return _complete(reduced, grid)


def make_profile(grid: Grid, n: int, spec: dict) -> StateField:
    """Build a validated state from a profile description dict."""
    kind = spec.get("kind", "uniform")
    if kind == "uniform":
        u = uniform(grid, spec.get("fractions", [1.0 / (n + 1)] * n))
    elif kind == "smoothed-step":
        u = smoothed_step(grid, n, spec.get("low", 0.1), spec.get("high", 0.7), spec.get("width", 0.05))
    elif kind == "cosine-mixture":
        base = spec.get("base", [1.0 / (n + 1)] * n)
        amp = spec.get("amplitude", [0.1 / n] * n)
        u = cosine_mixture(grid, base, amp, spec.get("modes"))
    elif kind == "from-file":
        u = read_snapshot(spec["path"], grid).u
    else:
        raise ValidationError(f"unknown initial profile kind {kind!r}")
    if u.shape[0] != n + 1:
        raise ValidationError(f"profile has {u.shape[0]} species, expected {n + 1}")
    try:
        check_simplex(u)
    except SimplexViolation as exc:
        raise SimplexViolation(f"initial profile {kind!r}: {exc}") from None
    return StateField(grid, u, 0.0)
