"""Run configuration files.

A configuration is a TOML document::

    seed = 7                          # master seed for lattice ensembles

    [coefficients]
    n = 2
    rates = { "0-1" = 1.0, "0-2" = 1.1, "1-2" = 0.95 }   # each pair once
    # or: matrix = [[0, 1.0, 1.1], [1.0, 0, 0.95], [1.1, 0.95, 0]]

    [grid]
    cells = 200                       # or [64, 64] for 2D
    length = 1.0

    [initial]
    kind = "smoothed-step"            # uniform | smoothed-step | cosine-mixture | from-file
    low = 0.1
    high = 0.7
    width = 0.05

    [solver]
    t_end = 1.0
    dt = 0.005                        # default: h (theta = 1) or h^2 / (2 K+)
    picard_tol = 1e-10
    picard_max = 50
    theta = 1.0
    flux_form = true
    tol_sum = 1e-10
    tol_neg = 1e-12

    [output]
    times = [0.0, 0.5, 1.0]           # default: [0, t_end]
    dir = "out"

    [lattice]
    M = 500
    dt = 2e-5                         # default: 0.9 h^2 / K+
    t_end = 0.01                      # default: solver t_end
    pde_dt = 1e-4                     # default: lattice dt

    [stability]
    amplitude = 1e-3
    species = [1, 0]                  # perturbed species, compensating species
    mode = 1

    [convergence]
    kind = "heat-mode"                # heat-mode | richardson | forms
    cells = [50, 100, 200, 400]
    t_end = 0.05

Every omitted key is filled with its default; :meth:`SimulationConfig.to_dict`
returns the fully materialised form, which parses back to an equal config.
"""
from __future__ import annotations

import copy
import os
from dataclasses import dataclass, field

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

import numpy as np

from .coefficients import CoefficientSet, build_coefficients
from .errors import ParseError, SymmetryViolation, ValidationError
from .fields import TOL_NEG, TOL_SUM, Grid, StateField
from .profiles import make_profile
from .solver import SolverConfig, default_dt

PROFILE_KINDS = ("uniform", "smoothed-step", "cosine-mixture", "from-file")
CONVERGENCE_KINDS = ("heat-mode", "richardson", "forms")


@dataclass
class SimulationConfig:
    coefficients: dict
    grid: dict
    initial: dict
    solver: dict
    output: dict
    lattice: dict = field(default_factory=dict)
    stability: dict = field(default_factory=dict)
    convergence: dict = field(default_factory=dict)
    seed: int = 0
    base_dir: str = field(default=".", compare=False)

    def to_dict(self) -> dict:
        return copy.deepcopy(
            {
                "seed": self.seed,
                "coefficients": self.coefficients,
                "grid": self.grid,
                "initial": self.initial,
                "solver": self.solver,
                "output": self.output,
                "lattice": self.lattice,
                "stability": self.stability,
                "convergence": self.convergence,
            }
        )

    def coefficient_set(self) -> CoefficientSet:
        return build_coefficients(self.coefficients["n"], self.coefficients["matrix"])

    def make_grid(self) -> Grid:
        cells = self.grid["cells"]
        return Grid.uniform(cells, self.grid["length"])

    def initial_state(self) -> StateField:
        spec = dict(self.initial)
        if spec["kind"] == "from-file":
            spec["path"] = os.path.join(self.base_dir, spec["path"])
        return make_profile(self.make_grid(), self.coefficients["n"], spec)

    def solver_config(self) -> SolverConfig:
        return SolverConfig(**self.solver)

    @property
    def output_times(self) -> list:
        return list(self.output["times"])


def _expand_rates(n: int, rates: dict) -> list:
    k = np.zeros((n + 1, n + 1))
    given = {}
    for key, value in rates.items():
        try:
            i, j = (int(p) for p in str(key).split("-"))
        except ValueError:
            raise ValidationError(f"coefficients.rates: key {key!r} is not of the form 'i-j'") from None
        if i == j or not (0 <= i <= n and 0 <= j <= n):
            raise ValidationError(f"coefficients.rates: invalid pair {key!r} for n={n}")
        pair = (min(i, j), max(i, j))
        if pair in given and given[pair] != value:
            raise SymmetryViolation(f"coefficients.rates: K{i}{j}={value!r} differs from K{j}{i}={given[pair]!r}")
        given[pair] = value
        k[i, j] = k[j, i] = float(value)
    missing = [f"{i}-{j}" for i in range(n + 1) for j in range(i + 1, n + 1) if (i, j) not in given]
    if missing:
        raise ValidationError(f"coefficients.rates: missing pairs {missing}")
    return k.tolist()


def _require(table: dict, key: str, where: str):
    if key not in table:
        raise ValidationError(f"{where}.{key} is required")
    return table[key]


def config_from_dict(raw: dict, base_dir: str = ".") -> SimulationConfig:
    """Validate a raw mapping and materialise every default."""
    raw = copy.deepcopy(raw)
    coeff_raw = _require(raw, "coefficients", "config")
    n = int(_require(coeff_raw, "n", "coefficients"))
    if "matrix" in coeff_raw:
        matrix = [[float(v) for v in row] for row in coeff_raw["matrix"]]
    elif "rates" in coeff_raw:
        matrix = _expand_rates(n, coeff_raw["rates"])
    else:
        raise ValidationError("coefficients needs either 'rates' or 'matrix'")
    c = build_coefficients(n, matrix)
    coefficients = {"n": n, "matrix": c.k.tolist()}

    grid_raw = raw.get("grid", {})
    cells = grid_raw.get("cells", 200)
    cells = [int(v) for v in cells] if isinstance(cells, (list, tuple)) else int(cells)
    grid = {"cells": cells, "length": float(grid_raw.get("length", 1.0))}
    g = Grid.uniform(cells, grid["length"])

    initial = dict(raw.get("initial", {"kind": "uniform"}))
    initial.setdefault("kind", "uniform")
    if initial["kind"] not in PROFILE_KINDS:
        raise ValidationError(f"initial.kind must be one of {PROFILE_KINDS}, got {initial['kind']!r}")
    if initial["kind"] == "from-file":
        path = os.path.join(base_dir, _require(initial, "path", "initial"))
        if not os.path.exists(path):
            raise ValidationError(f"initial.path {path!r} does not exist")

    solver_raw = dict(raw.get("solver", {}))
    theta = float(solver_raw.get("theta", 1.0))
    t_end = float(_require(solver_raw, "t_end", "solver"))
    solver = {
        "dt": float(solver_raw.get("dt", default_dt(c, g, theta))),
        "t_end": t_end,
        "picard_tol": float(solver_raw.get("picard_tol", 1e-10)),
        "picard_max": int(solver_raw.get("picard_max", 50)),
        "theta": theta,
        "flux_form": bool(solver_raw.get("flux_form", True)),
        "tol_sum": float(solver_raw.get("tol_sum", TOL_SUM)),
        "tol_neg": float(solver_raw.get("tol_neg", TOL_NEG)),
    }
    unknown = set(solver_raw) - set(solver)
    if unknown:
        raise ValidationError(f"solver: unknown keys {sorted(unknown)}")
    SolverConfig(**solver)

    out_raw = raw.get("output", {})
    times = [float(t) for t in out_raw.get("times", [0.0, t_end])]
    if any(t < 0 or t > t_end * (1 + 1e-12) for t in times):
        raise ValidationError(f"output.times must lie in [0, {t_end}], got {times}")
    output = {"times": times, "dir": str(out_raw.get("dir", "out"))}

    lat_raw = raw.get("lattice", {})
    lat_dt = float(lat_raw.get("dt", 0.9 * g.h ** 2 / c.k_plus))
    lattice = {
        "M": int(lat_raw.get("M", 100)),
        "dt": lat_dt,
        "t_end": float(lat_raw.get("t_end", t_end)),
        "pde_dt": float(lat_raw.get("pde_dt", lat_dt)),
    }
    if lattice["M"] < 1:
        raise ValidationError("lattice.M must be >= 1")

    stab_raw = raw.get("stability", {})
    stability = {
        "amplitude": float(stab_raw.get("amplitude", 1e-3)),
        "species": [int(v) for v in stab_raw.get("species", [1, 0])],
        "mode": int(stab_raw.get("mode", 1)),
    }
    if len(stability["species"]) != 2 or not all(0 <= s <= n for s in stability["species"]):
        raise ValidationError("stability.species must name two species in 0..n")

    conv_raw = raw.get("convergence", {})
    convergence = {
        "kind": str(conv_raw.get("kind", "heat-mode")),
        "cells": [int(v) for v in conv_raw.get("cells", [50, 100, 200, 400])],
        "t_end": float(conv_raw.get("t_end", 0.05)),
    }
    if convergence["kind"] not in CONVERGENCE_KINDS:
        raise ValidationError(f"convergence.kind must be one of {CONVERGENCE_KINDS}, got {convergence['kind']!r}")

    cfg = SimulationConfig(
        coefficients=coefficients,
        grid=grid,
        initial=initial,
        solver=solver,
        output=output,
        lattice=lattice,
        stability=stability,
        convergence=convergence,
        seed=int(raw.get("seed", 0)),
        base_dir=base_dir,
    )
    cfg.initial_state()
    return cfg


def parse_config(path) -> SimulationConfig:
    """Read and validate a TOML configuration file."""
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from None
    return config_from_dict(raw, base_dir=os.path.dirname(os.path.abspath(path)))
