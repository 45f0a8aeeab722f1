"""Command line entry point: ``volfill <subcommand> --config PATH``.

Exit codes: 0 success, 2 configuration error, 3 coefficient set violates
``K > 2 n kappa``, 4 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys

import numpy as np

from . import __version__
from .analysis import (
    apriori_check,
    convergence_study,
    flux_self_convergence,
    form_discrepancy,
    heat_mode_error,
    stability_check,
)
from .coefficients import check_closeness, contraction_factor
from .config import SimulationConfig, parse_config
from .errors import VolfillError
from .fields import StateField, snapshot_csv
from .lattice import run_ensemble
from .solver import simulate

log = logging.getLogger("volfill")

SUBCOMMANDS = ("check-coefficients", "run-pde", "run-lattice", "compare", "stability", "convergence")


def _fmt(x) -> str:
    return f"{x:.6g}" if isinstance(x, float) else str(x)


def _write_text(path: str, text: str) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(text)


def _write_table(path: str, rows: list) -> None:
    if not rows:
        return
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        header = list(rows[0])
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(float(row[k])) if isinstance(row[k], (float, np.floating)) else row[k] for k in header])


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, float) and not np.isfinite(obj):
        return repr(obj)
    return obj


def _write_metadata(out: str, command: str, cfg: SimulationConfig, extra: dict) -> None:
    record = {
        "command": command,
        "version": __version__,
        "config": cfg.to_dict(),
        "coefficients": cfg.coefficient_set().as_dict(),
        **extra,
    }
    with open(os.path.join(out, "metadata.json"), "w") as fh:
        json.dump(_jsonable(record), fh, indent=2, sort_keys=True)
        fh.write("\n")


def coefficient_table(cfg: SimulationConfig) -> dict:
    c = cfg.coefficient_set()
    holds, margin = check_closeness(c)
    return {
        "n": c.n,
        "K_plus": c.k_plus,
        "K_minus": c.k_minus,
        "K": c.k_mean,
        "kappa": c.kappa,
        "alpha": c.alpha,
        "margin": margin,
        "contraction": contraction_factor(c),
        "verdict": "holds" if holds else "fails",
    }


def cmd_check_coefficients(cfg, out, quiet):
    table = coefficient_table(cfg)
    print("\n".join(f"{k}={_fmt(v)}" for k, v in table.items()))
    if out:
        _write_metadata(out, "check-coefficients", cfg, {"table": table})
    return 0


def _solver_summary(traj) -> dict:
    sweeps = [s.sweeps for s in traj.steps]
    ratios = [r for s in traj.steps for r in s.ratios]
    d = traj.diagnostics.arrays()
    return {
        "steps": len(traj.steps),
        "total_sweeps": int(sum(sweeps)),
        "max_sweeps": int(max(sweeps, default=0)),
        "max_ratio": max(ratios, default=0.0),
        "max_sum_deviation": float(d["sum_deviation"].max()),
        "min_value": float(d["min_value"].min()),
        "final_entropy": float(d["entropy"][-1]),
    }


def _diagnostic_rows(traj) -> list:
    d = traj.diagnostics.arrays()
    rows = []
    for k, t in enumerate(d["times"]):
        row = {"time": float(t), "entropy": float(d["entropy"][k])}
        for i, m in enumerate(d["masses"][k]):
            row[f"mass_{i}"] = float(m)
        row["min_value"] = float(d["min_value"][k])
        row["sum_deviation"] = float(d["sum_deviation"][k])
        rows.append(row)
    return rows


def _snapshots(out: str, prefix: str, grid, states, times) -> list:
    names = []
    for k, (u, t) in enumerate(zip(states, times)):
        name = f"{prefix}_{k:04d}.csv"
        _write_text(os.path.join(out, name), snapshot_csv(StateField(grid, u, float(t))))
        names.append({"file": name, "time": float(t)})
    return names


def cmd_run_pde(cfg, out, quiet):
    c = cfg.coefficient_set()
    traj = simulate(cfg.initial_state(), c, cfg.solver_config(), output_times=cfg.output_times)
    files = _snapshots(out, "pde", traj.grid, traj.states, traj.times)
    _write_table(os.path.join(out, "diagnostics.csv"), _diagnostic_rows(traj))
    summary = _solver_summary(traj)
    _write_metadata(out, "run-pde", cfg, {"snapshots": files, "solver": summary, "apriori": apriori_check(traj, c)})
    if not quiet:
        print(f"run-pde: {summary['steps']} steps, {summary['total_sweeps']} Picard sweeps, "
              f"max ratio {summary['max_ratio']:.4g}, snapshots in {out}")
    return 0


def _ensemble(cfg, with_pde):
    lat = cfg.lattice
    return run_ensemble(
        cfg.initial_state(),
        cfg.coefficient_set(),
        lat["M"],
        lat["dt"],
        lat["t_end"],
        cfg.seed,
        output_times=sorted({t for t in cfg.output_times if t < lat["t_end"]} | {lat["t_end"]}),
        pde_dt=lat["pde_dt"] if with_pde else 0,
    )


def cmd_run_lattice(cfg, out, quiet):
    res = _ensemble(cfg, with_pde=False)
    files = _snapshots(out, "lattice_mean", res.grid, res.mean, res.times)
    files += _snapshots(out, "lattice_stderr", res.grid, res.stderr, res.times)
    _write_metadata(out, "run-lattice", cfg, {"snapshots": files, "seeds": res.seeds, "M": res.M})
    if not quiet:
        print(f"run-lattice: M={res.M}, {len(res.times)} output times, files in {out}")
    return 0


def cmd_compare(cfg, out, quiet):
    res = _ensemble(cfg, with_pde=True)
    files = _snapshots(out, "lattice_mean", res.grid, res.mean, res.times)
    files += _snapshots(out, "pde", res.grid, res.pde, res.times)
    rows = [
        {"time": float(t), "relative_l2": float(d), "statistical": float(s)}
        for t, d, s in zip(res.times, res.discrepancy, res.statistical)
    ]
    _write_table(os.path.join(out, "comparison.csv"), rows)
    _write_metadata(out, "compare", cfg, {"snapshots": files, "comparison": rows, "seeds": res.seeds})
    if not quiet:
        print(f"compare: relative L2 discrepancy at t={res.times[-1]:.4g} is {res.discrepancy[-1]:.4g} "
              f"(statistical part {res.statistical[-1]:.4g})")
    return 0


def perturbed_state(state: StateField, amplitude: float, species, mode: int) -> StateField:
    """Add ``amplitude cos(mode pi x / L)`` to one species and remove it from another."""
    x = state.grid.mesh()[0]
    bump = amplitude * np.cos(mode * np.pi * x / state.grid.lengths[0])
    out = state.copy()
    out.u[species[0]] += bump
    out.u[species[1]] -= bump
    return out


def cmd_stability(cfg, out, quiet):
    c = cfg.coefficient_set()
    base = cfg.initial_state()
    st = cfg.stability
    other = perturbed_state(base, st["amplitude"], st["species"], st["mode"])
    scfg = cfg.solver_config()
    a = simulate(base, c, scfg, output_times=cfg.output_times)
    b = simulate(other, c, scfg, output_times=cfg.output_times)
    rep = stability_check(a, b, c)
    _write_table(os.path.join(out, "stability.csv"), rep.rows())
    verdict = {
        "verdict": rep.verdict,
        "constant": rep.constant,
        "epsilon": rep.epsilon,
        "max_distance_sq": float(rep.distance_sq.max()),
        "min_margin": float(rep.margin.min()),
    }
    _write_metadata(out, "stability", cfg, {"stability": verdict})
    if not quiet:
        print("\n".join(f"{k}={_fmt(v)}" for k, v in verdict.items()))
    return 0


def cmd_convergence(cfg, out, quiet):
    conv = cfg.convergence
    length = cfg.grid["length"]
    h = [length / N for N in conv["cells"]]
    c = cfg.coefficient_set()
    dt = cfg.solver["dt"]
    if conv["kind"] == "heat-mode":
        # dt = h^2 keeps the temporal error below the spatial one
        table = convergence_study(
            lambda x: heat_mode_error(int(round(length / x)), x * x, conv["t_end"], c.k_mean, length), h
        )
    elif conv["kind"] == "richardson":
        table = flux_self_convergence(c, conv["cells"], conv["t_end"], dt, length)
    else:
        table = convergence_study(lambda x: form_discrepancy(c, int(round(length / x)), conv["t_end"], dt, length), h)
    _write_table(os.path.join(out, "convergence.csv"), table.rows())
    _write_metadata(out, "convergence", cfg, {"convergence": table.rows()})
    if not quiet:
        for row in table.rows():
            print(f"h={row['h']:.6g} error={row['error']:.6g} order={row['order']:.4g}")
    return 0


HANDLERS = {
    "check-coefficients": cmd_check_coefficients,
    "run-pde": cmd_run_pde,
    "run-lattice": cmd_run_lattice,
    "compare": cmd_compare,
    "stability": cmd_stability,
    "convergence": cmd_convergence,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="volfill", description=__doc__.splitlines()[0])
    parser.add_argument("subcommand", choices=SUBCOMMANDS)
    parser.add_argument("--config", required=True, help="TOML run configuration")
    parser.add_argument("--seed", type=int, help="override the configured master seed")
    parser.add_argument("--out", help="output directory (default: output.dir of the config)")
    parser.add_argument("--quiet", action="store_true")
    return parser


def dispatch(subcommand: str, cfg: SimulationConfig, out: str | None = None, quiet: bool = False) -> int:
    """Run one subcommand; errors propagate as :class:`VolfillError`."""
    if subcommand != "check-coefficients" or out:
        out = out or os.path.join(cfg.base_dir, cfg.output["dir"])
        os.makedirs(out, exist_ok=True)
    return HANDLERS[subcommand](cfg, out, quiet)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO, format="%(message)s")
    try:
        cfg = parse_config(args.config)
        if args.seed is not None:
            cfg.seed = args.seed
        return dispatch(args.subcommand, cfg, args.out, args.quiet)
    except VolfillError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
