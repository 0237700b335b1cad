"""rhlab command line: analytic tables, bounds, simulations, figure data.

Exit codes are stable across subcommands: 0 means success and every
validation passed, 1 means a computation or validation failed, 2 means the
arguments were unusable.  All defaults are pinned and echoed into the output
metadata; identical flags (seed included) produce identical CSV bytes.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from pathlib import Path
from typing import Dict, List, Sequence, Tuple

from rhlab import __version__
from rhlab.analytic import (
    LoadFactor,
    ModelKind,
    distribution,
    mean_search_cost,
    ode_majorant,
    rh_tails,
    variance_search_cost,
    variance_upper_bound,
)
from rhlab.hashtable import Discipline
from rhlab.simulator import (
    ExperimentConfig,
    fill,
    replicate,
    search_cost_experiment,
    steady_state,
)

SCHEMA_VERSION = "rhlab/1"

DEFAULT_EPSILON = 1e-12
DEFAULT_REPLICATIONS = 5
DEFAULT_SEED = 0
DEFAULT_MEAN_RTOL = 0.02
DEFAULT_VAR_RTOL = 0.10
DEFAULT_TAIL_TOL = 0.01

_MODELS = {
    "insert-only": ModelKind.INSERT_ONLY,
    "steady-state": ModelKind.STEADY_STATE,
}


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return format(value, ".12g")
    return str(value)


def _csv_text(meta: Dict[str, object], columns: Sequence[str], rows: Sequence[Tuple]) -> str:
    lines = [f"# rhlab {__version__}"]
    lines += [f"# {key} = {_fmt(value)}" for key, value in meta.items()]
    lines.append(",".join(columns))
    lines += [",".join(_fmt(cell) for cell in row) for row in rows]
    return "\n".join(lines) + "\n"


def _json_text(
    command: str,
    meta: Dict[str, object],
    columns: Sequence[str],
    rows: Sequence[Tuple],
    started: float,
    extra: Dict[str, object] | None = None,
) -> str:
    payload: Dict[str, object] = {
        "schema_version": SCHEMA_VERSION,
        "command": command,
        "version": __version__,
        "config": meta,
        "columns": list(columns),
        "rows": [list(row) for row in rows],
        "duration_seconds": time.perf_counter() - started,
    }
    if extra:
        payload.update(extra)
    return json.dumps(payload, indent=2) + "\n"


def _write(args, text: str) -> None:
    if args.out == "-":
        sys.stdout.write(text)
    else:
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)


def _emit(args, command, meta, columns, rows, started, extra=None) -> None:
    if args.format == "json":
        _write(args, _json_text(command, meta, columns, rows, started, extra))
    else:
        _write(args, _csv_text(meta, columns, rows))


def _add_output_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--format", choices=["csv", "json"], default="csv", help="output format")
    p.add_argument("--out", default="-", help="output file, or - for stdout")


def cmd_dist(args) -> int:
    started = time.perf_counter()
    lf = LoadFactor(args.alpha)
    model = _MODELS[args.model]
    tails = rh_tails(lf, model, args.epsilon)
    meta = {
        "command": "dist",
        "alpha": lf.alpha,
        "model": args.model,
        "epsilon": args.epsilon,
        "remainder_bound": tails.remainder_bound,
    }
    columns = ("i", "p_i", "tail_i", "double_tail_i")
    if len(tails) == 0:
        rows: List[Tuple] = [(1, 1.0, 0.0, 0.0)]
    else:
        probs = distribution(tails)
        singles = tails.single_tails()
        rows = [
            (i + 1, float(probs[i]), float(singles[i]), float(tails.values[i]))
            for i in range(len(tails))
        ]
    _emit(args, "dist", meta, columns, rows, started)
    return 0


def cmd_bounds(args) -> int:
    started = time.perf_counter()
    grid = [float(chunk) for chunk in args.alpha_grid.split(",") if chunk.strip()]
    if not grid:
        raise ValueError("--alpha-grid is empty")
    model = _MODELS[args.model]
    rows = []
    for a in grid:
        if not 0.0 < a < 1.0:
            raise ValueError(f"grid values must lie in (0, 1), got {a!r}")
        lf = LoadFactor(a)
        moments = variance_search_cost(lf, model, args.epsilon)
        bound = variance_upper_bound(lf, model)
        slack = bound - moments.variance
        if slack < 0.0:
            raise ArithmeticError(
                f"variance bound {bound!r} fails to dominate variance {moments.variance!r} at alpha={a!r}"
            )
        rows.append((a, lf.beta, moments.mean, moments.variance, bound, slack))
    meta = {
        "command": "bounds",
        "alpha_grid": args.alpha_grid,
        "model": args.model,
        "epsilon": args.epsilon,
    }
    columns = ("alpha", "beta", "mean", "variance", "variance_upper_bound", "bound_minus_variance")
    _emit(args, "bounds", meta, columns, rows, started)
    return 0


def cmd_simulate(args) -> int:
    started = time.perf_counter()
    model = _MODELS[args.model]
    cycles = args.cycles
    if cycles is None:
        cycles = 10 * args.m if model is ModelKind.STEADY_STATE else 0
    config = ExperimentConfig(
        m=args.m,
        alpha=args.alpha,
        discipline=Discipline.parse(args.discipline),
        model=model,
        cycles=cycles,
        replications=args.replications,
        base_seed=args.seed,
    )
    report = replicate(
        config,
        epsilon=args.epsilon,
        mean_rtol=args.mean_rtol,
        var_rtol=args.var_rtol,
        tail_tol=args.tail_tol,
    )
    meta = {
        "command": "simulate",
        "m": args.m,
        "alpha": config.alpha,
        "discipline": config.discipline.name.lower(),
        "model": args.model,
        "cycles": cycles,
        "replications": args.replications,
        "seed": args.seed,
        "epsilon": args.epsilon,
        "mean_rtol": args.mean_rtol,
        "var_rtol": args.var_rtol,
        "tail_tol": args.tail_tol,
    }
    columns = (
        "analytic_mean",
        "empirical_mean",
        "mean_stderr",
        "mean_rel_err",
        "mean_ok",
        "analytic_var",
        "empirical_var",
        "var_stderr",
        "var_rel_err",
        "var_ok",
        "tail_sup_diff",
        "tail_ok",
        "passed",
    )
    rows = [
        (
            report.analytic_mean,
            report.empirical_mean,
            report.mean_stderr,
            report.mean_rel_err,
            report.mean_ok,
            report.analytic_var,
            report.empirical_var,
            report.var_stderr,
            report.var_rel_err,
            report.var_ok,
            report.tail_sup_diff,
            report.tail_ok,
            report.passed,
        )
    ]
    _emit(args, "simulate", meta, columns, rows, started, extra={"report": report.to_dict()})
    return 0 if report.passed else 1


def cmd_searchbench(args) -> int:
    started = time.perf_counter()
    config = ExperimentConfig(
        m=args.m,
        alpha=args.alpha,
        discipline=Discipline.parse(args.discipline),
        model=ModelKind.INSERT_ONLY,
        base_seed=args.seed,
    )
    table = fill(config)
    sample = args.sample if args.sample is not None else min(table.n, 100_000)
    lf = LoadFactor(config.alpha)
    mu = mean_search_cost(lf, ModelKind.INSERT_ONLY)
    sigma = math.sqrt(variance_search_cost(lf, ModelKind.INSERT_ONLY, args.epsilon).variance)
    result = search_cost_experiment(table, sample, mu)
    meta = {
        "command": "searchbench",
        "m": args.m,
        "alpha": config.alpha,
        "discipline": config.discipline.name.lower(),
        "sample": sample,
        "seed": args.seed,
        "epsilon": args.epsilon,
        "center": mu,
    }
    columns = ("mode", "mean_probes", "analytic_mean", "analytic_std")
    rows = [
        ("standard", result.standard_mean, mu, sigma),
        ("centered", result.centered_mean, mu, sigma),
    ]
    _emit(args, "searchbench", meta, columns, rows, started)
    return 0


def _write_figure(path: Path, meta, columns, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(_csv_text(meta, columns, rows))


def cmd_figures(args) -> int:
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    which = args.which
    if which == "fig1":
        lf = LoadFactor.from_beta(10.0)
        tails = rh_tails(lf, ModelKind.INSERT_ONLY, DEFAULT_EPSILON)
        rows = []
        for i in range(1, 11):
            double_tail = float(tails.values[i - 1]) if i <= len(tails) else 0.0
            rows.append((i, double_tail, ode_majorant(float(i), lf, ModelKind.INSERT_ONLY)))
        meta = {"command": "figures", "which": "fig1", "beta": 10.0, "epsilon": DEFAULT_EPSILON}
        _write_figure(out_dir / "fig1.csv", meta, ("i", "double_tail", "ode_majorant"), rows)
    elif which == "fig2":
        lf = LoadFactor(0.99)
        tails = rh_tails(lf, ModelKind.STEADY_STATE, DEFAULT_EPSILON)
        rh_p = distribution(tails)
        m = 100_000
        cycles = 10 * m
        config = ExperimentConfig(
            m=m,
            alpha=0.99,
            discipline=Discipline.FCFS,
            model=ModelKind.STEADY_STATE,
            cycles=cycles,
            base_seed=DEFAULT_SEED,
        )
        table = steady_state(config)
        hist = table.age_histogram()
        n = table.n
        rows = []
        for i in range(1, 151):
            analytic = float(rh_p[i - 1]) if i <= rh_p.size else 0.0
            empirical = hist.get(i, 0) / n
            rows.append((i, analytic, empirical))
        meta = {
            "command": "figures",
            "which": "fig2",
            "alpha": 0.99,
            "epsilon": DEFAULT_EPSILON,
            "fcfs_m": m,
            "fcfs_cycles": cycles,
            "fcfs_seed": DEFAULT_SEED,
        }
        _write_figure(out_dir / "fig2.csv", meta, ("i", "rh_analytic_p", "fcfs_empirical_p"), rows)
    else:  # fig4
        rows = []
        for b in range(1, 101):
            lf = LoadFactor.from_beta(float(b))
            variance = variance_search_cost(lf, ModelKind.STEADY_STATE, DEFAULT_EPSILON).variance
            rows.append((float(b), variance, float(b)))
        meta = {"command": "figures", "which": "fig4", "epsilon": DEFAULT_EPSILON}
        _write_figure(out_dir / "fig4.csv", meta, ("beta", "variance", "beta_line"), rows)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rhlab",
        description="Robin Hood hashing lab: analytic distributions, bounds, and simulations.",
    )
    parser.add_argument("--version", action="version", version=f"rhlab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("dist", help="search-cost distribution and its tails")
    p.add_argument("--alpha", type=float, required=True, help="load factor in [0, 1)")
    p.add_argument("--model", choices=sorted(_MODELS), default="insert-only")
    p.add_argument("--epsilon", type=float, default=DEFAULT_EPSILON, help="tail truncation threshold")
    _add_output_flags(p)
    p.set_defaults(func=cmd_dist)

    p = sub.add_parser("bounds", help="variance and its closed-form upper bound on an alpha grid")
    p.add_argument("--alpha-grid", required=True, help="comma-separated load factors in (0, 1)")
    p.add_argument("--model", choices=sorted(_MODELS), default="insert-only")
    p.add_argument("--epsilon", type=float, default=DEFAULT_EPSILON)
    _add_output_flags(p)
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("simulate", help="Monte Carlo run compared against the analytic model")
    p.add_argument("--m", type=int, required=True, help="table size")
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--discipline", choices=["fcfs", "lcfs", "rh"], default="rh")
    p.add_argument("--model", choices=sorted(_MODELS), default="insert-only")
    p.add_argument("--cycles", type=int, default=None, help="churn cycles (default 10*m for steady-state)")
    p.add_argument("--replications", type=int, default=DEFAULT_REPLICATIONS)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--epsilon", type=float, default=DEFAULT_EPSILON)
    p.add_argument("--mean-rtol", type=float, default=DEFAULT_MEAN_RTOL)
    p.add_argument("--var-rtol", type=float, default=DEFAULT_VAR_RTOL)
    p.add_argument("--tail-tol", type=float, default=DEFAULT_TAIL_TOL)
    _add_output_flags(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("searchbench", help="standard vs mean-centered search cost (insert-only)")
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--discipline", choices=["fcfs", "lcfs", "rh"], default="rh")
    p.add_argument("--sample", type=int, default=None, help="keys to sample (default min(n, 100000))")
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--epsilon", type=float, default=DEFAULT_EPSILON)
    _add_output_flags(p)
    p.set_defaults(func=cmd_searchbench)

    p = sub.add_parser("figures", help="emit plot-ready CSVs for the reference figures")
    p.add_argument("--which", choices=["fig1", "fig2", "fig4"], required=True)
    p.add_argument("--out-dir", default=".", help="directory for the CSV output")
    p.set_defaults(func=cmd_figures)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (None, 0) else int(exc.code)
    try:
        return args.func(args)
    except (ValueError, OverflowError) as exc:
        print(f"rhlab: invalid arguments: {exc}", file=sys.stderr)
        return 2
    except (ArithmeticError, RuntimeError, LookupError) as exc:
        print(f"rhlab: computation failed: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
