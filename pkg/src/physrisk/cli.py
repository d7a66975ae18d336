"""Command line entry point: one subcommand per pipeline stage.

Every subcommand accepts ``--seed``, ``--jobs``, ``--strict`` and ``--out-dir``.
Relative output paths are resolved against ``--out-dir``. Failures print a JSON
error object on stderr and exit nonzero.
"""
from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

from . import __version__
from . import pipeline as pl
from .data import MonthStamp
from .errors import PhysRiskError


def _month(text: str) -> MonthStamp:
    try:
        return MonthStamp.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _years(text: str) -> tuple[int, int]:
    a, b = text.split(":")
    return int(a), int(b)


def _month_range(text: str) -> tuple[MonthStamp, MonthStamp]:
    a, b = text.split(":")
    return _month(a), _month(b)


def _ints(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x]


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="master seed for all stochastic stages")
    common.add_argument("--jobs", type=int, default=1, help="worker processes for sweeps")
    common.add_argument("--strict", action="store_true", help="treat a failed conditioning gate as an error")
    common.add_argument("--out-dir", type=Path, default=Path("."), help="directory for relative output paths")

    parser = argparse.ArgumentParser(prog="physrisk", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, help_):
        return sub.add_parser(name, parents=[common], help=help_)

    p = add("fit-anomalies", "standardized anomalies, event flags and logistic trend models")
    p.add_argument("--temps", required=True, type=Path)
    p.add_argument("--baseline", type=_years, default=(1960, 1990))
    p.add_argument("--threshold", type=float, default=2.0)
    p.add_argument("--train-end", type=_month, default=None)
    p.add_argument("--out", type=Path, default=Path("anomalies.csv"))
    p.add_argument("--model-out", type=Path, default=Path("logistic.json"))

    p = add("bounds", "empirical indicator correlations and attainable bounds")
    p.add_argument("--anomalies", required=True, type=Path)
    p.add_argument("--model", required=True, type=Path)
    p.add_argument("--horizon", type=_month_range, default=None)
    p.add_argument("--out", type=Path, default=Path("bounds.csv"))

    p = add("climate-metrics", "climate weights, CRE and CEV of one portfolio")
    p.add_argument("--weights", required=True, type=Path)
    p.add_argument("--firms", required=True, type=Path)
    p.add_argument("--model", required=True, type=Path)
    p.add_argument("--corr", required=True, type=Path)
    p.add_argument("--at", required=True, type=_month)
    p.add_argument("--scenario", choices=("empirical", "max", "min"), default="empirical")
    p.add_argument("--out", type=Path, default=None, help="CSV path; stdout when omitted")

    p = add("regress", "sector return regressions on event indicators")
    p.add_argument("--returns", required=True, type=Path)
    p.add_argument("--market", required=True, type=Path)
    p.add_argument("--riskfree", required=True, type=Path)
    p.add_argument("--anomalies", required=True, type=Path)
    p.add_argument("--mode", choices=("pair", "panel", "pooled"), default="pair")
    p.add_argument("--hac-lags", type=int, default=None)
    p.add_argument("--out", type=Path, default=Path("results.csv"))

    p = add("estimate", "expected returns and shrunk covariance")
    p.add_argument("--returns", required=True, type=Path)
    p.add_argument("--frequency", choices=("daily", "monthly"), default="monthly")
    p.add_argument("--asof", required=True, type=_month)
    p.add_argument("--window-years", type=int, default=5)
    p.add_argument("--periods-per-month", type=float, default=21)
    p.add_argument("--out", type=Path, default=Path("inputs.json"))

    def optimizer_inputs(p):
        p.add_argument("--inputs", required=True, type=Path)
        p.add_argument("--firms", required=True, type=Path)
        p.add_argument("--model", required=True, type=Path)
        p.add_argument("--corr", required=True, type=Path)
        p.add_argument("--config", type=Path, default=None, help="MOPSO parameters as JSON")
        p.add_argument("--at", type=_month, default=None, help="month for event probabilities (default: month before as-of)")
        p.add_argument("--scenario", choices=("empirical", "max", "min"), default="empirical")

    p = add("optimize", "approximate the three-objective Pareto front")
    optimizer_inputs(p)
    p.add_argument("--climate", choices=("cev", "cre", "none"), default="cev")
    p.add_argument("--out", type=Path, default=Path("front.csv"))

    p = add("analyze-front", "hypervolume, spacing, composition distances and slices")
    p.add_argument("--front", required=True, type=Path)
    p.add_argument("--ref", default="auto", help="'auto' or comma-separated reference point")
    p.add_argument("--bins", type=int, default=6)
    p.add_argument("--out", type=Path, default=Path("metrics.json"))
    p.add_argument("--heatmap", type=Path, default=None)
    p.add_argument("--slices", type=Path, default=None)

    p = add("backtest", "rolling monthly re-optimization and performance report")
    p.add_argument("--config", required=True, type=Path)
    p.add_argument("--temps", required=True, type=Path)
    p.add_argument("--firms", required=True, type=Path)
    p.add_argument("--returns", required=True, type=Path, help="monthly returns")
    p.add_argument("--daily", type=Path, default=None, help="daily returns for the covariance")
    p.add_argument("--caps", type=Path, default=None)
    p.add_argument("--out", type=Path, default=Path("report.json"))
    p.add_argument("--series", type=Path, default=None)

    p = add("sweep", "replicated runs over a hyperparameter grid")
    optimizer_inputs(p)
    p.add_argument("--iter", type=_ints, default=[300])
    p.add_argument("--n-pop", type=_ints, default=[500])
    p.add_argument("--n-rep", type=_ints, default=[100, 200, 400])
    p.add_argument("--replications", type=int, default=10)
    p.add_argument("--out", type=Path, default=Path("sweep.csv"))

    p = add("synth", "write a seeded synthetic input set")
    p.add_argument("--firms", type=int, default=10)
    p.add_argument("--regions", type=int, default=6)
    p.add_argument("--months", type=int, default=1032, help="temperature months from 1940-01")
    p.add_argument("--return-months", type=int, default=84)
    p.add_argument("--sectors", type=int, default=3)

    p = add("run-all", "every stage in order with a run manifest")
    p.add_argument("--temps", required=True, type=Path)
    p.add_argument("--firms", required=True, type=Path)
    p.add_argument("--returns", required=True, type=Path)
    p.add_argument("--daily", type=Path, default=None)
    p.add_argument("--caps", type=Path, default=None)
    p.add_argument("--mopso", type=Path, default=None)
    p.add_argument("--backtest", type=Path, default=None)
    p.add_argument("--train-end", type=_month, default=None)
    return parser


def _dispatch(args) -> list[Path]:
    out = lambda p: None if p is None else (p if p.is_absolute() else args.out_dir / p)  # noqa: E731
    cmd = args.command
    if cmd == "fit-anomalies":
        return pl.fit_anomalies_stage(args.temps, out(args.out), out(args.model_out), args.baseline, args.threshold, args.train_end)
    if cmd == "bounds":
        return pl.bounds_stage(args.anomalies, args.model, out(args.out), args.horizon)
    if cmd == "climate-metrics":
        return pl.climate_metrics_stage(args.weights, args.firms, args.model, args.corr, args.at, args.scenario, out(args.out))
    if cmd == "regress":
        return pl.regress_stage(args.returns, args.market, args.riskfree, args.anomalies, out(args.out), args.mode, args.hac_lags)
    if cmd == "estimate":
        return pl.estimate_stage(
            args.returns, args.asof, out(args.out), args.frequency, args.window_years, args.periods_per_month, args.strict
        )
    if cmd == "optimize":
        return pl.optimize_stage(
            args.inputs, args.firms, args.model, args.corr, out(args.out), args.config, args.seed, args.at,
            args.scenario, args.climate,
        )
    if cmd == "analyze-front":
        return pl.analyze_front_stage(args.front, out(args.out), out(args.heatmap), out(args.slices), args.ref, args.bins)
    if cmd == "backtest":
        written, _ = pl.backtest_stage(
            args.config, args.temps, args.firms, args.returns, out(args.out), out(args.series), args.caps, args.daily, args.seed
        )
        return written
    if cmd == "sweep":
        grid = {"iter": args.iter, "n_pop": args.n_pop, "n_rep": args.n_rep}
        return pl.sweep_stage(
            args.inputs, args.firms, args.model, args.corr, out(args.out), grid, args.replications, args.config,
            args.seed or 0, args.jobs, args.at, args.scenario,
        )
    if cmd == "synth":
        return pl.synth_stage(args.out_dir, args.seed or 0, args.firms, args.regions, args.months, args.return_months, args.sectors)
    raise AssertionError(cmd)


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    args = build_parser().parse_args(argv)
    args.out_dir.mkdir(parents=True, exist_ok=True)
    try:
        if args.command == "run-all":
            pl.run_all(
                args.out_dir, args.temps, args.firms, args.returns, args.caps, args.daily, args.mopso, args.backtest,
                args.seed or 0, args.train_end, command=["physrisk", *argv], strict=args.strict,
            )
            return 0
        manifest = pl.RunManifest(["physrisk", *argv], args.seed)
        t0 = time.perf_counter()
        written = _dispatch(args)
        manifest.stage_seconds[args.command] = time.perf_counter() - t0
        manifest.record(written, args.out_dir)
        manifest.write(args.out_dir / f"{args.command}.manifest.json")
        return 0
    except PhysRiskError as exc:
        print(json.dumps({"command": args.command, **exc.to_dict()}), file=sys.stderr)
        return 2
    except (ValueError, KeyError, OSError) as exc:
        print(json.dumps({"command": args.command, "error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
