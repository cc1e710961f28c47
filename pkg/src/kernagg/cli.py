"""Command-line front end: simulate, machines, project, aggregate, bound,
experiment, summarize, report.

Every subcommand reads and writes plain CSV/JSON files so stages can be
chained: simulate -> machines -> project -> aggregate, or the whole
protocol in one go with experiment.  Exit codes: 0 success, 2 bad
configuration or arguments, 3 bad data, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .aggregator import (
    AggregatorModel,
    KernelSpec,
    build_full,
    predict_batch,
    save_model,
    tune_bandwidth,
)
from .datamodel import (
    load_csv,
    load_prediction_matrix,
    load_vector_csv,
    save_csv,
    save_prediction_matrix,
    save_vector_csv,
)
from .errors import ConfigError, DataError, KernaggError, NumericalError
from .harness import (
    build_experiment_config,
    desk_preset_overrides,
    load_results,
    parse_config_file,
    run_experiment,
    summarize,
    timing_report,
    write_result_files,
    write_summary_csv,
    write_summary_json,
)
from .learners import build_prediction_matrix, desk_grid, fit_grid, paper_grid
from .projection import min_projection_dim, project, sample_projection
from .simgen import SimModelSpec, generate

__all__ = ["main", "build_parser"]

logger = logging.getLogger(__name__)

_TUNE_NAMES = {"gd": "gradient_descent", "grid": "grid"}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kernagg",
        description="Kernel-based consensual aggregation of regression machines"
        " on random-projected prediction features.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="draw one synthetic benchmark dataset to CSV")
    p.add_argument("--model", type=int, required=True, choices=range(1, 6))
    p.add_argument("--n", type=int, default=None, help="sample size (model default if omitted)")
    p.add_argument("--d", type=int, default=None, help="dimension (model default if omitted)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output CSV path (features x1..xd, target y)")

    p = sub.add_parser("machines", help="fit the machine grid, emit its prediction matrix")
    p.add_argument("--build", required=True, help="training CSV (machines fit here)")
    p.add_argument("--query", required=True, help="CSV of rows to predict")
    p.add_argument("--target", required=True, help="target column name in both files")
    p.add_argument("--preset", choices=("paper", "desk"), default="desk")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="prediction-matrix CSV path")

    p = sub.add_parser("project", help="random-project a prediction matrix to m columns")
    p.add_argument("--features", required=True, help="prediction-matrix CSV")
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)

    p = sub.add_parser("aggregate", help="fit the kernel aggregator and predict queries")
    p.add_argument("--features", required=True, help="prediction matrix over aggregation rows")
    p.add_argument("--response", required=True, help="single-column CSV of responses")
    p.add_argument("--queries", required=True, help="prediction matrix over query rows")
    p.add_argument("--alpha", type=float, default=2.0)
    p.add_argument("--sigma", type=float, default=1.0)
    group = p.add_mutually_exclusive_group()
    group.add_argument("--h", type=float, default=None, help="fixed bandwidth")
    group.add_argument("--tune", choices=tuple(_TUNE_NAMES), default=None)
    proj = p.add_mutually_exclusive_group(required=True)
    proj.add_argument("--m", type=int, default=None, help="projection dimension")
    proj.add_argument("--full", action="store_true", help="aggregate without projection")
    p.add_argument("--seed", type=int, default=0, help="projection and tuning seed")
    p.add_argument("--out", required=True, help="output CSV of predictions")
    p.add_argument("--save-model", default=None, help="also persist the fitted aggregator")

    p = sub.add_parser("bound", help="minimum projection dimension for an accuracy target")
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--h", type=float, required=True)
    p.add_argument("--alpha", type=float, default=2.0)
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--r0", type=float, required=True, help="bound on |machine predictions|")

    p = sub.add_parser("experiment", help="run the replicated benchmark protocol")
    p.add_argument("--config", default=None, help="key=value config file")
    p.add_argument("--preset", choices=("desk",), default=None, help="desk-scale override set")
    p.add_argument("--data", choices=("sim", "csv"), default=None)
    p.add_argument("--model", type=int, default=None)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--d", type=int, default=None)
    p.add_argument("--csv", default=None, help="CSV data file (data=csv)")
    p.add_argument("--target", default=None, help="target column (data=csv)")
    p.add_argument("--test-fraction", type=float, default=None)
    p.add_argument("--grid", choices=("paper", "desk"), default=None)
    p.add_argument("--m-sweep", default=None, help="comma list, a:b or a:b:step ranges allowed")
    p.add_argument("--replications", type=int, default=None)
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--sigma", type=float, default=None)
    p.add_argument("--tune", choices=tuple(_TUNE_NAMES), default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out-dir", default=None, help="directory for result files")

    p = sub.add_parser("summarize", help="summary tables from a finished run")
    p.add_argument("--runs", required=True, help="runs.csv path")
    p.add_argument("--timings", default=None, help="timings.csv path")
    p.add_argument("--out-dir", default=None, help="write summary.csv and summary.json here")

    p = sub.add_parser("report", help="render benchmark figures from result files")
    p.add_argument("--runs", required=True, help="runs.csv path")
    p.add_argument("--timings", default=None, help="timings.csv path")
    p.add_argument("--out-dir", required=True)

    return parser


def _cmd_simulate(args: argparse.Namespace) -> int:
    ds = generate(SimModelSpec(args.model, args.n, args.d, seed=args.seed))
    save_csv(ds, args.out)
    print(f"wrote {ds.n} rows x {ds.d} features to {args.out}")
    return 0


def _cmd_machines(args: argparse.Namespace) -> int:
    build = load_csv(args.build, args.target)
    query = load_csv(args.query, args.target)
    grid = paper_grid() if args.preset == "paper" else desk_grid()
    machines = fit_grid(build, grid, args.seed)
    pm = build_prediction_matrix(machines, query)
    save_prediction_matrix(
        pm,
        args.out,
        provenance={
            "build": str(args.build),
            "query": str(args.query),
            "preset": args.preset,
            "seed": args.seed,
        },
    )
    print(f"wrote {pm.n} x {pm.M} prediction matrix to {args.out}")
    return 0


def _cmd_project(args: argparse.Namespace) -> int:
    pm = load_prediction_matrix(args.features)
    G = sample_projection(pm.M, args.m, args.seed)
    projected = project(pm, G)
    save_prediction_matrix(
        projected,
        args.out,
        provenance={"source": str(args.features), "m": args.m, "seed": args.seed},
    )
    print(f"projected {pm.M} -> {args.m} columns, wrote {args.out}")
    return 0


def _cmd_aggregate(args: argparse.Namespace) -> int:
    features = load_prediction_matrix(args.features)
    responses = load_vector_csv(args.response)
    queries = load_prediction_matrix(args.queries)
    template = (args.alpha, args.sigma)
    tune_method = _TUNE_NAMES[args.tune] if args.tune else "gradient_descent"

    if args.full:
        agg_features = features
        G = None
    else:
        G = sample_projection(features.M, args.m, args.seed)
        agg_features = project(features, G)

    if args.h is not None:
        kernel = KernelSpec(args.alpha, args.sigma, args.h)
    else:
        kernel, _ = tune_bandwidth(agg_features, responses, template, tune_method, args.seed)
        logger.info("tuned bandwidth h=%g", kernel.h)

    if G is None:
        model = build_full(features, responses, kernel)
    else:
        model = AggregatorModel(agg_features, responses, kernel, projection=G)
    predictions = predict_batch(model, queries.values)
    save_vector_csv(predictions, args.out, name="prediction")
    if args.save_model:
        save_model(model, args.save_model)
        print(f"saved model to {args.save_model}")
    underflows = model.diagnostics.count
    tag = "full" if G is None else f"m={args.m}"
    print(
        f"aggregated ({tag}, h={kernel.h:g}) {queries.n} queries -> {args.out}"
        + (f" [{underflows} all-zero weight rows]" if underflows else "")
    )
    return 0


def _cmd_bound(args: argparse.Namespace) -> int:
    result = min_projection_dim(
        args.epsilon, args.delta, args.n, args.h, args.alpha, args.sigma, args.r0
    )
    print(
        json.dumps(
            {
                "m_min": result.m_min,
                "c1": result.c1,
                "threshold": result.threshold,
                "large_n_estimate": result.large_n_estimate,
            },
            indent=2,
        )
    )
    return 0


def _experiment_settings(args: argparse.Namespace) -> dict[str, str]:
    settings = parse_config_file(args.config) if args.config else {}
    if args.preset == "desk":
        settings.update(desk_preset_overrides())
    overrides = {
        "data": args.data,
        "model": args.model,
        "n": args.n,
        "d": args.d,
        "csv": args.csv,
        "target": args.target,
        "test_fraction": args.test_fraction,
        "grid": args.grid,
        "m_sweep": args.m_sweep,
        "replications": args.replications,
        "alpha": args.alpha,
        "sigma": args.sigma,
        "tune": args.tune,
        "seed": args.seed,
        "out_dir": args.out_dir,
    }
    for key, value in overrides.items():
        if value is not None:
            settings[key] = str(value)
    return settings


def _print_summary(rows) -> None:
    width = max(len(r.method) for r in rows)
    for row in rows:
        seconds = f"  {row.mean_seconds:8.3f}s" if row.mean_seconds is not None else ""
        flag = "  [single run]" if row.degenerate else ""
        print(
            f"{row.method:<{width}}  rmse {row.mean_rmse:.4f} +/- {row.std_rmse:.4f}"
            f" (n={row.n_runs}){seconds}{flag}"
        )


def _cmd_experiment(args: argparse.Namespace) -> int:
    config = build_experiment_config(_experiment_settings(args))
    results = run_experiment(config)
    rows = summarize(results)
    _print_summary(rows)
    if config.output_dir:
        print(f"result files in {config.output_dir}")
    return 0


def _cmd_summarize(args: argparse.Namespace) -> int:
    results = load_results(args.runs, args.timings)
    rows = summarize(results)
    _print_summary(rows)
    if args.timings:
        for row in timing_report(results):
            ratio = (
                f"  full/this {row.ratio_full_over_this:.2f}x"
                if row.ratio_full_over_this is not None
                else ""
            )
            print(
                f"{row.method}: mean {row.mean_seconds:.3f}s"
                f" median {row.median_seconds:.3f}s{ratio}"
            )
    if args.out_dir:
        out = Path(args.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_summary_csv(rows, out / "summary.csv")
        write_summary_json(rows, out / "summary.json")
        print(f"wrote summary.csv and summary.json to {out}")
    return 0


def _cmd_report(args: argparse.Namespace) -> int:
    from .report import render_report  # deferred: pulls in matplotlib

    written = render_report(args.runs, args.out_dir, args.timings)
    for path in written:
        print(f"wrote {path}")
    return 0


_COMMANDS = {
    "simulate": _cmd_simulate,
    "machines": _cmd_machines,
    "project": _cmd_project,
    "aggregate": _cmd_aggregate,
    "bound": _cmd_bound,
    "experiment": _cmd_experiment,
    "summarize": _cmd_summarize,
    "report": _cmd_report,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except NumericalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except KernaggError as exc:  # base-class fallback, treated as config
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
