"""End-to-end benchmark protocol: split, fit grid, aggregate, sweep, report.

Each replication draws (or reloads) the data, splits 80/20 into train and
test, halves the training rows into build and aggregation parts, fits the
machine grid on the build part, and evaluates on the test part: the best
and worst machine of every family, the full aggregator, and one projected
aggregator per requested projection dimension m, each with an independent
Gaussian projection seeded per (replication, m).  Wall-clock is measured
around aggregator tuning + prediction only, so machine fitting never
contaminates the method comparison.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .aggregator import (
    AggregatorModel,
    KernelSpec,
    build_full,
    predict_batch,
    tune_bandwidth,
)
from .datamodel import Dataset, SplitSpec, load_csv, partition_train, rmse, split, subset
from .errors import ConfigError, DataError, KernaggError, NumericalError
from .learners import FAMILIES, GridSpec, build_prediction_matrix, desk_grid, fit_grid, paper_grid
from .projection import project, sample_projection
from .seeding import (
    STAGE_DATA,
    STAGE_MACHINES,
    STAGE_PARTITION,
    STAGE_PROJECTION,
    STAGE_SPLIT,
    STAGE_TUNING,
    derive_seed,
)
from .simgen import SimModelSpec, generate

__all__ = [
    "SimSource",
    "CsvSource",
    "ExperimentConfig",
    "MethodOutcome",
    "RunResult",
    "ReplicationFailure",
    "SummaryRow",
    "TimingRow",
    "run_replication",
    "run_experiment",
    "summarize",
    "best_machine_rmse",
    "timing_report",
    "write_runs_csv",
    "load_runs_csv",
    "write_timings_csv",
    "load_timings_csv",
    "load_results",
    "write_summary_csv",
    "write_summary_json",
    "write_result_files",
    "parse_config_file",
    "build_experiment_config",
    "desk_preset_overrides",
    "DEFAULT_M_SWEEP",
]

logger = logging.getLogger(__name__)

DEFAULT_M_SWEEP: tuple[int, ...] = tuple(range(2, 10)) + tuple(range(100, 1000, 100))
SANITY_RMSE_FACTOR = 10.0


@dataclass(frozen=True)
class SimSource:
    """Synthetic data source: one of the five benchmark models."""

    model_id: int
    n: int | None = None
    d: int | None = None

    def __post_init__(self) -> None:
        SimModelSpec(self.model_id, self.n, self.d, seed=0)


@dataclass(frozen=True)
class CsvSource:
    """Local CSV file with a named target column."""

    path: str
    target: str


@dataclass(frozen=True)
class ExperimentConfig:
    data: SimSource | CsvSource
    grid: GridSpec
    m_sweep: tuple[int, ...] = DEFAULT_M_SWEEP
    replications: int = 30
    kernel_alpha: float = 2.0
    kernel_sigma: float = 1.0
    tune_method: str = "gradient_descent"
    base_seed: int = 0
    test_fraction: float = 0.2
    output_dir: str | None = None

    def __post_init__(self) -> None:
        if self.replications < 1:
            raise ConfigError(f"replications must be >= 1, got {self.replications}")
        M = self.grid.machine_count
        bad = [m for m in self.m_sweep if not 1 <= m <= M]
        if bad:
            raise ConfigError(f"m values must lie in [1, {M}] (grid size), got {bad}")
        if self.tune_method not in ("gradient_descent", "grid"):
            raise ConfigError(f"unknown tuning method '{self.tune_method}'")
        if not 0.0 < self.test_fraction < 1.0:
            raise ConfigError(f"test_fraction must be in (0,1), got {self.test_fraction}")
        if self.kernel_alpha < 0.0 or self.kernel_sigma <= 0.0:
            raise ConfigError("kernel needs alpha >= 0 and sigma > 0")
        if self.base_seed < 0:
            raise ConfigError("base seed must be non-negative")
        object.__setattr__(self, "m_sweep", tuple(int(m) for m in self.m_sweep))


@dataclass(frozen=True)
class MethodOutcome:
    """Test RMSE of one method in one replication."""

    method: str
    rmse: float
    m: int | None = None
    tuned_h: float | None = None
    seconds: float | None = None
    g_seed: int | None = None


@dataclass(frozen=True)
class RunResult:
    """Everything recorded for one replication."""

    replication: int
    outcomes: tuple[MethodOutcome, ...]
    seeds: dict[str, int] = field(default_factory=dict)
    machine_rmses: dict[str, dict[str, float]] | None = None

    def outcome(self, method: str) -> MethodOutcome:
        for entry in self.outcomes:
            if entry.method == method:
                return entry
        raise KeyError(method)


class ReplicationFailure(KernaggError):
    """A replication stage failed; names the stage and its seed."""

    def __init__(self, replication: int, stage: str, seed: int | None, cause: Exception):
        self.replication = replication
        self.stage = stage
        self.seed = seed
        self.cause = cause
        super().__init__(
            f"replication {replication} failed at stage '{stage}'"
            f" (seed={seed}): {cause}"
        )


def _load_source(config: ExperimentConfig, data_seed: int) -> Dataset:
    if isinstance(config.data, SimSource):
        spec = SimModelSpec(config.data.model_id, config.data.n, config.data.d, seed=data_seed)
        return generate(spec)
    return load_csv(config.data.path, config.data.target)


def _canonical_order(outcomes: list[MethodOutcome]) -> list[MethodOutcome]:
    def key(entry: MethodOutcome) -> tuple:
        parts = entry.method.split("_")
        if entry.method.endswith("_best") or entry.method.endswith("_worst"):
            family = entry.method.rsplit("_", 1)[0]
            return (0, FAMILIES.index(family), 0 if parts[-1] == "best" else 1)
        if entry.method.startswith("comb_m_"):
            return (1, entry.m, 0)
        return (2, 0, 0)  # comb_full last

    return sorted(outcomes, key=key)


def run_replication(config: ExperimentConfig, replication: int) -> RunResult:
    """Run one replication; every stochastic stage has a derived seed.

    The dataset itself is drawn once per experiment (its seed does not
    involve the replication index); replications differ in the split, the
    partition, machine seeds, projections, and tuning.
    """
    base = config.base_seed
    seeds = {
        "data": derive_seed(base, STAGE_DATA),
        "split": derive_seed(base, STAGE_SPLIT, replication),
        "partition": derive_seed(base, STAGE_PARTITION, replication),
        "machines": derive_seed(base, STAGE_MACHINES, replication),
    }

    def stage(name: str, seed: int | None, fn):
        try:
            return fn()
        except KernaggError as exc:
            raise ReplicationFailure(replication, name, seed, exc) from exc

    full_data = stage("data", seeds["data"], lambda: _load_source(config, seeds["data"]))
    train, test = stage(
        "split",
        seeds["split"],
        lambda: split(full_data, SplitSpec(config.test_fraction, seeds["split"])),
    )
    partition = stage(
        "partition", seeds["partition"], lambda: partition_train(train, seeds["partition"])
    )
    build_ds = subset(train, partition.build_indices, name=f"{full_data.name}:build")
    agg_ds = subset(train, partition.aggregation_indices, name=f"{full_data.name}:agg")

    machines = stage(
        "machines", seeds["machines"], lambda: fit_grid(build_ds, config.grid, seeds["machines"])
    )
    agg_features = stage(
        "machines", seeds["machines"], lambda: build_prediction_matrix(machines, agg_ds)
    )
    test_features = stage(
        "machines", seeds["machines"], lambda: build_prediction_matrix(machines, test)
    )

    # Per-machine test RMSE, grouped by family.
    errors = test_features.values - test.response[:, None]
    per_machine = np.sqrt(np.mean(errors**2, axis=0))
    machine_rmses: dict[str, dict[str, float]] = {}
    for machine, value in zip(machines, per_machine):
        machine_rmses.setdefault(machine.spec.family, {})[machine.spec.label] = float(value)

    outcomes: list[MethodOutcome] = []
    for family, table in machine_rmses.items():
        values = list(table.values())
        outcomes.append(MethodOutcome(f"{family}_best", min(values)))
        outcomes.append(MethodOutcome(f"{family}_worst", max(values)))

    baseline = rmse(np.full(test.n, float(agg_ds.response.mean())), test.response)
    template = (config.kernel_alpha, config.kernel_sigma)

    def check_sane(method: str, value: float) -> None:
        if not math.isfinite(value) or value > SANITY_RMSE_FACTOR * baseline:
            raise ReplicationFailure(
                replication,
                f"sanity:{method}",
                None,
                NumericalError(
                    f"{method} RMSE {value} exceeds {SANITY_RMSE_FACTOR} x"
                    f" constant-mean baseline {baseline}"
                ),
            )

    def aggregate_full() -> MethodOutcome:
        tune_seed = derive_seed(base, STAGE_TUNING, replication, 0)
        start = time.perf_counter()
        kernel, _ = tune_bandwidth(
            agg_features, agg_ds.response, template, config.tune_method, tune_seed
        )
        model = build_full(agg_features, agg_ds.response, kernel)
        predictions = predict_batch(model, test_features.values)
        seconds = time.perf_counter() - start
        value = rmse(predictions, test.response)
        check_sane("comb_full", value)
        return MethodOutcome("comb_full", value, tuned_h=kernel.h, seconds=seconds)

    outcomes.append(stage("aggregate:full", None, aggregate_full))

    for m in config.m_sweep:
        g_seed = derive_seed(base, STAGE_PROJECTION, replication, m)
        tune_seed = derive_seed(base, STAGE_TUNING, replication, m)

        def aggregate_projected(m: int = m, g_seed: int = g_seed, tune_seed: int = tune_seed):
            start = time.perf_counter()
            G = sample_projection(agg_features.M, m, g_seed)
            projected = project(agg_features, G)
            kernel, _ = tune_bandwidth(
                projected, agg_ds.response, template, config.tune_method, tune_seed
            )
            # Assembled directly from the already-projected features;
            # equivalent to build_projected, which would project again.
            model = AggregatorModel(projected, agg_ds.response, kernel, projection=G)
            predictions = predict_batch(model, test_features.values)
            seconds = time.perf_counter() - start
            value = rmse(predictions, test.response)
            method = f"comb_m_{m}"
            check_sane(method, value)
            return MethodOutcome(
                method, value, m=m, tuned_h=kernel.h, seconds=seconds, g_seed=g_seed
            )

        outcomes.append(stage(f"aggregate:m={m}", g_seed, aggregate_projected))

    return RunResult(
        replication=replication,
        outcomes=tuple(_canonical_order(outcomes)),
        seeds=seeds,
        machine_rmses=machine_rmses,
    )


def run_experiment(config: ExperimentConfig) -> list[RunResult]:
    """Run all replications; failures are logged and skipped, not fatal.

    When config.output_dir is set, runs.csv / summary.csv / summary.json /
    timings.csv / replications.json are written there.
    """
    results: list[RunResult] = []
    failures: list[ReplicationFailure] = []
    for r in range(config.replications):
        try:
            results.append(run_replication(config, r))
            logger.info("replication %d/%d done", r + 1, config.replications)
        except ReplicationFailure as failure:
            logger.error("%s", failure)
            failures.append(failure)
    if not results:
        raise NumericalError(f"all {config.replications} replications failed")
    if config.output_dir is not None:
        write_result_files(results, Path(config.output_dir), failures=failures)
    return results


def best_machine_rmse(result: RunResult) -> dict[str, float]:
    """Per-family minimum test RMSE over that family's machines."""
    if result.machine_rmses:
        out = {}
        for family, table in result.machine_rmses.items():
            if not table:
                raise DataError(f"family '{family}' has no machines")
            out[family] = min(table.values())
        return out
    out = {}
    for entry in result.outcomes:
        if entry.method.endswith("_best"):
            out[entry.method.rsplit("_", 1)[0]] = entry.rmse
    if not out:
        raise DataError("result carries no per-family entries")
    return out


@dataclass(frozen=True)
class SummaryRow:
    method: str
    mean_rmse: float
    std_rmse: float
    mean_seconds: float | None
    n_runs: int
    degenerate: bool


def summarize(results: list[RunResult]) -> list[SummaryRow]:
    """Mean and sample standard deviation of RMSE (and seconds) per method.

    A single replication yields std 0 flagged as degenerate rather than a
    NaN from the ddof=1 estimator.
    """
    if not results:
        raise DataError("no results to summarize")
    by_method: dict[str, list[MethodOutcome]] = {}
    order: list[str] = []
    for result in results:
        for entry in result.outcomes:
            if entry.method not in by_method:
                by_method[entry.method] = []
                order.append(entry.method)
            by_method[entry.method].append(entry)
    rows = []
    for method in order:
        entries = by_method[method]
        values = np.array([e.rmse for e in entries])
        degenerate = values.size == 1
        std = 0.0 if degenerate else float(np.std(values, ddof=1))
        seconds = [e.seconds for e in entries if e.seconds is not None]
        rows.append(
            SummaryRow(
                method=method,
                mean_rmse=float(values.mean()),
                std_rmse=std,
                mean_seconds=float(np.mean(seconds)) if seconds else None,
                n_runs=int(values.size),
                degenerate=degenerate,
            )
        )
    return rows


@dataclass(frozen=True)
class TimingRow:
    method: str
    mean_seconds: float
    median_seconds: float
    ratio_full_over_this: float | None


def timing_report(results: list[RunResult]) -> list[TimingRow]:
    """Wall-clock statistics per aggregator, with Comb_Full / Comb_m ratios."""
    if not results:
        raise DataError("no results to report timings for")
    by_method: dict[str, list[float]] = {}
    for result in results:
        for entry in result.outcomes:
            if entry.seconds is not None:
                by_method.setdefault(entry.method, []).append(entry.seconds)
    if not by_method:
        raise DataError("results carry no timings")
    full_mean = np.mean(by_method["comb_full"]) if "comb_full" in by_method else None
    rows = []
    for method, seconds in by_method.items():
        mean = float(np.mean(seconds))
        rows.append(
            TimingRow(
                method=method,
                mean_seconds=mean,
                median_seconds=float(np.median(seconds)),
                ratio_full_over_this=None if full_mean is None else float(full_mean / mean),
            )
        )
    return rows


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_runs_csv(results: list[RunResult], path: str | Path) -> None:
    """One row per replication x method; no wall-clock inside (see timings)."""
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["replication", "method", "m", "rmse", "tuned_h", "g_seed"])
        for result in results:
            for entry in result.outcomes:
                writer.writerow(
                    [
                        result.replication,
                        entry.method,
                        _fmt(entry.m),
                        _fmt(entry.rmse),
                        _fmt(entry.tuned_h),
                        _fmt(entry.g_seed),
                    ]
                )


def load_runs_csv(path: str | Path) -> list[RunResult]:
    """Rebuild per-replication results (method outcomes only) from runs.csv."""
    path = Path(path)
    if not path.is_file():
        raise DataError(f"no such file: {path}")
    by_rep: dict[int, list[MethodOutcome]] = {}
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        expected = {"replication", "method", "m", "rmse", "tuned_h", "g_seed"}
        if reader.fieldnames is None or set(reader.fieldnames) != expected:
            raise DataError(f"{path} does not look like a runs.csv (columns {reader.fieldnames})")
        for i, row in enumerate(reader, start=1):
            try:
                rep = int(row["replication"])
                entry = MethodOutcome(
                    method=row["method"],
                    rmse=float(row["rmse"]),
                    m=int(row["m"]) if row["m"] else None,
                    tuned_h=float(row["tuned_h"]) if row["tuned_h"] else None,
                    g_seed=int(row["g_seed"]) if row["g_seed"] else None,
                )
            except ValueError as exc:
                raise DataError(f"bad row {i} in {path}: {exc}") from None
            by_rep.setdefault(rep, []).append(entry)
    return [
        RunResult(replication=rep, outcomes=tuple(entries))
        for rep, entries in sorted(by_rep.items())
    ]


def write_timings_csv(results: list[RunResult], path: str | Path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["replication", "method", "seconds"])
        for result in results:
            for entry in result.outcomes:
                if entry.seconds is not None:
                    writer.writerow([result.replication, entry.method, _fmt(entry.seconds)])


def load_timings_csv(path: str | Path) -> dict[tuple[int, str], float]:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"no such file: {path}")
    out: dict[tuple[int, str], float] = {}
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        for i, row in enumerate(reader, start=1):
            try:
                out[(int(row["replication"]), row["method"])] = float(row["seconds"])
            except (KeyError, TypeError, ValueError) as exc:
                raise DataError(f"bad row {i} in {path}: {exc}") from None
    return out


def load_results(runs_path: str | Path, timings_path: str | Path | None = None) -> list[RunResult]:
    """Reload results from runs.csv, merging timings.csv back in when given."""
    results = load_runs_csv(runs_path)
    if timings_path is None:
        return results
    timings = load_timings_csv(timings_path)
    merged = []
    for result in results:
        outcomes = tuple(
            MethodOutcome(
                method=e.method,
                rmse=e.rmse,
                m=e.m,
                tuned_h=e.tuned_h,
                seconds=timings.get((result.replication, e.method)),
                g_seed=e.g_seed,
            )
            for e in result.outcomes
        )
        merged.append(RunResult(result.replication, outcomes, result.seeds))
    return merged


def write_summary_csv(rows: list[SummaryRow], path: str | Path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["method", "mean_rmse", "std_rmse", "mean_seconds", "n_runs", "degenerate"])
        for row in rows:
            writer.writerow(
                [
                    row.method,
                    _fmt(row.mean_rmse),
                    _fmt(row.std_rmse),
                    _fmt(row.mean_seconds),
                    row.n_runs,
                    _fmt(row.degenerate),
                ]
            )


def write_summary_json(rows: list[SummaryRow], path: str | Path) -> None:
    payload = [
        {
            "method": row.method,
            "mean_rmse": row.mean_rmse,
            "std_rmse": row.std_rmse,
            "mean_seconds": row.mean_seconds,
            "n_runs": row.n_runs,
            "degenerate": row.degenerate,
        }
        for row in rows
    ]
    Path(path).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")


def write_result_files(
    results: list[RunResult],
    out_dir: Path,
    failures: list[ReplicationFailure] | None = None,
) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    write_runs_csv(results, out_dir / "runs.csv")
    write_timings_csv(results, out_dir / "timings.csv")
    rows = summarize(results)
    write_summary_csv(rows, out_dir / "summary.csv")
    write_summary_json(rows, out_dir / "summary.json")
    record = {
        "replications": [
            {"replication": r.replication, "seeds": r.seeds} for r in results
        ],
        "failures": [
            {
                "replication": f.replication,
                "stage": f.stage,
                "seed": f.seed,
                "error": str(f.cause),
            }
            for f in (failures or [])
        ],
    }
    (out_dir / "replications.json").write_text(
        json.dumps(record, indent=2) + "\n", encoding="utf-8"
    )


# --- configuration files -------------------------------------------------

CONFIG_KEYS = {
    "data": "sim or csv",
    "model": "sim model id 1..5",
    "n": "sim sample size override",
    "d": "sim dimension override",
    "csv": "path to a CSV data file",
    "target": "target column for csv data",
    "test_fraction": "held-out fraction (default 0.2)",
    "grid": "machine grid preset: paper or desk",
    "m_sweep": "comma list of m values; a:b or a:b:step ranges allowed",
    "replications": "number of replications",
    "alpha": "kernel exponent alpha",
    "sigma": "kernel scale sigma",
    "tune": "bandwidth tuner: gd or grid",
    "seed": "base seed",
    "out_dir": "directory for result files",
}


def parse_config_file(path: str | Path) -> dict[str, str]:
    """Flat key=value lines; blank lines and #-comments ignored."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"no such config file: {path}")
    out: dict[str, str] = {}
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value, got {line!r}")
        key, value = line.split("=", 1)
        key = key.strip()
        if key not in CONFIG_KEYS:
            raise ConfigError(f"{path}:{lineno}: unknown key '{key}'")
        out[key] = value.strip()
    return out


def parse_m_sweep(text: str) -> tuple[int, ...]:
    """Parse '2:9,100:900:100' style lists of m values."""
    values: list[int] = []
    for token in text.split(","):
        token = token.strip()
        if not token:
            continue
        parts = token.split(":")
        try:
            if len(parts) == 1:
                values.append(int(parts[0]))
            elif len(parts) in (2, 3):
                start, stop = int(parts[0]), int(parts[1])
                step = int(parts[2]) if len(parts) == 3 else 1
                if step < 1 or stop < start:
                    raise ValueError("empty range")
                values.extend(range(start, stop + 1, step))
            else:
                raise ValueError("too many ':'")
        except ValueError as exc:
            raise ConfigError(f"bad m_sweep token {token!r}: {exc}") from None
    if not values:
        raise ConfigError("m_sweep is empty")
    return tuple(values)


def desk_preset_overrides() -> dict[str, str]:
    """Config values pinned by the desk-scale preset."""
    return {"grid": "desk", "n": "200", "m_sweep": "2,5,20", "replications": "5"}


def build_experiment_config(settings: dict[str, str]) -> ExperimentConfig:
    """Materialize an ExperimentConfig from flat string settings."""
    unknown = set(settings) - set(CONFIG_KEYS)
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")

    def get_int(key: str, default: int | None = None) -> int | None:
        if key not in settings:
            return default
        try:
            return int(settings[key])
        except ValueError:
            raise ConfigError(f"config key '{key}' must be an integer, got {settings[key]!r}")

    def get_float(key: str, default: float) -> float:
        if key not in settings:
            return default
        try:
            return float(settings[key])
        except ValueError:
            raise ConfigError(f"config key '{key}' must be a number, got {settings[key]!r}")

    kind = settings.get("data", "sim").lower()
    if kind == "sim":
        model = get_int("model", 1)
        data: SimSource | CsvSource = SimSource(model, get_int("n"), get_int("d"))
    elif kind == "csv":
        if "csv" not in settings or "target" not in settings:
            raise ConfigError("csv data source needs both 'csv' and 'target' keys")
        data = CsvSource(settings["csv"], settings["target"])
    else:
        raise ConfigError(f"data must be 'sim' or 'csv', got {settings['data']!r}")

    grid_name = settings.get("grid", "paper").lower()
    if grid_name == "paper":
        grid = paper_grid()
    elif grid_name == "desk":
        grid = desk_grid()
    else:
        raise ConfigError(f"grid must be 'paper' or 'desk', got {settings['grid']!r}")

    m_sweep = (
        parse_m_sweep(settings["m_sweep"]) if "m_sweep" in settings else DEFAULT_M_SWEEP
    )
    tune = settings.get("tune", "gd").lower()
    tune_method = {"gd": "gradient_descent", "gradient_descent": "gradient_descent", "grid": "grid"}.get(tune)
    if tune_method is None:
        raise ConfigError(f"tune must be 'gd' or 'grid', got {settings['tune']!r}")

    return ExperimentConfig(
        data=data,
        grid=grid,
        m_sweep=m_sweep,
        replications=get_int("replications", 30),
        kernel_alpha=get_float("alpha", 2.0),
        kernel_sigma=get_float("sigma", 1.0),
        tune_method=tune_method,
        base_seed=get_int("seed", 0),
        test_fraction=get_float("test_fraction", 0.2),
        output_dir=settings.get("out_dir"),
    )
