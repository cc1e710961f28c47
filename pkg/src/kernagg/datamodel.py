"""Core data containers, CSV ingestion, deterministic splitting, and RMSE.

Everything downstream (learners, projection, aggregation, the experiment
harness) speaks in terms of the types defined here.  All containers are
immutable after construction: their arrays are marked read-only so they can
be shared freely across threads and replications.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataError

__all__ = [
    "Dataset",
    "SplitSpec",
    "TrainPartition",
    "PredictionMatrix",
    "load_csv",
    "save_csv",
    "split",
    "partition_train",
    "subset",
    "rmse",
    "save_prediction_matrix",
    "load_prediction_matrix",
    "save_vector_csv",
    "load_vector_csv",
]


def _readonly(arr: np.ndarray) -> np.ndarray:
    out = np.array(arr, copy=True)
    out.setflags(write=False)
    return out


def _format_float(x: float) -> str:
    # repr() of a Python float is the shortest string that round-trips the
    # exact double, so persisted values reload bit-for-bit.
    return repr(float(x))


@dataclass(frozen=True)
class Dataset:
    """n rows of (feature vector, scalar response) with named columns."""

    features: np.ndarray
    response: np.ndarray
    column_names: tuple[str, ...]
    name: str = "dataset"

    def __post_init__(self) -> None:
        feats = np.asarray(self.features, dtype=np.float64)
        resp = np.asarray(self.response, dtype=np.float64)
        if feats.ndim != 2 or feats.shape[0] < 1 or feats.shape[1] < 1:
            raise DataError(f"features must be a non-empty 2-d matrix, got shape {feats.shape}")
        if resp.ndim != 1 or resp.shape[0] != feats.shape[0]:
            raise DataError(
                f"response length {resp.shape} does not match {feats.shape[0]} feature rows"
            )
        if not np.isfinite(feats).all():
            raise DataError("features contain non-finite entries")
        if not np.isfinite(resp).all():
            raise DataError("response contains non-finite entries")
        names = tuple(str(c) for c in self.column_names)
        if len(names) != feats.shape[1]:
            raise DataError(
                f"{len(names)} column names for {feats.shape[1]} feature columns"
            )
        if len(set(names)) != len(names):
            raise DataError("column names must be unique")
        object.__setattr__(self, "features", _readonly(feats))
        object.__setattr__(self, "response", _readonly(resp))
        object.__setattr__(self, "column_names", names)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]


@dataclass(frozen=True)
class SplitSpec:
    """Train/test split fraction plus the seed that fixes the permutation."""

    test_fraction: float
    seed: int

    def __post_init__(self) -> None:
        if not 0.0 < self.test_fraction < 1.0:
            raise ConfigError(f"test_fraction must be in (0,1), got {self.test_fraction}")
        if self.seed < 0:
            raise ConfigError("seed must be a non-negative integer")


@dataclass(frozen=True)
class TrainPartition:
    """Disjoint build/aggregation index sets covering the training rows."""

    build_indices: np.ndarray
    aggregation_indices: np.ndarray

    def __post_init__(self) -> None:
        build = np.asarray(self.build_indices, dtype=np.int64)
        agg = np.asarray(self.aggregation_indices, dtype=np.int64)
        n = build.size + agg.size
        combined = np.concatenate([build, agg])
        if not np.array_equal(np.sort(combined), np.arange(n)):
            raise DataError("partition indices must disjointly cover 0..n_train-1")
        n1 = (n + 1) // 2
        if build.size != n1:
            raise DataError(f"build part must have ceil(n/2)={n1} rows, got {build.size}")
        object.__setattr__(self, "build_indices", _readonly(build))
        object.__setattr__(self, "aggregation_indices", _readonly(agg))

    @property
    def n1(self) -> int:
        return self.build_indices.size

    @property
    def n2(self) -> int:
        return self.aggregation_indices.size


@dataclass(frozen=True)
class PredictionMatrix:
    """n×M matrix of base-machine predictions with machine labels.

    bound_R0 is an empirical almost-sure bound on the magnitudes involved;
    it feeds the projection-dimension calculator and must dominate every
    entry of values.
    """

    values: np.ndarray
    machine_labels: tuple[str, ...]
    bound_R0: float

    def __post_init__(self) -> None:
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.ndim != 2 or vals.shape[0] < 1 or vals.shape[1] < 1:
            raise DataError(f"values must be a non-empty 2-d matrix, got shape {vals.shape}")
        if not np.isfinite(vals).all():
            raise DataError("prediction matrix contains non-finite entries")
        labels = tuple(str(c) for c in self.machine_labels)
        if len(labels) != vals.shape[1]:
            raise DataError(f"{len(labels)} labels for {vals.shape[1]} machine columns")
        if len(set(labels)) != len(labels):
            raise DataError("machine labels must be unique")
        r0 = float(self.bound_R0)
        max_abs = float(np.abs(vals).max())
        if not (r0 > 0.0 and np.isfinite(r0)):
            raise DataError(f"bound_R0 must be a positive finite real, got {r0}")
        if r0 < max_abs:
            raise DataError(f"bound_R0={r0} is below the largest entry magnitude {max_abs}")
        object.__setattr__(self, "values", _readonly(vals))
        object.__setattr__(self, "machine_labels", labels)
        object.__setattr__(self, "bound_R0", r0)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def M(self) -> int:
        return self.values.shape[1]


def _parse_cell(text: str, row: int, column: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise DataError(
            f"cell at data row {row}, column '{column}' is not numeric: {text!r}"
        ) from None
    if not math.isfinite(value):
        raise DataError(f"cell at data row {row}, column '{column}' is non-finite: {text!r}")
    return value


def _column_is_numeric(cells: list[str]) -> bool:
    # A column is numeric when every cell parses as a float, and categorical
    # when none does.  Mixed columns are rejected by the caller.
    parses = 0
    for cell in cells:
        try:
            float(cell)
            parses += 1
        except ValueError:
            pass
    if parses == len(cells):
        return True
    if parses == 0:
        return False
    raise DataError("mixed column")


def load_csv(path: str | Path, target_column: str) -> Dataset:
    """Read a UTF-8 comma-separated file with a header row into a Dataset.

    The target column becomes the response.  Columns where no cell parses
    as a number are treated as categorical and one-hot encoded into one
    indicator column per category (named ``column=category``); columns
    mixing numeric and non-numeric cells are rejected with the offending
    cell's position.
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"no such file: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path} is empty") from None
        header = [h.strip() for h in header]
        rows = [row for row in reader if row]
    if len(set(header)) != len(header):
        raise DataError(f"duplicate column names in header of {path}")
    if target_column not in header:
        raise DataError(f"target column '{target_column}' not found in {path}")
    if not rows:
        raise DataError(f"{path} has a header but no data rows")
    for i, row in enumerate(rows, start=1):
        if len(row) != len(header):
            raise DataError(
                f"data row {i} of {path} has {len(row)} cells, expected {len(header)}"
            )
        for name, cell in zip(header, row):
            if cell.strip() == "":
                raise DataError(f"missing value at data row {i}, column '{name}'")

    columns: dict[str, list[str]] = {
        name: [row[j].strip() for row in rows] for j, name in enumerate(header)
    }

    target_cells = columns.pop(target_column)
    response = np.array(
        [_parse_cell(cell, i, target_column) for i, cell in enumerate(target_cells, start=1)]
    )

    feature_arrays: list[np.ndarray] = []
    feature_names: list[str] = []
    for name in header:
        if name == target_column:
            continue
        cells = columns[name]
        try:
            numeric = _column_is_numeric(cells)
        except DataError:
            # Re-scan to report the first offending cell precisely.
            for i, cell in enumerate(cells, start=1):
                _parse_cell(cell, i, name)
            raise
        if numeric:
            feature_arrays.append(
                np.array([_parse_cell(cell, i, name) for i, cell in enumerate(cells, start=1)])
            )
            feature_names.append(name)
        else:
            for category in sorted(set(cells)):
                feature_arrays.append(
                    np.array([1.0 if cell == category else 0.0 for cell in cells])
                )
                feature_names.append(f"{name}={category}")

    features = np.column_stack(feature_arrays)
    return Dataset(features, response, tuple(feature_names), name=path.stem)


def save_csv(ds: Dataset, path: str | Path, target_column: str = "y") -> None:
    """Write a Dataset back to CSV; inverse of load_csv up to text round-trip."""
    if target_column in ds.column_names:
        raise ConfigError(f"target name '{target_column}' collides with a feature column")
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(list(ds.column_names) + [target_column])
        for i in range(ds.n):
            writer.writerow(
                [_format_float(v) for v in ds.features[i]] + [_format_float(ds.response[i])]
            )


def split(ds: Dataset, spec: SplitSpec) -> tuple[Dataset, Dataset]:
    """Seeded permutation split into (train, test) with |test| = round(fraction*n)."""
    if ds.n < 5:
        raise DataError(f"need at least 5 rows to split, got {ds.n}")
    n_test = int(math.floor(spec.test_fraction * ds.n + 0.5))
    if n_test < 1 or n_test >= ds.n:
        raise DataError(
            f"degenerate split: {ds.n - n_test} train / {n_test} test rows from n={ds.n}"
        )
    perm = np.random.default_rng(spec.seed).permutation(ds.n)
    test_idx = perm[:n_test]
    train_idx = perm[n_test:]
    return subset(ds, train_idx, name=f"{ds.name}:train"), subset(
        ds, test_idx, name=f"{ds.name}:test"
    )


def partition_train(train: Dataset, seed: int) -> TrainPartition:
    """Split training rows into build (n1 = ceil(n/2)) and aggregation parts."""
    n = train.n
    if n < 4:
        raise DataError(f"need at least 4 training rows to partition, got {n}")
    n1 = (n + 1) // 2
    perm = np.random.default_rng(seed).permutation(n)
    return TrainPartition(perm[:n1], perm[n1:])


def subset(ds: Dataset, indices: np.ndarray, name: str | None = None) -> Dataset:
    """Dataset restricted to the given rows, in the given order."""
    idx = np.asarray(indices, dtype=np.int64)
    return Dataset(
        ds.features[idx],
        ds.response[idx],
        ds.column_names,
        name=ds.name if name is None else name,
    )


def rmse(predicted: np.ndarray, actual: np.ndarray) -> float:
    """Root mean squared componentwise difference."""
    pred = np.asarray(predicted, dtype=np.float64)
    act = np.asarray(actual, dtype=np.float64)
    if pred.ndim != 1 or act.ndim != 1:
        raise DataError("rmse expects 1-d vectors")
    if pred.size == 0:
        raise DataError("rmse of empty vectors is undefined")
    if pred.size != act.size:
        raise DataError(f"length mismatch: {pred.size} vs {act.size}")
    if not (np.isfinite(pred).all() and np.isfinite(act).all()):
        raise DataError("rmse inputs must be finite")
    return float(np.sqrt(np.mean((pred - act) ** 2)))


def save_prediction_matrix(
    pm: PredictionMatrix, path: str | Path, provenance: dict | None = None
) -> None:
    """Persist a PredictionMatrix as CSV (labels header) plus a JSON sidecar.

    The sidecar, at ``<path>.json``, records bound_R0 and whatever
    provenance mapping the caller supplies (grid description, seeds, ...).
    """
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(list(pm.machine_labels))
        for row in pm.values:
            writer.writerow([_format_float(v) for v in row])
    sidecar = {"bound_R0": pm.bound_R0, "provenance": provenance or {}}
    Path(str(path) + ".json").write_text(json.dumps(sidecar, indent=2), encoding="utf-8")


def load_prediction_matrix(path: str | Path) -> PredictionMatrix:
    """Read a PredictionMatrix written by save_prediction_matrix.

    A missing sidecar is tolerated: bound_R0 is then recomputed as the
    largest entry magnitude.
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"no such file: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            labels = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path} is empty") from None
        values = []
        for i, row in enumerate(reader, start=1):
            if not row:
                continue
            if len(row) != len(labels):
                raise DataError(f"row {i} of {path} has {len(row)} cells, expected {len(labels)}")
            values.append([_parse_cell(cell, i, labels[j]) for j, cell in enumerate(row)])
    if not values:
        raise DataError(f"{path} has a header but no data rows")
    matrix = np.array(values)
    sidecar_path = Path(str(path) + ".json")
    if sidecar_path.is_file():
        sidecar = json.loads(sidecar_path.read_text(encoding="utf-8"))
        bound = float(sidecar["bound_R0"])
    else:
        bound = float(np.abs(matrix).max())
    return PredictionMatrix(matrix, tuple(labels), bound)


def save_vector_csv(values: np.ndarray, path: str | Path, name: str = "value") -> None:
    """Write a single named column of reals."""
    vec = np.asarray(values, dtype=np.float64)
    if vec.ndim != 1:
        raise DataError("expected a 1-d vector")
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([name])
        for v in vec:
            writer.writerow([_format_float(v)])


def load_vector_csv(path: str | Path) -> np.ndarray:
    """Read a single-column CSV written by save_vector_csv."""
    path = Path(path)
    if not path.is_file():
        raise DataError(f"no such file: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path} is empty") from None
        if len(header) != 1:
            raise DataError(f"{path} must have exactly one column, got {len(header)}")
        name = header[0].strip()
        out = [_parse_cell(row[0], i, name) for i, row in enumerate(reader, start=1) if row]
    if not out:
        raise DataError(f"{path} has a header but no data rows")
    return np.array(out)
