"""Consensual kernel aggregation over full or projected prediction features.

A query is predicted by a weighted mean of the aggregation-partition
responses, where the weight of row i is K_h(||q - z_i||) for the
exponential kernel K(t) = exp(-t^alpha / sigma), K_h(t) = K(t / h), and
z_i the stored prediction features of row i (all M machine outputs, or
their m-dimensional Gaussian projection).  Rows where the base machines
agree with their behavior at the query dominate the average.

Weights are computed with a max-shift in the exponent (the smallest
distance term is subtracted) so the largest weight is exactly one before
normalization; the 0/0 = 0 convention is then a dead branch for finite
inputs, watched by a diagnostics counter rather than trusted silently.
"""

from __future__ import annotations

import json
import logging
import math
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .datamodel import PredictionMatrix
from .errors import ConfigError, DataError, NumericalError
from .projection import ProjectionMatrix, project, sample_projection

__all__ = [
    "KernelSpec",
    "UnderflowCounter",
    "AggregatorModel",
    "TuneTrace",
    "GapReport",
    "build_full",
    "build_projected",
    "predict_one",
    "predict_batch",
    "loo_objective",
    "loo_gradient",
    "tune_bandwidth",
    "full_vs_projected_gap",
    "save_model",
    "load_model",
]

logger = logging.getLogger(__name__)

BANDWIDTH_FLOOR_FACTOR = 1e-12
ARMIJO_C1 = 1e-4
ARMIJO_CONTRACTION = 0.5
ARMIJO_MAX_BACKTRACKS = 30
DEFAULT_MAX_ITERATIONS = 200
RELATIVE_H_TOLERANCE = 1e-6


@dataclass(frozen=True)
class KernelSpec:
    """Exponential kernel K(t) = exp(-t^alpha / sigma) at bandwidth h."""

    alpha: float
    sigma: float
    h: float

    def __post_init__(self) -> None:
        if self.alpha < 0.0:
            raise ConfigError(f"kernel alpha must be >= 0, got {self.alpha}")
        if self.sigma <= 0.0:
            raise ConfigError(f"kernel sigma must be > 0, got {self.sigma}")
        if self.h <= 0.0:
            raise ConfigError(f"bandwidth h must be > 0, got {self.h}")


class UnderflowCounter:
    """Thread-safe count of predictions that hit the 0/0 = 0 convention."""

    def __init__(self) -> None:
        self._lock = threading.Lock()
        self._count = 0

    def increment(self, by: int = 1) -> None:
        with self._lock:
            self._count += by

    @property
    def count(self) -> int:
        return self._count


@dataclass
class AggregatorModel:
    """Stored aggregation features and responses plus the kernel.

    features holds the full n2×M machine predictions, or their n2×m
    projection when a ProjectionMatrix is attached.  Immutable after
    construction except the diagnostics counter.
    """

    features: PredictionMatrix
    responses: np.ndarray
    kernel: KernelSpec
    projection: ProjectionMatrix | None = None
    diagnostics: UnderflowCounter | None = None

    def __post_init__(self) -> None:
        resp = np.array(np.asarray(self.responses, dtype=np.float64), copy=True)
        if resp.ndim != 1 or resp.shape[0] != self.features.n:
            raise DataError(
                f"responses length {resp.shape} does not match {self.features.n} feature rows"
            )
        if not np.isfinite(resp).all():
            raise DataError("responses contain non-finite entries")
        if self.projection is not None and self.features.M != self.projection.m:
            raise DataError(
                f"stored features are {self.features.M}-wide but projection maps to"
                f" {self.projection.m}"
            )
        resp.setflags(write=False)
        self.responses = resp
        if self.diagnostics is None:
            self.diagnostics = UnderflowCounter()

    @property
    def width(self) -> int:
        return self.features.M

    @property
    def n2(self) -> int:
        return self.features.n


def build_full(
    features: PredictionMatrix, responses: np.ndarray, kernel: KernelSpec
) -> AggregatorModel:
    """Aggregator on the original M-dimensional prediction features."""
    return AggregatorModel(features, responses, kernel, projection=None)


def build_projected(
    features: PredictionMatrix,
    responses: np.ndarray,
    kernel: KernelSpec,
    G: ProjectionMatrix,
) -> AggregatorModel:
    """Aggregator on m-dimensional projected features; stores G for queries."""
    return AggregatorModel(project(features, G), responses, kernel, projection=G)


def _distances(queries: np.ndarray, rows: np.ndarray) -> np.ndarray:
    q_norms = np.einsum("ij,ij->i", queries, queries)
    r_norms = np.einsum("ij,ij->i", rows, rows)
    sq = q_norms[:, None] + r_norms[None, :] - 2.0 * (queries @ rows.T)
    np.maximum(sq, 0.0, out=sq)
    return np.sqrt(sq)

def _kernel_exponents(distances: np.ndarray, kernel: KernelSpec) -> np.ndarray:
    # t = (distance / h)^alpha / sigma; exp(-t) is the kernel weight.
    return (distances / kernel.h) ** kernel.alpha / kernel.sigma


def _weighted_average(
    t: np.ndarray, responses: np.ndarray, shifted: bool, counter: UnderflowCounter
) -> np.ndarray:
    if shifted:
        t_min = t.min(axis=1)
        dead = ~np.isfinite(t_min)
        safe_min = np.where(dead, 0.0, t_min)
        weights = np.exp(-(t - safe_min[:, None]))
        if dead.any():
            weights[dead] = 0.0
    else:
        weights = np.exp(-t)
    denom = weights.sum(axis=1)
    numer = weights @ responses
    out = np.zeros(t.shape[0])
    alive = denom > 0.0
    out[alive] = numer[alive] / denom[alive]
    n_dead = int(np.count_nonzero(~alive))
    if n_dead:
        counter.increment(n_dead)
    return out


def _prepare_queries(
    model: AggregatorModel, queries: np.ndarray, queries_are_projected: bool
) -> np.ndarray:
    q = np.atleast_2d(np.asarray(queries, dtype=np.float64))
    if not np.isfinite(q).all():
        raise DataError("query features contain non-finite entries")
    if model.projection is not None and not queries_are_projected:
        if q.shape[1] != model.projection.M:
            raise DataError(
                f"raw queries must be {model.projection.M}-wide, got {q.shape[1]}"
            )
        return q @ model.projection.values
    if q.shape[1] != model.width:
        raise DataError(f"queries must be {model.width}-wide, got {q.shape[1]}")
    return q


def predict_batch(
    model: AggregatorModel,
    queries: np.ndarray,
    *,
    queries_are_projected: bool = False,
    shifted: bool = True,
) -> np.ndarray:
    """Aggregated prediction for each query row.

    Projected models map raw M-wide queries through the stored projection
    unless queries_are_projected says they already live in the projected
    space.  shifted=False disables the exponent max-shift; it exists so
    tests can confirm the shift changes nothing when nothing underflows.
    """
    q = _prepare_queries(model, queries, queries_are_projected)
    t = _kernel_exponents(_distances(q, model.features.values), model.kernel)
    return _weighted_average(t, model.responses, shifted, model.diagnostics)


def predict_one(model: AggregatorModel, query_features: np.ndarray) -> float:
    """Single-query prediction; the query must match the stored width."""
    q = np.asarray(query_features, dtype=np.float64)
    if q.ndim != 1:
        raise DataError(f"predict_one expects a vector, got shape {q.shape}")
    return float(
        predict_batch(model, q[None, :], queries_are_projected=model.projection is not None)[0]
    )


@dataclass(frozen=True)
class TuneTrace:
    """Accepted bandwidth iterates with their objective values."""

    h_path: tuple[float, ...]
    objective_path: tuple[float, ...]
    converged: bool
    iterations: int


@dataclass(frozen=True)
class GapReport:
    """Absolute differences between full and projected predictions."""

    gaps: np.ndarray
    max_abs_gap: float
    mean_abs_gap: float
    exceedance: dict[float, float]


def _feature_values(features: PredictionMatrix | np.ndarray) -> np.ndarray:
    if isinstance(features, PredictionMatrix):
        return features.values
    arr = np.asarray(features, dtype=np.float64)
    if arr.ndim != 2:
        raise DataError(f"features must be 2-d, got shape {arr.shape}")
    return arr


class _LooProblem:
    """Leave-one-out squared error of the aggregator over its own rows.

    With t_ij = (d_ij / h)^alpha / sigma and w_ij = exp(-t_ij) for j != i,
    the held-out prediction is g_i = sum_j w_ij y_j / sum_j w_ij and the
    objective is J(h) = mean_i (y_i - g_i)^2.  Since dw_ij/dh =
    w_ij t_ij alpha / h, the gradient is dJ/dh = (2 alpha / h) *
    mean_i (g_i - y_i) (<t y>_i - g_i <t>_i) with <.>_i the w-weighted
    mean over j != i; weights are max-shifted per row, which cancels.
    """

    def __init__(self, features: np.ndarray, responses: np.ndarray, alpha: float, sigma: float):
        if features.shape[0] != responses.shape[0]:
            raise DataError("features and responses disagree on row count")
        self.y = responses
        self.alpha = alpha
        distances = _distances(features, features)
        self.max_distance = float(distances.max())
        self.scaled = distances**alpha / sigma
        np.fill_diagonal(self.scaled, np.inf)
        off_diag = distances[~np.eye(distances.shape[0], dtype=bool)]
        self.median_distance = float(np.median(off_diag))

    def objective_and_gradient(self, h: float) -> tuple[float, float]:
        t = self.scaled * h**-self.alpha
        t_min = t.min(axis=1)
        weights = np.exp(-(t - t_min[:, None]))
        denom = weights.sum(axis=1)
        if not (denom > 0.0).all():
            raise NumericalError("leave-one-out weights vanished for some row")
        g = (weights @ self.y) / denom
        residual = g - self.y
        objective = float(np.mean(residual**2))
        t_finite = np.where(np.isinf(t), 0.0, t)
        weighted_t = weights * t_finite
        mean_ty = (weighted_t @ self.y) / denom
        mean_t = weighted_t.sum(axis=1) / denom
        dg_dh = (self.alpha / h) * (mean_ty - g * mean_t)
        gradient = float(2.0 * np.mean(residual * dg_dh))
        return objective, gradient


def _as_loo_problem(
    features: PredictionMatrix | np.ndarray,
    responses: np.ndarray,
    alpha: float,
    sigma: float,
) -> _LooProblem:
    values = _feature_values(features)
    resp = np.asarray(responses, dtype=np.float64)
    if values.shape[0] < 4:
        raise DataError(f"need at least 4 rows to tune, got {values.shape[0]}")
    return _LooProblem(values, resp, alpha, sigma)


def loo_objective(
    features: PredictionMatrix | np.ndarray,
    responses: np.ndarray,
    alpha: float,
    sigma: float,
    h: float,
) -> float:
    """Leave-one-out squared error J(h) of the aggregator on its own rows."""
    if h <= 0.0:
        raise ConfigError(f"h must be > 0, got {h}")
    problem = _as_loo_problem(features, responses, alpha, sigma)
    return problem.objective_and_gradient(h)[0]


def loo_gradient(
    features: PredictionMatrix | np.ndarray,
    responses: np.ndarray,
    alpha: float,
    sigma: float,
    h: float,
) -> float:
    """Analytical dJ/dh of the leave-one-out objective."""
    if h <= 0.0:
        raise ConfigError(f"h must be > 0, got {h}")
    problem = _as_loo_problem(features, responses, alpha, sigma)
    return problem.objective_and_gradient(h)[1]


def tune_bandwidth(
    features: PredictionMatrix | np.ndarray,
    responses: np.ndarray,
    kernel_template: tuple[float, float],
    method: str = "gradient_descent",
    seed: int = 0,
    *,
    grid: Sequence[float] | None = None,
    max_iterations: int = DEFAULT_MAX_ITERATIONS,
) -> tuple[KernelSpec, TuneTrace]:
    """Pick the bandwidth minimizing the leave-one-out squared error.

    gradient_descent follows the analytical dJ/dh with Armijo backtracking
    (initial step 0.1·h, contraction 0.5, at most 30 backtracks), starting
    from the median pairwise distance, until the accepted step is below
    1e-6·h or the iteration cap.  grid evaluates J on log-spaced
    candidates (or the explicit ones given) and returns the argmin.

    The seed only matters on inputs with more than 2000 rows, where the
    starting median is estimated from a seeded row subsample.
    """
    alpha, sigma = float(kernel_template[0]), float(kernel_template[1])
    if sigma <= 0.0 or alpha < 0.0:
        raise ConfigError(f"kernel template needs alpha >= 0 and sigma > 0, got {kernel_template}")
    values = _feature_values(features)
    resp = np.asarray(responses, dtype=np.float64)
    if values.shape[0] > 2000:
        picked = np.random.default_rng(seed).choice(values.shape[0], size=2000, replace=False)
        problem = _LooProblem(values[picked], resp[picked], alpha, sigma)
        h_start = problem.median_distance
        problem = _as_loo_problem(values, resp, alpha, sigma)
        problem.median_distance = h_start
    else:
        problem = _as_loo_problem(values, resp, alpha, sigma)

    if problem.max_distance <= 0.0:
        raise NumericalError("all aggregation rows are identical; bandwidth is undefined")
    floor = BANDWIDTH_FLOOR_FACTOR * problem.max_distance

    if method == "grid":
        if grid is None:
            center = max(problem.median_distance, floor)
            candidates = np.asarray(center * np.logspace(-3.0, 3.0, 100))
        else:
            candidates = np.asarray(list(grid), dtype=np.float64)
            if candidates.size == 0 or (candidates <= 0.0).any():
                raise ConfigError("grid candidates must be positive and nonempty")
        objectives = [problem.objective_and_gradient(float(h))[0] for h in candidates]
        best = int(np.argmin(objectives))
        trace = TuneTrace(
            h_path=tuple(float(h) for h in candidates),
            objective_path=tuple(objectives),
            converged=True,
            iterations=len(objectives),
        )
        return KernelSpec(alpha, sigma, float(candidates[best])), trace

    if method != "gradient_descent":
        raise ConfigError(f"unknown tuning method '{method}'")

    h = max(problem.median_distance, floor)
    objective, gradient = problem.objective_and_gradient(h)
    h_path = [h]
    objective_path = [objective]
    converged = False
    iterations = 0
    for _ in range(max_iterations):
        if gradient == 0.0:
            converged = True
            break
        direction = -math.copysign(1.0, gradient)
        step = 0.1 * h
        accepted = None
        for _ in range(ARMIJO_MAX_BACKTRACKS):
            candidate = h + direction * step
            if candidate < floor:
                candidate = floor
            if candidate == h:
                break
            cand_obj, cand_grad = problem.objective_and_gradient(candidate)
            if cand_obj <= objective - ARMIJO_C1 * step * abs(gradient):
                accepted = (candidate, cand_obj, cand_grad)
                break
            step *= ARMIJO_CONTRACTION
        if accepted is None:
            # No productive step at line-search resolution: a local optimum.
            converged = True
            break
        iterations += 1
        new_h, objective, gradient = accepted
        if new_h == floor:
            logger.warning("bandwidth hit its positivity floor %.3e", floor)
        moved = abs(new_h - h)
        h = new_h
        h_path.append(h)
        objective_path.append(objective)
        if moved < RELATIVE_H_TOLERANCE * h:
            converged = True
            break
    trace = TuneTrace(
        h_path=tuple(h_path),
        objective_path=tuple(objective_path),
        converged=converged,
        iterations=iterations,
    )
    return KernelSpec(alpha, sigma, h), trace


def full_vs_projected_gap(
    full: AggregatorModel,
    projected: AggregatorModel,
    queries: np.ndarray,
    epsilons: Sequence[float] = (),
) -> GapReport:
    """Absolute prediction differences |g_full - g_projected| over raw queries."""
    if full.projection is not None:
        raise ConfigError("first model must aggregate full features")
    if projected.projection is None:
        raise ConfigError("second model must aggregate projected features")
    if full.width != projected.projection.M:
        raise ConfigError(
            f"models disagree on raw width: {full.width} vs {projected.projection.M}"
        )
    if not np.array_equal(full.responses, projected.responses):
        raise ConfigError("models must share responses")
    if full.kernel != projected.kernel:
        raise ConfigError("models must share the kernel")
    g_full = predict_batch(full, queries)
    g_proj = predict_batch(projected, queries)
    gaps = np.abs(g_full - g_proj)
    exceedance = {float(eps): float(np.mean(gaps > eps)) for eps in epsilons}
    return GapReport(
        gaps=gaps,
        max_abs_gap=float(gaps.max()),
        mean_abs_gap=float(gaps.mean()),
        exceedance=exceedance,
    )


def save_model(model: AggregatorModel, path: str | Path) -> None:
    """Serialize to JSON with base-16 doubles for bit-exact reload.

    The projection is stored as (seed, M, m) and regenerated on load, so a
    model whose projection did not come from sample_projection under its
    recorded seed is rejected here rather than silently altered.
    """
    projection_entry = None
    if model.projection is not None:
        p = model.projection
        regenerated = sample_projection(p.M, p.m, p.seed)
        if not np.array_equal(regenerated.values, p.values):
            raise ConfigError(
                "projection values are not reproducible from their recorded seed;"
                " refusing to serialize"
            )
        projection_entry = {"seed": p.seed, "M": p.M, "m": p.m}
    payload = {
        "kernel": {"alpha": model.kernel.alpha, "sigma": model.kernel.sigma, "h": model.kernel.h},
        "projection": projection_entry,
        "machine_labels": list(model.features.machine_labels),
        "bound_R0": model.features.bound_R0.hex(),
        "features_hex": [[v.hex() for v in row] for row in model.features.values.tolist()],
        "responses_hex": [v.hex() for v in model.responses.tolist()],
    }
    Path(path).write_text(json.dumps(payload), encoding="utf-8")


def load_model(path: str | Path) -> AggregatorModel:
    """Reload a model written by save_model."""
    path = Path(path)
    if not path.is_file():
        raise DataError(f"no such file: {path}")
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
        kernel = KernelSpec(**payload["kernel"])
        values = np.array([[float.fromhex(v) for v in row] for row in payload["features_hex"]])
        responses = np.array([float.fromhex(v) for v in payload["responses_hex"]])
        labels = tuple(payload["machine_labels"])
        bound = float.fromhex(payload["bound_R0"])
        features = PredictionMatrix(values, labels, bound)
        projection = None
        if payload["projection"] is not None:
            p = payload["projection"]
            projection = sample_projection(p["M"], p["m"], p["seed"])
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"malformed model file {path}: {exc}") from None
    return AggregatorModel(features, responses, kernel, projection=projection)
