"""Gaussian random projection of prediction features and concentration bounds.

The projection multiplies the n×M prediction matrix by an M×m matrix G of
iid N(0, 1/m) entries, which preserves squared pairwise distances in
expectation; m times the squared-distance ratio is chi-square with m
degrees of freedom.  The calculators below evaluate the two-sided Chernoff
tail bounds on that ratio, their union bound over n pairs, and the minimum
projection dimension guaranteeing that full and projected aggregation
predictions stay within epsilon of each other with probability 1 - delta.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .datamodel import PredictionMatrix
from .errors import ConfigError, DataError, NumericalError

__all__ = [
    "ProjectionMatrix",
    "DistortionReport",
    "ProjectionBound",
    "UnionBound",
    "sample_projection",
    "project",
    "distortion_report",
    "chernoff_upper",
    "chernoff_lower",
    "jl_union_bound",
    "min_projection_dim",
]


@dataclass(frozen=True)
class ProjectionMatrix:
    """M×m Gaussian projection matrix together with the seed that drew it.

    Direct construction with arbitrary values is the test hook for
    identity/zero projections; sample_projection is the production path.
    """

    values: np.ndarray
    seed: int
    m: int
    M: int

    def __post_init__(self) -> None:
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.ndim != 2:
            raise DataError(f"projection values must be 2-d, got shape {vals.shape}")
        if vals.shape != (self.M, self.m):
            raise DataError(
                f"projection shape {vals.shape} does not match declared ({self.M}, {self.m})"
            )
        if self.m < 1 or self.M < 1:
            raise ConfigError(f"projection dimensions must be >= 1, got M={self.M}, m={self.m}")
        if not np.isfinite(vals).all():
            raise DataError("projection matrix contains non-finite entries")
        out = np.array(vals, copy=True)
        out.setflags(write=False)
        object.__setattr__(self, "values", out)


@dataclass(frozen=True)
class DistortionReport:
    """Squared-distance ratios (projected / original) over index pairs."""

    pair_count: int
    ratios: np.ndarray
    max_abs_deviation: float
    fraction_exceeding: dict[float, float]


class UnionBound(NamedTuple):
    """Failure-probability bound over n pairs, clamped and raw."""

    bound: float
    raw: float


@dataclass(frozen=True)
class ProjectionBound:
    """Minimum projection dimension with the constant and approximations."""

    m_min: int
    c1: float
    threshold: float
    large_n_estimate: float


def sample_projection(M: int, m: int, seed: int) -> ProjectionMatrix:
    """Draw an M×m matrix of iid N(0, 1/m) entries, deterministic under seed.

    Uses the counter-based Philox bit generator so independent replications
    can be seeded per (replication, m) pair without stream overlap.
    """
    if M < 1 or m < 1:
        raise ConfigError(f"projection dimensions must be >= 1, got M={M}, m={m}")
    if seed < 0:
        raise ConfigError("seed must be a non-negative integer")
    rng = np.random.Generator(np.random.Philox(seed))
    values = rng.standard_normal((M, m)) / math.sqrt(m)
    return ProjectionMatrix(values, seed=seed, m=m, M=M)


def project(features: PredictionMatrix, G: ProjectionMatrix) -> PredictionMatrix:
    """Map n×M prediction features to n×m projected features."""
    if features.M != G.M:
        raise DataError(
            f"feature width {features.M} does not match projection input width {G.M}"
        )
    projected = features.values @ G.values
    max_abs = float(np.abs(projected).max())
    labels = tuple(f"proj_{j}" for j in range(1, G.m + 1))
    # An all-zero projection (zero-G test hook) still needs a positive bound.
    return PredictionMatrix(projected, labels, max_abs if max_abs > 0.0 else 1.0)


def distortion_report(
    original: PredictionMatrix,
    projected: PredictionMatrix,
    pairs: Sequence[tuple[int, int]] | None = None,
    deltas: Sequence[float] = (0.1, 0.2, 0.5),
) -> DistortionReport:
    """Squared-distance ratios between projected and original row pairs.

    Explicitly requested pairs must have nonzero original distance; when
    pairs is None all row pairs are used and zero-distance ones are
    excluded (the ratio is undefined there).
    """
    if original.n != projected.n:
        raise DataError(f"row count mismatch: {original.n} vs {projected.n}")
    orig = original.values
    proj = projected.values

    def sq_dist(mat: np.ndarray, i: int, j: int) -> float:
        diff = mat[i] - mat[j]
        return float(diff @ diff)

    if pairs is None:
        candidate = [(i, j) for i in range(original.n) for j in range(i + 1, original.n)]
        kept = [p for p in candidate if sq_dist(orig, *p) > 0.0]
    else:
        kept = []
        for i, j in pairs:
            if i == j:
                raise DataError(f"pair ({i},{j}) does not have distinct indices")
            if not (0 <= i < original.n and 0 <= j < original.n):
                raise DataError(f"pair ({i},{j}) out of range for n={original.n}")
            if sq_dist(orig, i, j) == 0.0:
                raise DataError(f"pair ({i},{j}) has zero original distance")
            kept.append((i, j))
    if not kept:
        raise DataError("no usable pairs with nonzero original distance")

    ratios = np.array([sq_dist(proj, i, j) / sq_dist(orig, i, j) for i, j in kept])
    deviations = np.abs(ratios - 1.0)
    fractions = {float(d): float(np.mean(deviations > d)) for d in deltas}
    return DistortionReport(
        pair_count=len(kept),
        ratios=ratios,
        max_abs_deviation=float(deviations.max()),
        fraction_exceeding=fractions,
    )


def _check_delta(delta: float) -> None:
    if not 0.0 < delta < 1.0:
        raise ConfigError(f"delta must be in (0,1), got {delta}")


def chernoff_upper(delta: float, m: int) -> float:
    """Upper-tail bound P(ratio - 1 > delta) <= exp(m[-delta + ln(1+delta)]/2)."""
    _check_delta(delta)
    if m < 1:
        raise ConfigError(f"m must be >= 1, got {m}")
    return math.exp(m * (-delta + math.log1p(delta)) / 2.0)


def chernoff_lower(delta: float, m: int) -> float:
    """Lower-tail bound P(1 - ratio > delta) <= exp(m[delta + ln(1-delta)]/2)."""
    _check_delta(delta)
    if m < 1:
        raise ConfigError(f"m must be >= 1, got {m}")
    return math.exp(m * (delta + math.log1p(-delta)) / 2.0)


def jl_union_bound(delta: float, m: int, n: int) -> UnionBound:
    """Two-sided exceedance bound 2n·exp(−m(δ²/2 − δ³/3)/2) over n pairs."""
    _check_delta(delta)
    if m < 1 or n < 1:
        raise ConfigError(f"m and n must be >= 1, got m={m}, n={n}")
    raw = 2.0 * n * math.exp(-m * (delta**2 / 2.0 - delta**3 / 3.0) / 2.0)
    return UnionBound(bound=min(max(raw, 0.0), 1.0), raw=raw)


def min_projection_dim(
    epsilon: float,
    delta: float,
    n: int,
    h: float,
    alpha: float,
    sigma: float,
    r0: float,
) -> ProjectionBound:
    """Smallest m with m >= C1·log[2/(1−(1−δ)^{1/n})]/(h^{2α}ε²).

    C1 = 3(2+α)²(2R0)^{2(1+α)}/σ².  Also reports C1 itself and the large-n
    estimate C1·log[−2n/log(1−δ)]/(h^{2α}ε²).  The threshold is assembled
    in log space: 1−(1−δ)^{1/n} underflows naively for large n, and large
    R0 or α would overflow the direct product.
    """
    if epsilon <= 0.0:
        raise ConfigError(f"epsilon must be > 0, got {epsilon}")
    _check_delta(delta)
    if n < 1:
        raise ConfigError(f"n must be >= 1, got {n}")
    if h <= 0.0:
        raise ConfigError(f"h must be > 0, got {h}")
    if alpha < 0.0:
        raise ConfigError(f"alpha must be >= 0, got {alpha}")
    if sigma <= 0.0:
        raise ConfigError(f"sigma must be > 0, got {sigma}")
    if r0 <= 0.0:
        raise ConfigError(f"r0 must be > 0, got {r0}")

    def exp_guarded(log_value: float, what: str) -> float:
        if log_value > math.log(np.finfo(np.float64).max):
            raise NumericalError(f"{what} overflows a double; computed in log space")
        return math.exp(log_value)

    log_c1 = (
        math.log(3.0)
        + 2.0 * math.log(2.0 + alpha)
        + 2.0 * (1.0 + alpha) * math.log(2.0 * r0)
        - 2.0 * math.log(sigma)
    )
    c1 = exp_guarded(log_c1, "constant C1")

    # 1 - (1-delta)^(1/n) without catastrophic cancellation.
    tail = -math.expm1(math.log1p(-delta) / n)
    log_numer = math.log(math.log(2.0) - math.log(tail))
    log_denom = 2.0 * alpha * math.log(h) + 2.0 * math.log(epsilon)
    threshold = exp_guarded(log_c1 + log_numer - log_denom, "projection-dimension threshold")
    large_n = exp_guarded(
        log_c1 + math.log(math.log(2.0 * n / (-math.log1p(-delta)))) - log_denom,
        "large-n estimate",
    )
    return ProjectionBound(
        m_min=max(1, math.ceil(threshold)),
        c1=c1,
        threshold=threshold,
        large_n_estimate=large_n,
    )
