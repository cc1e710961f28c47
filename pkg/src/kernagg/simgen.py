"""Generators for five synthetic regression benchmarks.

Features are iid uniform on [-1,1]^d and the response is a fixed nonlinear
signal plus standard Gaussian noise.  Signals are exposed separately so
tests can evaluate noise-free ground truth.  Subscripts in the signal
formulas are 1-based feature coordinates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .datamodel import Dataset
from .errors import ConfigError, NumericalError

__all__ = ["SimModelSpec", "generate", "signal", "DEFAULT_SHAPES", "MIN_DIMENSION"]

# Default (n, d) per model id.
DEFAULT_SHAPES: dict[int, tuple[int, int]] = {
    1: (600, 10),
    2: (800, 30),
    3: (800, 50),
    4: (800, 100),
    5: (800, 100),
}

# Largest 1-based feature index referenced by each signal formula.
MIN_DIMENSION: dict[int, int] = {1: 10, 2: 29, 3: 50, 4: 100, 5: 100}


@dataclass(frozen=True)
class SimModelSpec:
    """Which synthetic model to draw, at what size, under which seed."""

    model_id: int
    n: int | None = None
    d: int | None = None
    seed: int = 0

    def __post_init__(self) -> None:
        if self.model_id not in DEFAULT_SHAPES:
            raise ConfigError(f"model_id must be 1..5, got {self.model_id}")
        if self.seed < 0:
            raise ConfigError("seed must be a non-negative integer")
        n_default, d_default = DEFAULT_SHAPES[self.model_id]
        n = n_default if self.n is None else int(self.n)
        d = d_default if self.d is None else int(self.d)
        if n < 1:
            raise ConfigError(f"n must be >= 1, got {n}")
        if d < MIN_DIMENSION[self.model_id]:
            raise ConfigError(
                f"model {self.model_id} references feature index {MIN_DIMENSION[self.model_id]}"
                f" but d={d}"
            )
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "d", d)


def _signal_1(x: np.ndarray) -> np.ndarray:
    x1, x3, x4, x5 = x[:, 0], x[:, 2], x[:, 3], x[:, 4]
    x7, x8, x9, x10 = x[:, 6], x[:, 7], x[:, 8], x[:, 9]
    return x1**2 - x3**2 + 3.0 * x4 * np.exp(-x5) - x7**3 * np.exp(-x8 * x9 + x5 * x10)


def _signal_2(x: np.ndarray) -> np.ndarray:
    out = np.zeros(x.shape[0])
    for j in range(1, 6):
        out += 3.0 * x[:, 2 * j - 1] ** 3 * np.exp(x[:, 30 - j - 1] - x[:, 2 * j + 1 - 1])
        out -= 2.0 * x[:, 2 * j - 1 - 1] ** 3 * np.exp(x[:, 2 * j - 1] - x[:, 30 - 3 * j - 1])
    return out


def _signal_3(x: np.ndarray) -> np.ndarray:
    head = (1.0 - x[:, 0] ** 2 + 2.0 * x[:, 2] * x[:, 3]) / (1.1 + x[:, 4])
    inner = np.ones(x.shape[0])
    for j in range(1, 6):
        inner += (1.0 + x[:, 5 + j - 1]) / (2.0 - x[:, 45 + j - 1])
    return head - 2.0 * np.sqrt(inner) * np.exp(-x[:, 9] + x[:, 19] - x[:, 29])


def _signal_4(x: np.ndarray) -> np.ndarray:
    tail_exp = np.zeros(x.shape[0])
    for j in range(1, 11):
        tail_exp += x[:, 10 * j - 1]
    return (x[:, 0] ** 2 - x[:, 1] ** 2) * (1.0 - np.exp(-x[:, 4] * x[:, 6])) + 3.0 * x[
        :, 2
    ] * np.exp(-tail_exp)


def _signal_5(x: np.ndarray) -> np.ndarray:
    denom = 1.0 - np.sin(x[:, 0] * x[:, 1])
    # sin(X1*X2) <= sin(1) < 1 on [-1,1]^2, so the denominator stays above
    # 1 - sin(1) ~ 0.1585; checked rather than assumed.
    if np.any(denom <= 0.15):
        raise NumericalError("model 5 denominator fell below its analytic floor")
    out = (1.0 + np.sin(x[:, 0] + x[:, 1])) / denom
    for j in range(1, 11):
        coef = (2.0**j + 1.0) / (2.0**j - 1.0)
        out -= coef * x[:, 5 * j - 1] * x[:, 10 * j - 1] * x[:, j - 1]
    return out


_SIGNALS = {1: _signal_1, 2: _signal_2, 3: _signal_3, 4: _signal_4, 5: _signal_5}


def signal(model_id: int, x: np.ndarray) -> np.ndarray:
    """Noise-free signal of the given model evaluated at rows of x."""
    if model_id not in _SIGNALS:
        raise ConfigError(f"model_id must be 1..5, got {model_id}")
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if x.shape[1] < MIN_DIMENSION[model_id]:
        raise ConfigError(
            f"model {model_id} needs at least {MIN_DIMENSION[model_id]} feature columns,"
            f" got {x.shape[1]}"
        )
    return _SIGNALS[model_id](x)


def generate(spec: SimModelSpec) -> Dataset:
    """Draw a Dataset from the given synthetic model.

    Features and noise come from two independent streams spawned from the
    seed, so two models generated with the same (n, d, seed) share the
    exact same feature matrix and differ only through their signals.
    """
    feature_seq, noise_seq = np.random.SeedSequence(spec.seed).spawn(2)
    features = np.random.default_rng(feature_seq).uniform(-1.0, 1.0, size=(spec.n, spec.d))
    noise = np.random.default_rng(noise_seq).standard_normal(spec.n)
    response = signal(spec.model_id, features) + noise
    names = tuple(f"x{j}" for j in range(1, spec.d + 1))
    return Dataset(features, response, names, name=f"model{spec.model_id}")
