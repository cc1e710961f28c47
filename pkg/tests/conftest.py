"""Shared helpers for the test suite."""

import numpy as np
import pytest

from kernagg import Dataset, PredictionMatrix


def make_dataset(n=40, d=3, seed=0, name="toy"):
    """Random dataset with a mild linear-plus-noise response."""
    rng = np.random.default_rng(seed)
    X = rng.uniform(-1.0, 1.0, size=(n, d))
    y = X @ rng.normal(size=d) + 0.1 * rng.standard_normal(n)
    cols = tuple(f"x{j + 1}" for j in range(d))
    return Dataset(X, y, cols, name=name)


def make_prediction_matrix(n=20, M=5, seed=0):
    rng = np.random.default_rng(seed)
    values = rng.normal(size=(n, M))
    labels = tuple(f"mach_{j}" for j in range(M))
    return PredictionMatrix(values, labels, float(np.abs(values).max()) + 0.5)


@pytest.fixture
def toy_dataset():
    return make_dataset()
