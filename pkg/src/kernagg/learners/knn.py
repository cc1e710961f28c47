"""k-nearest-neighbor regression with deterministic tie-breaking."""

from __future__ import annotations

import numpy as np

from ..datamodel import Dataset
from ..errors import ConfigError
from .base import FittedMachine, MachineSpec, SingleSlotCache

__all__ = ["KNNIndex", "FittedKNN", "fit_knn"]


class KNNIndex:
    """Neighbor structure over the build partition, shared across k values.

    prefix_means(X)[q, k-1] is the mean response of the k build rows
    nearest to query q, so every k in a grid reads from one sort.
    """

    def __init__(self, features: np.ndarray, response: np.ndarray):
        self.features = np.asarray(features, dtype=np.float64)
        self.response = np.asarray(response, dtype=np.float64)
        self.n = self.features.shape[0]
        self._sq_norms = np.einsum("ij,ij->i", self.features, self.features)
        self._cache = SingleSlotCache()

    def prefix_means(self, X: np.ndarray) -> np.ndarray:
        cached = self._cache.get(X)
        if cached is not None:
            return cached
        q_norms = np.einsum("ij,ij->i", X, X)
        sq_dist = q_norms[:, None] + self._sq_norms[None, :] - 2.0 * (X @ self.features.T)
        np.maximum(sq_dist, 0.0, out=sq_dist)
        # Stable sort: equal distances resolve to the lower build row index.
        order = np.argsort(sq_dist, axis=1, kind="stable")
        sorted_y = self.response[order]
        means = np.cumsum(sorted_y, axis=1) / np.arange(1, self.n + 1)
        self._cache.put(X, means)
        return means


class FittedKNN(FittedMachine):
    def __init__(self, spec: MachineSpec, index: KNNIndex, k: int):
        super().__init__(spec, index.features.shape[1])
        self.index = index
        self.k = k

    def _predict(self, X: np.ndarray) -> np.ndarray:
        return self.index.prefix_means(X)[:, self.k - 1]


def fit_knn(build: Dataset, k: int, index: KNNIndex | None = None) -> FittedKNN:
    """Mean response of the k nearest build rows under Euclidean distance.

    An existing KNNIndex over the same build partition can be passed to
    share the distance work across a grid of k values.
    """
    if not 1 <= k <= build.n:
        raise ConfigError(f"k must be in [1, {build.n}], got {k}")
    if index is None:
        index = KNNIndex(build.features, build.response)
    spec = MachineSpec("knn", {"k": int(k)}, f"knn_k={k}")
    return FittedKNN(spec, index, int(k))
