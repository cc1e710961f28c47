"""CART regression trees and the three ensemble families built on them.

Bagging averages trees grown on bootstrap resamples; random forests do the
same with per-split feature subsampling of size ceil(d/3); gradient
boosting fits shallow trees stagewise to residuals with shrinkage, starting
from the response mean.  Splits minimize SSE (equivalently maximize the sum
of child mean-squares), with a minimum leaf size and a depth cap.

Ensembles over the same build data share a TreePool: a machine with ntree=t
reads the first t trees, and because per-tree seeds are spawned in sequence
this equals fitting that machine independently under the same seed.
"""

from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np

from ..datamodel import Dataset
from ..errors import ConfigError, DataError
from .base import FittedMachine, MachineSpec, SingleSlotCache, TREE_FAMILIES

__all__ = ["TreePool", "FittedTreeEnsemble", "fit_tree_ensemble", "fit_tree_pool"]

DEFAULT_MIN_LEAF = 5
DEFAULT_MAX_DEPTH = 12
BOOSTING_DEPTH = 3
BOOSTING_SHRINKAGE = 0.05


class _Tree(NamedTuple):
    feature: np.ndarray  # int32, -1 marks a leaf
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray


def _grow_tree(
    X: np.ndarray,
    y: np.ndarray,
    rng: np.random.Generator | None,
    max_depth: int,
    min_leaf: int,
    max_features: int,
) -> _Tree:
    n, d = X.shape
    feature: list[int] = []
    threshold: list[float] = []
    left: list[int] = []
    right: list[int] = []
    value: list[float] = []

    def new_node() -> int:
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(0.0)
        return len(feature) - 1

    stack: list[tuple[np.ndarray, int, int]] = [(np.arange(n), 0, new_node())]
    while stack:
        idx, depth, nid = stack.pop()
        ys = y[idx]
        value[nid] = float(ys.mean())
        if depth >= max_depth or idx.size < 2 * min_leaf or ys.min() == ys.max():
            continue
        if max_features < d:
            cols = np.sort(rng.choice(d, size=max_features, replace=False))
        else:
            cols = np.arange(d)
        Xn = X[idx[:, None], cols[None, :]]
        order = np.argsort(Xn, axis=0, kind="stable")
        Xs = np.take_along_axis(Xn, order, axis=0)
        Ys = ys[order]
        csum = np.cumsum(Ys, axis=0)
        total = csum[-1, :]
        s = idx.size
        left_count = np.arange(1, s, dtype=np.float64)[:, None]
        right_count = s - left_count
        left_sum = csum[:-1, :]
        right_sum = total[None, :] - left_sum
        # SSE minimization == maximizing sum of child (sum^2 / count).
        score = left_sum**2 / left_count + right_sum**2 / right_count
        valid = Xs[:-1, :] < Xs[1:, :]
        if min_leaf > 1:
            valid &= (left_count >= min_leaf) & (right_count >= min_leaf)
        if not valid.any():
            continue
        score = np.where(valid, score, -np.inf)
        flat = int(np.argmax(score))
        row, col = divmod(flat, score.shape[1])
        feature[nid] = int(cols[col])
        threshold[nid] = float((Xs[row, col] + Xs[row + 1, col]) / 2.0)
        left_rows = idx[order[: row + 1, col]]
        right_rows = idx[order[row + 1 :, col]]
        lid = new_node()
        rid = new_node()
        left[nid] = lid
        right[nid] = rid
        stack.append((left_rows, depth + 1, lid))
        stack.append((right_rows, depth + 1, rid))

    return _Tree(
        np.array(feature, dtype=np.int32),
        np.array(threshold),
        np.array(left, dtype=np.int32),
        np.array(right, dtype=np.int32),
        np.array(value),
    )


def _predict_tree(tree: _Tree, X: np.ndarray) -> np.ndarray:
    nodes = np.zeros(X.shape[0], dtype=np.int32)
    while True:
        active = np.flatnonzero(tree.feature[nodes] >= 0)
        if active.size == 0:
            return tree.value[nodes]
        cur = nodes[active]
        go_left = X[active, tree.feature[cur]] <= tree.threshold[cur]
        nodes[active] = np.where(go_left, tree.left[cur], tree.right[cur])


class TreePool:
    """An ordered list of fitted trees shared by prefix-reading ensembles."""

    def __init__(self, family: str, trees: list[_Tree], d: int, base_value: float, shrinkage: float):
        self.family = family
        self.trees = trees
        self.d = d
        self.base_value = base_value
        self.shrinkage = shrinkage
        self._cache = SingleSlotCache()

    @property
    def ntree(self) -> int:
        return len(self.trees)

    def tree_matrix(self, X: np.ndarray) -> np.ndarray:
        """(n_queries, ntree) matrix of raw per-tree predictions."""
        cached = self._cache.get(X)
        if cached is not None:
            return cached
        matrix = np.column_stack([_predict_tree(tree, X) for tree in self.trees])
        self._cache.put(X, matrix)
        return matrix


def fit_tree_pool(
    build: Dataset,
    family: str,
    ntree: int,
    seed: int,
    *,
    bootstrap: bool = True,
    max_depth: int | None = None,
    min_leaf: int = DEFAULT_MIN_LEAF,
    shrinkage: float = BOOSTING_SHRINKAGE,
) -> TreePool:
    """Grow the trees a family needs, in their seed-determined order."""
    if family not in TREE_FAMILIES:
        raise ConfigError(f"unknown tree family '{family}'")
    if ntree < 1:
        raise ConfigError(f"ntree must be >= 1, got {ntree}")
    if build.n < 1:
        raise DataError("empty build partition")
    X = build.features
    y = build.response
    n, d = X.shape

    if family == "boosting":
        depth = BOOSTING_DEPTH if max_depth is None else max_depth
        base = float(y.mean())
        residual = y - base
        trees = []
        for _ in range(ntree):
            tree = _grow_tree(X, residual, None, depth, min_leaf, d)
            residual = residual - shrinkage * _predict_tree(tree, X)
            trees.append(tree)
        return TreePool(family, trees, d, base, shrinkage)

    depth = DEFAULT_MAX_DEPTH if max_depth is None else max_depth
    max_features = d if family == "bagging" else math.ceil(d / 3)
    children = np.random.SeedSequence(seed).spawn(ntree)
    trees = []
    for child in children:
        rng = np.random.default_rng(child)
        rows = rng.integers(0, n, size=n) if bootstrap else np.arange(n)
        trees.append(_grow_tree(X[rows], y[rows], rng, depth, min_leaf, max_features))
    return TreePool(family, trees, d, 0.0, 0.0)


class FittedTreeEnsemble(FittedMachine):
    """A prefix of a TreePool read as one ensemble."""

    def __init__(self, spec: MachineSpec, pool: TreePool, ntree: int):
        super().__init__(spec, pool.d)
        if ntree > pool.ntree:
            raise ConfigError(f"pool holds {pool.ntree} trees, requested {ntree}")
        self.pool = pool
        self.ntree = ntree

    def _predict(self, X: np.ndarray) -> np.ndarray:
        prefix = self.pool.tree_matrix(X)[:, : self.ntree]
        if self.pool.family == "boosting":
            return self.pool.base_value + self.pool.shrinkage * prefix.sum(axis=1)
        return prefix.mean(axis=1)


_FAMILY_TAGS = {"bagging": "bag", "random_forest": "rf", "boosting": "boost"}


def fit_tree_ensemble(
    build: Dataset,
    family: str,
    ntree: int,
    seed: int,
    *,
    bootstrap: bool = True,
    max_depth: int | None = None,
    min_leaf: int = DEFAULT_MIN_LEAF,
    shrinkage: float = BOOSTING_SHRINKAGE,
    pool: TreePool | None = None,
) -> FittedTreeEnsemble:
    """Fit one tree-ensemble machine, optionally reading a shared pool."""
    if pool is None:
        pool = fit_tree_pool(
            build,
            family,
            ntree,
            seed,
            bootstrap=bootstrap,
            max_depth=max_depth,
            min_leaf=min_leaf,
            shrinkage=shrinkage,
        )
    if family != pool.family:
        raise ConfigError(f"pool family '{pool.family}' does not match '{family}'")
    spec = MachineSpec(family, {"ntree": int(ntree)}, f"{_FAMILY_TAGS[family]}_t={ntree}")
    return FittedTreeEnsemble(spec, pool, int(ntree))
