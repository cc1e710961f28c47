"""Machine-grid construction and the prediction matrix of machine outputs."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..datamodel import Dataset, PredictionMatrix
from ..errors import ConfigError, DataError
from ..seeding import derive_seed
from .base import FAMILIES, TREE_FAMILIES, FittedMachine
from .elastic_net import StandardizedDesign, fit_elastic_net
from .knn import KNNIndex, fit_knn
from .trees import fit_tree_ensemble, fit_tree_pool

__all__ = ["GridSpec", "paper_grid", "desk_grid", "fit_grid", "build_prediction_matrix"]


@dataclass(frozen=True)
class GridSpec:
    """Which machines to fit: k values, (alpha_mix, lambda) pairs, ntree values.

    tree_ntrees is either a flat tuple of ints, shared by all three tree
    families, or one tuple per family in (bagging, random_forest, boosting)
    order; it is normalized to the latter form on construction.
    """

    knn_ks: tuple[int, ...]
    enet_grid: tuple[tuple[float, float], ...]
    tree_ntrees: tuple
    families_enabled: frozenset[str] = field(default_factory=lambda: frozenset(FAMILIES))

    def __post_init__(self) -> None:
        unknown = self.families_enabled - set(FAMILIES)
        if unknown:
            raise ConfigError(f"unknown families: {sorted(unknown)}")
        if not self.families_enabled:
            raise ConfigError("at least one family must be enabled")
        if any(k < 1 for k in self.knn_ks):
            raise ConfigError("knn k values must be >= 1")
        if any(not (0.0 <= a <= 1.0) or lam < 0.0 for a, lam in self.enet_grid):
            raise ConfigError("elastic-net grid needs alpha_mix in [0,1] and lambda >= 0")
        entries = tuple(self.tree_ntrees)
        if all(np.isscalar(t) for t in entries):
            shared = tuple(int(t) for t in entries)
            per_family = tuple(shared for _ in TREE_FAMILIES)
        else:
            if len(entries) != len(TREE_FAMILIES):
                raise ConfigError(
                    f"per-family tree_ntrees needs {len(TREE_FAMILIES)} tuples"
                    f" (one per family), got {len(entries)}"
                )
            per_family = tuple(tuple(int(t) for t in sub) for sub in entries)
        if any(t < 1 for sub in per_family for t in sub):
            raise ConfigError("ntree values must be >= 1")
        object.__setattr__(self, "tree_ntrees", per_family)
        for family, values in [
            ("knn", self.knn_ks),
            ("elastic_net", self.enet_grid),
        ] + list(zip(TREE_FAMILIES, per_family)):
            if family in self.families_enabled and len(values) == 0:
                raise ConfigError(f"family '{family}' is enabled but has no grid values")

    def ntrees_for(self, family: str) -> tuple[int, ...]:
        if family not in TREE_FAMILIES:
            raise ConfigError(f"'{family}' is not a tree family")
        return self.tree_ntrees[TREE_FAMILIES.index(family)]

    @property
    def machine_count(self) -> int:
        count = 0
        if "knn" in self.families_enabled:
            count += len(self.knn_ks)
        if "elastic_net" in self.families_enabled:
            count += len(self.enet_grid)
        count += sum(
            len(self.ntrees_for(f)) for f in TREE_FAMILIES if f in self.families_enabled
        )
        return count


def paper_grid() -> GridSpec:
    """The benchmark grid: 200 kNN + 500 elastic-net + 3×100 tree ensembles."""
    lambdas = np.logspace(np.log10(5e-5), 0.0, 100)
    return GridSpec(
        knn_ks=tuple(range(2, 202)),
        enet_grid=tuple(
            (a, float(lam)) for a in (0.0, 0.25, 0.5, 0.75, 1.0) for lam in lambdas
        ),
        tree_ntrees=tuple(range(18, 316, 3)),
    )


def desk_grid() -> GridSpec:
    """Small 60-machine grid: 20 kNN, 20 elastic-net, 20 tree ensembles."""
    lambdas = np.logspace(-4.0, 0.0, 4)
    return GridSpec(
        knn_ks=tuple(range(1, 21)),
        enet_grid=tuple(
            (a, float(lam)) for a in (0.0, 0.25, 0.5, 0.75, 1.0) for lam in lambdas
        ),
        tree_ntrees=(
            (10, 25, 50, 100, 150, 200, 315),
            (10, 25, 50, 100, 150, 200, 315),
            (10, 25, 50, 100, 200, 315),
        ),
    )


def fit_grid(build: Dataset, grid: GridSpec, seed: int) -> list[FittedMachine]:
    """Fit every machine in the grid on the build partition.

    Machines appear family by family (knn, elastic_net, bagging,
    random_forest, boosting) in grid order.  Within each family the heavy
    shared work (neighbor sort, Gram products, tree growing) is done once:
    tree machines read prefixes of one pool per family, which by the
    seed-spawning scheme equals fitting each of them independently.
    """
    machines: list[FittedMachine] = []
    if "knn" in grid.families_enabled:
        index = KNNIndex(build.features, build.response)
        for k in grid.knn_ks:
            machines.append(fit_knn(build, k, index=index))
    if "elastic_net" in grid.families_enabled:
        design = StandardizedDesign(build)
        warm = None
        warm_alpha = None
        for alpha_mix, lam in grid.enet_grid:
            fitted = fit_elastic_net(
                build,
                alpha_mix,
                lam,
                design=design,
                warm_start=warm if warm_alpha == alpha_mix else None,
            )
            warm, warm_alpha = fitted.beta_standardized, alpha_mix
            machines.append(fitted)
    for family_index, family in enumerate(TREE_FAMILIES):
        if family not in grid.families_enabled:
            continue
        ntrees = grid.ntrees_for(family)
        pool = fit_tree_pool(build, family, max(ntrees), derive_seed(seed, family_index))
        for ntree in ntrees:
            machines.append(fit_tree_ensemble(build, family, ntree, seed=0, pool=pool))
    return machines


def build_prediction_matrix(machines: list[FittedMachine], ds: Dataset) -> PredictionMatrix:
    """Predict every machine at every row of ds.

    Entry (i, j) is machine j's prediction at row i.  bound_R0 is the
    empirical magnitude bound over all predictions and the responses of ds.
    """
    if not machines:
        raise DataError("no machines to evaluate")
    if ds.n < 1:
        raise DataError("empty dataset")
    columns = []
    for machine in machines:
        col = machine.predict(ds.features)
        bad = np.flatnonzero(~np.isfinite(col))
        if bad.size:
            raise DataError(
                f"machine '{machine.spec.label}' produced a non-finite prediction"
                f" at row {int(bad[0])}"
            )
        columns.append(col)
    values = np.column_stack(columns)
    labels = tuple(m.spec.label for m in machines)
    bound = max(float(np.abs(values).max()), float(np.abs(ds.response).max()))
    return PredictionMatrix(values, labels, bound if bound > 0.0 else 1.0)
