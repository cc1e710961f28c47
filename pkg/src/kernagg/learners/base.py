"""Shared machine abstractions for the base-learner zoo."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np

from ..errors import ConfigError

FAMILIES = ("knn", "elastic_net", "bagging", "random_forest", "boosting")
TREE_FAMILIES = ("bagging", "random_forest", "boosting")


@dataclass(frozen=True)
class MachineSpec:
    """Identity of one base machine: family, parameters, display label."""

    family: str
    params: dict[str, Any] = field(default_factory=dict)
    label: str = ""

    def __post_init__(self) -> None:
        if self.family not in FAMILIES:
            raise ConfigError(f"unknown machine family '{self.family}'")
        if not self.label:
            object.__setattr__(self, "label", self.family)


class FittedMachine:
    """A machine fit on the build partition; predicts at feature vectors.

    Subclasses hold family-specific state and implement _predict on a
    2-d query matrix.
    """

    def __init__(self, spec: MachineSpec, d: int):
        self.spec = spec
        self._d = d

    def predict(self, X: np.ndarray) -> np.ndarray:
        queries = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if queries.shape[1] != self._d:
            raise ConfigError(
                f"machine '{self.spec.label}' expects {self._d} features, got {queries.shape[1]}"
            )
        return self._predict(queries)

    def _predict(self, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError


class SingleSlotCache:
    """Memoizes the last (matrix identity -> value) pair.

    Pools of machines share one heavy computation per query matrix; the
    grid predicts each partition in one machine-major pass, so remembering
    only the most recent matrix is enough.
    """

    def __init__(self) -> None:
        self._key: np.ndarray | None = None
        self._value: Any = None

    def get(self, key: np.ndarray) -> Any:
        # Identity, not equality: the held reference keeps the key alive,
        # so a stale id can never alias a new array.
        return self._value if self._key is key else None

    def put(self, key: np.ndarray, value: Any) -> None:
        self._key = key
        self._value = value
