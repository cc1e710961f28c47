"""Base-machine zoo: kNN, elastic net, tree ensembles, and the grid builder."""

from .base import FAMILIES, TREE_FAMILIES, FittedMachine, MachineSpec
from .elastic_net import FittedElasticNet, StandardizedDesign, fit_elastic_net
from .grid import GridSpec, build_prediction_matrix, desk_grid, fit_grid, paper_grid
from .knn import FittedKNN, KNNIndex, fit_knn
from .trees import FittedTreeEnsemble, TreePool, fit_tree_ensemble, fit_tree_pool

__all__ = [
    "FAMILIES",
    "TREE_FAMILIES",
    "MachineSpec",
    "FittedMachine",
    "FittedKNN",
    "KNNIndex",
    "fit_knn",
    "FittedElasticNet",
    "StandardizedDesign",
    "fit_elastic_net",
    "FittedTreeEnsemble",
    "TreePool",
    "fit_tree_ensemble",
    "fit_tree_pool",
    "GridSpec",
    "paper_grid",
    "desk_grid",
    "fit_grid",
    "build_prediction_matrix",
]
