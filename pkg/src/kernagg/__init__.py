"""Kernel-based consensual aggregation of regression machines, with
Johnson-Lindenstrauss random projection of the prediction features.

A library plus a benchmark CLI: fit a large grid of basic regression
machines, combine their predictions with a kernel-weighted consensual
aggregator, optionally after random projection to a much smaller
dimension, and verify the concentration bounds that justify doing so.
"""

from .aggregator import (
    AggregatorModel,
    GapReport,
    KernelSpec,
    TuneTrace,
    build_full,
    build_projected,
    full_vs_projected_gap,
    load_model,
    loo_gradient,
    loo_objective,
    predict_batch,
    predict_one,
    save_model,
    tune_bandwidth,
)
from .datamodel import (
    Dataset,
    PredictionMatrix,
    SplitSpec,
    TrainPartition,
    load_csv,
    load_prediction_matrix,
    load_vector_csv,
    partition_train,
    rmse,
    save_csv,
    save_prediction_matrix,
    save_vector_csv,
    split,
    subset,
)
from .errors import ConfigError, DataError, KernaggError, NumericalError
from .harness import (
    CsvSource,
    ExperimentConfig,
    MethodOutcome,
    ReplicationFailure,
    RunResult,
    SimSource,
    SummaryRow,
    TimingRow,
    best_machine_rmse,
    build_experiment_config,
    desk_preset_overrides,
    load_results,
    load_runs_csv,
    parse_config_file,
    run_experiment,
    run_replication,
    summarize,
    timing_report,
    write_runs_csv,
    write_timings_csv,
)
from .learners import (
    FAMILIES,
    FittedMachine,
    GridSpec,
    MachineSpec,
    build_prediction_matrix,
    desk_grid,
    fit_elastic_net,
    fit_grid,
    fit_knn,
    fit_tree_ensemble,
    paper_grid,
)
from .projection import (
    DistortionReport,
    ProjectionBound,
    ProjectionMatrix,
    UnionBound,
    chernoff_lower,
    chernoff_upper,
    distortion_report,
    jl_union_bound,
    min_projection_dim,
    project,
    sample_projection,
)
from .seeding import derive_seed
from .simgen import MIN_DIMENSION, SimModelSpec, generate, signal

__version__ = "0.1.0"

__all__ = [
    "AggregatorModel",
    "GapReport",
    "KernelSpec",
    "TuneTrace",
    "build_full",
    "build_projected",
    "full_vs_projected_gap",
    "load_model",
    "loo_gradient",
    "loo_objective",
    "predict_batch",
    "predict_one",
    "save_model",
    "tune_bandwidth",
    "Dataset",
    "PredictionMatrix",
    "SplitSpec",
    "TrainPartition",
    "load_csv",
    "load_prediction_matrix",
    "load_vector_csv",
    "partition_train",
    "rmse",
    "save_csv",
    "save_prediction_matrix",
    "save_vector_csv",
    "split",
    "subset",
    "ConfigError",
    "DataError",
    "KernaggError",
    "NumericalError",
    "CsvSource",
    "ExperimentConfig",
    "MethodOutcome",
    "ReplicationFailure",
    "RunResult",
    "SimSource",
    "SummaryRow",
    "TimingRow",
    "best_machine_rmse",
    "build_experiment_config",
    "desk_preset_overrides",
    "load_results",
    "load_runs_csv",
    "parse_config_file",
    "run_experiment",
    "run_replication",
    "summarize",
    "timing_report",
    "write_runs_csv",
    "write_timings_csv",
    "FAMILIES",
    "FittedMachine",
    "GridSpec",
    "MachineSpec",
    "build_prediction_matrix",
    "desk_grid",
    "fit_elastic_net",
    "fit_grid",
    "fit_knn",
    "fit_tree_ensemble",
    "paper_grid",
    "DistortionReport",
    "ProjectionBound",
    "ProjectionMatrix",
    "UnionBound",
    "chernoff_lower",
    "chernoff_upper",
    "distortion_report",
    "jl_union_bound",
    "min_projection_dim",
    "project",
    "sample_projection",
    "derive_seed",
    "MIN_DIMENSION",
    "SimModelSpec",
    "generate",
    "signal",
    "__version__",
]
