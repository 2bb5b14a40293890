"""Shapelet-based multiple-instance classifiers trained by boosting.

The library learns ensembles of kernelized shapelets: each weak
hypothesis scores a bag by its best-matching instance, weak hypotheses
are generated by a difference-of-convex solver, and a soft-margin
boosting master combines them.  Time series become bags of sliding
windows; generic multiple-instance data is consumed as-is.
"""

from .bags import (
    Bag,
    InstancePool,
    LabeledSample,
    build_pool,
    load_mil_jsonl,
    load_timeseries_csv,
    make_bag_from_series,
    save_mil_jsonl,
    save_timeseries_csv,
    signed_labels,
)
from .boosting import BoostConfig, BoostDiagnostics, lpboost_train
from .errors import DataError, SolverError
from .estimator import (
    ShapeletBagClassifier,
    ShapeletSeriesClassifier,
    resolve_lengths,
    series_to_bags,
    train_signed,
)
from .kernels import GramMatrix, KernelSpec, build_gram, eval_kernel, kernel_matrix
from .model import (
    BoostModel,
    ModelTerm,
    TermAttribution,
    explain,
    load_model,
    margin_loss,
    predict_bags,
    save_model,
    score_bags,
)
from .reduction import ReductionSpec, kmeans_reduce, run_kmeans
from .weaklearn import (
    Shapelet,
    WeakLearnConfig,
    WeakLearnResult,
    WeightedSample,
    best_over_lengths,
    dc_weak_learn,
    edge,
    hypothesis_value,
    init_one_hot,
)

__version__ = "0.1.0"

__all__ = [
    "Bag",
    "BoostConfig",
    "BoostDiagnostics",
    "BoostModel",
    "DataError",
    "GramMatrix",
    "InstancePool",
    "KernelSpec",
    "LabeledSample",
    "ModelTerm",
    "ReductionSpec",
    "Shapelet",
    "ShapeletBagClassifier",
    "ShapeletSeriesClassifier",
    "SolverError",
    "TermAttribution",
    "WeakLearnConfig",
    "WeakLearnResult",
    "WeightedSample",
    "best_over_lengths",
    "build_gram",
    "build_pool",
    "dc_weak_learn",
    "edge",
    "eval_kernel",
    "explain",
    "hypothesis_value",
    "init_one_hot",
    "kernel_matrix",
    "kmeans_reduce",
    "load_mil_jsonl",
    "load_model",
    "load_timeseries_csv",
    "lpboost_train",
    "make_bag_from_series",
    "margin_loss",
    "predict_bags",
    "resolve_lengths",
    "run_kmeans",
    "save_mil_jsonl",
    "save_model",
    "save_timeseries_csv",
    "score_bags",
    "series_to_bags",
    "signed_labels",
    "train_signed",
    "__version__",
]
