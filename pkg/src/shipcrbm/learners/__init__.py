from .baselines import (
    PredictionTable,
    TypeAverageModel,
    accuracy,
    aggregate_votes,
    baseline_global_avg,
    baseline_type_avg,
    mae,
    per_ship_metric,
    ship_type_of,
)
from .clustering import (
    BURN_LABEL,
    CrossTab,
    KMeansModel,
    crosstab,
    crosstab_navstatus,
    kmeans_assign,
    kmeans_fit,
    kmeans_labels,
)
from .linear import (
    ConvergenceWarning,
    DegenerateModelWarning,
    LinearModel,
    classify,
    lasso_fit,
    logistic_fit,
)
from .trees import Tree, TreeEnsembleModel, forest_fit, forest_predict, gradient_boost_fit

__all__ = [
    "BURN_LABEL", "ConvergenceWarning", "CrossTab", "DegenerateModelWarning", "KMeansModel",
    "LinearModel", "PredictionTable", "Tree",
    "TreeEnsembleModel", "TypeAverageModel", "accuracy", "aggregate_votes",
    "baseline_global_avg", "baseline_type_avg", "classify", "crosstab", "crosstab_navstatus",
    "forest_fit", "forest_predict", "gradient_boost_fit", "kmeans_assign", "kmeans_fit",
    "kmeans_labels", "lasso_fit", "logistic_fit", "mae", "per_ship_metric", "ship_type_of",
]
