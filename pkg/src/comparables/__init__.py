"""Comparable-based explanations for tabular regression models."""

from .schema import (
    AttributeDef,
    AttributeSchema,
    Dataset,
    Instance,
    Standardizer,
    fit_standardizer,
    load_csv,
    load_schema_json,
    target_stats,
)
from .predictors import (
    KnnRegressor,
    LinearPredictor,
    PlateauPredictor,
    QuadraticPredictor,
    RemotePredictor,
    SinusoidLinearPredictor,
    build_predictor,
    fit_knn,
    predict,
)
from .selection import (
    Comparable,
    ComparableSet,
    Method,
    ReconciledEstimate,
    ValueChannel,
    select_comparables,
    uncertainty_bounds,
    weighted_average,
)
from .baselines import (
    AdjustmentBreakdown,
    LinearModel,
    LocalLinearModel,
    fit_local_linear,
    fit_regression,
    linear_adjust,
    linear_adjusted_estimate,
    regression_estimate,
)
from .trace import (
    DesiderataConfig,
    LossBreakdown,
    TraceModel,
    TraceSteps,
    evaluate_trace,
    extract_steps,
    fit_trace,
    loss,
    trace_adjusted_estimate,
)

__version__ = "0.1.0"
