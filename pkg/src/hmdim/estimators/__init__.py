"""Statistical estimators: drift, entropy, boundary clouds, local dimension, diagnostics."""

from hmdim.estimators.base import EstimateWithError
from hmdim.estimators.boundary import (
    BoundaryCloud,
    BoundarySampler,
    sample_boundary_cloud,
    uniform_free_cloud,
)
from hmdim.estimators.diagnostics import (
    DiagnosticResult,
    continuity_experiment,
    event_A_diagnostic,
    shadow_hit_diagnostic,
    stationarity_test,
    tracking_diagnostic,
)
from hmdim.estimators.dimension import (
    LocalDimensionEstimator,
    LocalDimReport,
    corrupted,
    local_dimension_report,
    upper_bound_check,
)
from hmdim.estimators.drift import DriftEstimator, drift_mc
from hmdim.estimators.entropy import EntropyEstimator, entropy_shannon_mc, entropy_subadditive

__all__ = [
    "BoundaryCloud", "BoundarySampler", "DiagnosticResult", "DriftEstimator",
    "EntropyEstimator", "EstimateWithError", "LocalDimReport", "LocalDimensionEstimator",
    "continuity_experiment", "corrupted", "drift_mc", "entropy_shannon_mc",
    "entropy_subadditive", "event_A_diagnostic", "local_dimension_report",
    "sample_boundary_cloud", "shadow_hit_diagnostic", "stationarity_test",
    "tracking_diagnostic", "uniform_free_cloud", "upper_bound_check",
]
