"""flexkit: demand-response flexibility analytics and VPP dispatch.

Building-level flexibility bands from cycle detection plus density-based
baselining, per-HVAC flexibility forecasts from a thermal/state model
pair, and closed-form allocation of DR requests across a virtual power
plant -- exposed as a library, an HTTP service, and a CLI.
"""

__version__ = "0.1.0"

from . import errors
from .baseline import (
    BaselineSet,
    ClusterAssignment,
    DbscanParams,
    FlexibilityBand,
    dbscan,
    derive_baselines,
    flexibility_band,
    silhouette,
    tune_epsilon,
)
from .hvac import (
    FlexibilityForecast,
    HvacSample,
    StatePredictor,
    ThermalModel,
    forecast_flexibility,
    prepare_training_set,
    rollout,
    train_state_predictor,
    train_thermal,
)
from .spectral import (
    SegmentationRule,
    SpectralPeak,
    Spectrum,
    dft,
    dominant_periods,
    period_to_segmentation,
)
from .storage import AssetRecord, Store
from .synth import SyntheticScenario, generate_synthetic
from .timeseries import (
    MeterSeries,
    NormalizationSpec,
    fill_gaps,
    resample,
    validate_series,
)
from .vpp import (
    AllocationPlan,
    Contract,
    DrEvent,
    FulfillmentReport,
    MeteredReading,
    feasibility_report,
    solve_allocation,
    track_fulfillment,
)

__all__ = [
    "errors",
    "MeterSeries",
    "NormalizationSpec",
    "validate_series",
    "resample",
    "fill_gaps",
    "Spectrum",
    "SpectralPeak",
    "SegmentationRule",
    "dft",
    "dominant_periods",
    "period_to_segmentation",
    "DbscanParams",
    "ClusterAssignment",
    "BaselineSet",
    "FlexibilityBand",
    "dbscan",
    "tune_epsilon",
    "silhouette",
    "derive_baselines",
    "flexibility_band",
    "HvacSample",
    "ThermalModel",
    "StatePredictor",
    "FlexibilityForecast",
    "prepare_training_set",
    "train_thermal",
    "train_state_predictor",
    "rollout",
    "forecast_flexibility",
    "DrEvent",
    "Contract",
    "AllocationPlan",
    "MeteredReading",
    "FulfillmentReport",
    "solve_allocation",
    "feasibility_report",
    "track_fulfillment",
    "AssetRecord",
    "Store",
    "SyntheticScenario",
    "generate_synthetic",
]
