"""Per-HVAC flexibility: thermal model, state predictor, joint rollout."""

from .features import (
    HvacSample,
    SupervisedSplit,
    TrainingSet,
    prepare_training_set,
    read_hvac_csv,
    write_hvac_csv,
)
from .forest import BinaryRandomForest
from .rollout import FlexibilityForecast, forecast_flexibility, persistence_forecast, rollout
from .state import StatePredictor, train_state_predictor
from .thermal import ThermalModel, train_thermal

__all__ = [
    "HvacSample",
    "SupervisedSplit",
    "TrainingSet",
    "prepare_training_set",
    "read_hvac_csv",
    "write_hvac_csv",
    "BinaryRandomForest",
    "ThermalModel",
    "train_thermal",
    "StatePredictor",
    "train_state_predictor",
    "FlexibilityForecast",
    "forecast_flexibility",
    "persistence_forecast",
    "rollout",
]
