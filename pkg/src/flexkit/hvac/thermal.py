"""One-step indoor temperature-change model (ordinary least squares)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..timeseries import NormalizationSpec, apply_normalization
from .features import THERMAL_FEATURES, SupervisedSplit

RIDGE_DAMPING = 1e-6


@dataclass(frozen=True)
class ThermalModel:
    """Affine predictor of indoor temperature change over one step.

    ``coefficients`` are weights over the normalized features with the
    intercept last.  ``solver`` records whether the design was full rank
    (``ols``) or the fixed-damping ridge fallback was taken.
    """

    coefficients: tuple[float, ...]
    feature_normalization: NormalizationSpec
    train_metrics: dict
    mode: str = "cooling"
    solver: str = "ols"
    feature_names: tuple[str, ...] = THERMAL_FEATURES

    def predict_delta(self, indoor_temp_c: float, outdoor_temp_c: float, hvac_state: int) -> float:
        z = apply_normalization(
            np.array([[indoor_temp_c, outdoor_temp_c, float(hvac_state)]]),
            self.feature_normalization,
        )[0]
        w = np.asarray(self.coefficients)
        return float(z @ w[:-1] + w[-1])


def _design(x: np.ndarray) -> np.ndarray:
    return np.column_stack([x, np.ones(len(x))])


def regression_metrics(y_true: np.ndarray, y_pred: np.ndarray) -> dict:
    err = y_true - y_pred
    mae = float(np.abs(err).mean())
    ss_res = float((err ** 2).sum())
    ss_tot = float(((y_true - y_true.mean()) ** 2).sum())
    if ss_tot == 0.0:
        r2 = 1.0 if ss_res == 0.0 else 0.0
    else:
        r2 = 1.0 - ss_res / ss_tot
    return {"mae_c": mae, "r2": r2}


def train_thermal(
    split: SupervisedSplit,
    normalization: NormalizationSpec,
    mode: str = "cooling",
) -> ThermalModel:
    """Fit the temperature-change regression and score the held-out tail.

    A rank-deficient design (collinear features) falls back to ridge with
    fixed damping instead of failing; the fallback is recorded in
    ``solver`` so provenance survives into the model artifact.
    """
    n_rows = len(split.x_train) + len(split.x_test)
    if n_rows < 100:
        raise ValueError(f"need at least 100 rows, got {n_rows}")

    a = _design(split.x_train)
    w, _, rank, _ = np.linalg.lstsq(a, split.y_train, rcond=None)
    solver = "ols"
    if rank < a.shape[1]:
        solver = "ridge"
        gram = a.T @ a + RIDGE_DAMPING * np.eye(a.shape[1])
        w = np.linalg.solve(gram, a.T @ split.y_train)

    pred = _design(split.x_test) @ w
    metrics = regression_metrics(split.y_test, pred)
    return ThermalModel(
        coefficients=tuple(float(c) for c in w),
        feature_normalization=normalization,
        train_metrics=metrics,
        mode=mode,
        solver=solver,
    )
