"""Next-step HVAC on/off classifier (random forest)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import SingleClassTraining
from ..timeseries import NormalizationSpec, apply_normalization
from .features import STATE_FEATURES, SupervisedSplit
from .forest import BinaryRandomForest, fit_forest

DEFAULT_N_TREES = 100
DEFAULT_MAX_DEPTH = 12


def classification_metrics(y_true: np.ndarray, y_pred: np.ndarray) -> dict:
    y_true = np.asarray(y_true).astype(int)
    y_pred = np.asarray(y_pred).astype(int)
    accuracy = float((y_true == y_pred).mean())
    tp = int(((y_true == 1) & (y_pred == 1)).sum())
    fp = int(((y_true == 0) & (y_pred == 1)).sum())
    fn = int(((y_true == 1) & (y_pred == 0)).sum())
    denom = 2 * tp + fp + fn
    f1 = 2 * tp / denom if denom else 0.0
    return {"accuracy": accuracy, "f1": f1}


@dataclass(frozen=True)
class StatePredictor:
    """Majority-vote forest over (predicted indoor, setpoint, diff, prev state, outdoor)."""

    forest: BinaryRandomForest
    feature_normalization: NormalizationSpec
    train_metrics: dict
    feature_names: tuple[str, ...] = STATE_FEATURES

    def predict_state(
        self,
        indoor_pred_c: float,
        set_temp_c: float,
        temp_diff_c: float,
        prev_state: int,
        outdoor_temp_c: float,
    ) -> int:
        z = apply_normalization(
            np.array(
                [[indoor_pred_c, set_temp_c, temp_diff_c, float(prev_state), outdoor_temp_c]]
            ),
            self.feature_normalization,
        )
        if self.feature_normalization.method == "min_max":
            # Counterfactual setpoints push features past the training
            # envelope, where tree routing is arbitrary; saturating at the
            # envelope keeps the learned boundary monotone outside it.
            z = np.clip(z, 0.0, 1.0)
        return int(self.forest.predict(z)[0])


def train_state_predictor(
    split: SupervisedSplit,
    normalization: NormalizationSpec,
    n_trees: int = DEFAULT_N_TREES,
    max_depth: int = DEFAULT_MAX_DEPTH,
    seed: int = 0,
) -> StatePredictor:
    """Fit the on/off forest and score the held-out chronological tail."""
    classes = set(np.asarray(split.y_train).astype(int).tolist())
    if classes != {0, 1}:
        raise SingleClassTraining(f"training targets hold classes {sorted(classes)}")

    forest = fit_forest(
        split.x_train, split.y_train, n_trees=n_trees, max_depth=max_depth, seed=seed
    )
    metrics = classification_metrics(split.y_test, forest.predict(split.x_test))
    return StatePredictor(
        forest=forest,
        feature_normalization=normalization,
        train_metrics=metrics,
    )
