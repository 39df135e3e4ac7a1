"""Versioned, self-describing artifact format for trained model pairs.

Plain JSON so artifacts stay diffable, portable, and readable across
minor versions; provenance (hyperparameters, seed, metrics, training
window) rides along inside the document.
"""

from __future__ import annotations

from ..timeseries import NormalizationSpec
from .forest import BinaryRandomForest
from .state import StatePredictor
from .thermal import ThermalModel

MODEL_FORMAT = "flexkit-hvac-model/1"


def _norm_to_doc(spec: NormalizationSpec) -> dict:
    return {
        "method": spec.method,
        "per_feature_params": [list(p) for p in spec.per_feature_params],
    }


def _norm_from_doc(doc: dict) -> NormalizationSpec:
    return NormalizationSpec(
        method=doc["method"],
        per_feature_params=tuple((float(o), float(s)) for o, s in doc["per_feature_params"]),
    )


def model_pair_to_doc(
    thermal: ThermalModel,
    state: StatePredictor,
    provenance: dict | None = None,
) -> dict:
    return {
        "format": MODEL_FORMAT,
        "thermal": {
            "coefficients": list(thermal.coefficients),
            "normalization": _norm_to_doc(thermal.feature_normalization),
            "metrics": thermal.train_metrics,
            "mode": thermal.mode,
            "solver": thermal.solver,
            "features": list(thermal.feature_names),
        },
        "state": {
            "forest": state.forest.to_dict(),
            "normalization": _norm_to_doc(state.feature_normalization),
            "metrics": state.train_metrics,
            "features": list(state.feature_names),
        },
        "provenance": provenance or {},
    }


def model_pair_from_doc(doc: dict) -> tuple[ThermalModel, StatePredictor, dict]:
    fmt = doc.get("format", "")
    name, _, version = fmt.partition("/")
    if name != MODEL_FORMAT.partition("/")[0] or not version.startswith("1"):
        raise ValueError(f"unsupported model artifact format {fmt!r}")

    t = doc["thermal"]
    thermal = ThermalModel(
        coefficients=tuple(float(c) for c in t["coefficients"]),
        feature_normalization=_norm_from_doc(t["normalization"]),
        train_metrics=dict(t["metrics"]),
        mode=t["mode"],
        solver=t["solver"],
        feature_names=tuple(t["features"]),
    )
    s = doc["state"]
    state = StatePredictor(
        forest=BinaryRandomForest.from_dict(s["forest"]),
        feature_normalization=_norm_from_doc(s["normalization"]),
        train_metrics=dict(s["metrics"]),
        feature_names=tuple(s["features"]),
    )
    return thermal, state, dict(doc.get("provenance", {}))
