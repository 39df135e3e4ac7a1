"""Thermal regression, state forest, and the model artifact format."""

import json

import numpy as np
import pytest

from flexkit.errors import SingleClassTraining
from flexkit.hvac.artifact import model_pair_from_doc, model_pair_to_doc
from flexkit.hvac.features import SupervisedSplit, prepare_training_set
from flexkit.hvac.forest import fit_forest
from flexkit.hvac.state import train_state_predictor
from flexkit.hvac.thermal import train_thermal
from flexkit.synth import SyntheticScenario, apartment_telemetry
from flexkit.timeseries import apply_normalization, fit_normalization


def affine_split(seed=0, n=200, noise=0.0):
    rng = np.random.default_rng(seed)
    x = np.column_stack([
        rng.random(n) * 10 + 20,   # indoor-like
        rng.random(n) * 15 + 25,   # outdoor-like
        rng.integers(0, 2, n).astype(float),
    ])
    w_true = np.array([-0.06, 0.035, -0.5])
    b_true = 0.8
    y = x @ w_true + b_true + noise * rng.standard_normal(n)
    spec = fit_normalization(x[: int(0.8 * n)], "min_max")
    xn = apply_normalization(x, spec)
    cut = int(0.8 * n)
    split = SupervisedSplit(xn[:cut], y[:cut], xn[cut:], y[cut:])
    return split, spec, w_true, b_true


def raw_space_coefficients(model):
    """Fold the normalization into the learned affine map."""
    w = np.asarray(model.coefficients)
    offsets = np.array([p[0] for p in model.feature_normalization.per_feature_params])
    scales = np.array([p[1] for p in model.feature_normalization.per_feature_params])
    w_raw = w[:-1] / scales
    b_raw = w[-1] - float((w[:-1] * offsets / scales).sum())
    return w_raw, b_raw


# -- thermal ----------------------------------------------------------------------

def test_noiseless_affine_recovery():
    split, spec, w_true, b_true = affine_split()
    model = train_thermal(split, spec)
    w_raw, b_raw = raw_space_coefficients(model)
    assert w_raw == pytest.approx(w_true, abs=1e-6)
    assert b_raw == pytest.approx(b_true, abs=1e-6)
    assert model.train_metrics["r2"] > 0.999999
    assert model.solver == "ols"


def test_rc_simulation_meets_paper_analog_bounds():
    samples, _ = apartment_telemetry(
        SyntheticScenario(5, "apartment_block", {"n_units": 1}), 0
    )
    prepared = prepare_training_set(samples, 900)
    model = train_thermal(prepared.thermal, prepared.thermal_normalization)
    assert model.train_metrics["mae_c"] <= 0.3
    assert model.train_metrics["r2"] >= 0.88


def test_duplicate_column_takes_ridge_path():
    split, spec, _, _ = affine_split()
    x_dup_train = np.column_stack([split.x_train, split.x_train[:, 0]])
    x_dup_test = np.column_stack([split.x_test, split.x_test[:, 0]])
    dup = SupervisedSplit(x_dup_train, split.y_train, x_dup_test, split.y_test)
    spec4 = fit_normalization(x_dup_train, "min_max")
    model = train_thermal(dup, spec4)
    assert model.solver == "ridge"
    assert np.isfinite(model.coefficients).all()
    assert model.train_metrics["r2"] > 0.999


def test_normal_equations_orthogonality():
    split, spec, _, _ = affine_split(noise=0.05)
    model = train_thermal(split, spec)
    a = np.column_stack([split.x_train, np.ones(len(split.x_train))])
    residual = split.y_train - a @ np.asarray(model.coefficients)
    gradient = a.T @ residual
    scale = max(1.0, float(np.abs(a.T @ split.y_train).max()))
    assert np.abs(gradient).max() / scale < 1e-6


def test_minimum_row_count_enforced():
    split, spec, _, _ = affine_split(n=60)
    with pytest.raises(ValueError):
        train_thermal(split, spec)


def test_predict_delta_conditions_on_state():
    split, spec, w_true, _ = affine_split()
    model = train_thermal(split, spec)
    on = model.predict_delta(25.0, 30.0, 1)
    off = model.predict_delta(25.0, 30.0, 0)
    assert on - off == pytest.approx(w_true[2], abs=1e-6)


# -- forest ------------------------------------------------------------------------

def test_forest_is_deterministic_for_fixed_seed():
    rng = np.random.default_rng(2)
    x = rng.random((300, 4))
    y = (x[:, 0] + 0.2 * x[:, 1] > 0.6).astype(int)
    a = fit_forest(x, y, n_trees=20, max_depth=6, seed=9)
    b = fit_forest(x, y, n_trees=20, max_depth=6, seed=9)
    assert json.dumps(a.to_dict()) == json.dumps(b.to_dict())
    c = fit_forest(x, y, n_trees=20, max_depth=6, seed=10)
    assert json.dumps(a.to_dict()) != json.dumps(c.to_dict())


def test_forest_learns_threshold_rule():
    rng = np.random.default_rng(3)
    x = rng.random((500, 3))
    y = (x[:, 1] > 0.45).astype(int)
    forest = fit_forest(x[:400], y[:400], n_trees=30, max_depth=8, seed=0)
    acc = (forest.predict(x[400:]) == y[400:]).mean()
    assert acc >= 0.97


def test_forest_round_trip_serialization():
    rng = np.random.default_rng(4)
    x = rng.random((200, 3))
    y = (x[:, 0] > 0.5).astype(int)
    forest = fit_forest(x, y, n_trees=10, max_depth=5, seed=1)
    from flexkit.hvac.forest import BinaryRandomForest

    clone = BinaryRandomForest.from_dict(json.loads(json.dumps(forest.to_dict())))
    assert (clone.predict(x) == forest.predict(x)).all()


# -- state predictor ---------------------------------------------------------------

def thermostat_split(seed=0, n=1500, band=0.5):
    rng = np.random.default_rng(seed)
    indoor = 24.0 + rng.random(n) * 4.0
    set_temp = np.full(n, 25.5)
    prev = rng.integers(0, 2, n).astype(float)
    diff = indoor - set_temp
    y = np.where(diff > band, 1.0, np.where(diff < -band, 0.0, prev))
    x = np.column_stack([indoor, set_temp, diff, prev, 30.0 + rng.random(n)])
    spec = fit_normalization(x[: int(0.8 * n)], "min_max")
    xn = apply_normalization(x, spec)
    cut = int(0.8 * n)
    return SupervisedSplit(xn[:cut], y[:cut], xn[cut:], y[cut:]), spec


def test_separable_thermostat_is_learned():
    split, spec = thermostat_split()
    predictor = train_state_predictor(split, spec, seed=0)
    assert predictor.train_metrics["accuracy"] >= 0.99


def test_single_class_training_rejected():
    split, spec = thermostat_split()
    allon = SupervisedSplit(split.x_train, np.ones_like(split.y_train), split.x_test, split.y_test)
    with pytest.raises(SingleClassTraining):
        train_state_predictor(allon, spec)


def test_rc_simulation_state_metrics():
    samples, _ = apartment_telemetry(
        SyntheticScenario(5, "apartment_block", {"n_units": 1}), 0
    )
    prepared = prepare_training_set(samples, 900)
    predictor = train_state_predictor(prepared.state, prepared.state_normalization, seed=1)
    assert predictor.train_metrics["accuracy"] >= 0.90
    assert predictor.train_metrics["f1"] >= 0.88


def test_training_determinism_end_to_end():
    samples, _ = apartment_telemetry(
        SyntheticScenario(2, "apartment_block", {"n_units": 1, "days": 10}), 0
    )
    prepared = prepare_training_set(samples, 900, min_on_steps=50)
    a = train_state_predictor(prepared.state, prepared.state_normalization, seed=3)
    b = train_state_predictor(prepared.state, prepared.state_normalization, seed=3)
    assert json.dumps(a.forest.to_dict()) == json.dumps(b.forest.to_dict())
    assert a.train_metrics == b.train_metrics


# -- artifact -----------------------------------------------------------------------

def test_model_pair_artifact_round_trip():
    split, spec, _, _ = affine_split()
    thermal = train_thermal(split, spec)
    ssplit, sspec = thermostat_split()
    state = train_state_predictor(ssplit, sspec, seed=2)
    doc = model_pair_to_doc(thermal, state, provenance={"seed": 2, "step_s": 900})
    doc = json.loads(json.dumps(doc, sort_keys=True))  # force a wire round-trip
    thermal2, state2, provenance = model_pair_from_doc(doc)
    assert thermal2 == thermal
    assert provenance == {"seed": 2, "step_s": 900}
    probe = (25.3, 25.5, -0.2, 1, 30.5)
    assert state2.predict_state(*probe) == state.predict_state(*probe)
    assert state2.train_metrics == state.train_metrics


def test_artifact_rejects_unknown_format():
    with pytest.raises(ValueError):
        model_pair_from_doc({"format": "other-model/9"})
