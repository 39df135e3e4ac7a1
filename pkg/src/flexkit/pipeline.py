"""End-to-end flows shared by the service and the CLI.

Thin orchestration only: every numeric step lives in its own module.
"""

from __future__ import annotations

from dataclasses import asdict

from .baseline import BaselineSet, DbscanParams, FlexibilityBand, derive_baselines, flexibility_band, tune_epsilon
from .errors import InsufficientOnTime, UnknownAsset
from .hvac.artifact import model_pair_from_doc, model_pair_to_doc
from .hvac.features import prepare_training_set
from .hvac.rollout import FlexibilityForecast, forecast_flexibility, persistence_forecast
from .hvac.state import DEFAULT_MAX_DEPTH, DEFAULT_N_TREES, train_state_predictor
from .hvac.thermal import train_thermal
from .spectral import dft, dominant_periods, period_to_segmentation
from .storage import Store
from .timeseries import MeterSeries, fill_gaps, slice_month


def compute_baselines(
    series: MeterSeries,
    month: str,
    epsilon_wh: float | None,
    min_points: int,
    low_load_floor_wh: float,
    medium_method: str = "median",
    detrend: str = "remove_mean",
) -> BaselineSet:
    """Month slice -> dominant cycle -> slot clustering -> baselines.

    ``epsilon_wh=None`` tunes the radius from the k-distance elbow of the
    month's readings using ``min_points`` as k.
    """
    chunk = slice_month(series, month)
    if chunk.gaps:
        chunk = fill_gaps(chunk, "linear_interp")
    spectrum = dft(chunk, detrend)
    top = dominant_periods(spectrum, max_peaks=1)[0]
    segmentation = period_to_segmentation(top, chunk.sampling_interval_s)
    if epsilon_wh is None:
        epsilon_wh = tune_epsilon([[v] for v in chunk.values], min_points)
    params = DbscanParams(epsilon_wh=epsilon_wh, min_points=min_points)
    return derive_baselines(
        chunk, segmentation, params, low_load_floor_wh, medium_method, month=month
    )


def baselines_to_doc(baselines: BaselineSet, params: dict | None = None) -> dict:
    doc = asdict(baselines)
    doc["slots"] = [asdict(s) for s in baselines.slots]
    doc["excluded_low_clusters"] = [list(x) for x in baselines.excluded_low_clusters]
    if params:
        doc["params"] = params
    return doc


def baselines_from_doc(doc: dict) -> BaselineSet:
    from .baseline import SlotBaseline

    return BaselineSet(
        month=doc["month"],
        slots_per_cycle=doc["slots_per_cycle"],
        slots=tuple(
            SlotBaseline(
                slot=s["slot"],
                min_wh=s["min_wh"],
                medium_wh=s["medium_wh"],
                max_wh=s["max_wh"],
                fallback=s["fallback"],
            )
            for s in doc["slots"]
        ),
        excluded_low_clusters=tuple((a, b) for a, b in doc["excluded_low_clusters"]),
        outlier_count=doc["outlier_count"],
        medium_method=doc["medium_method"],
    )


def band_to_doc(band: FlexibilityBand) -> dict:
    return {
        "direction": band.direction,
        "available_flex_wh": list(band.available_flex_wh),
        "adjustment_fraction": band.adjustment_fraction,
    }


def train_hvac_models(
    store: Store,
    asset_id: str,
    step_s: int = 900,
    n_trees: int = DEFAULT_N_TREES,
    max_depth: int = DEFAULT_MAX_DEPTH,
    seed: int = 0,
) -> dict:
    """Train the thermal/state pair from stored telemetry; persist artifact."""
    samples = store.load_hvac_samples(asset_id)
    prepared = prepare_training_set(samples, step_s)
    mode = "cooling" if prepared.mean_on_delta_c < 0 else "heating"
    thermal = train_thermal(prepared.thermal, prepared.thermal_normalization, mode)
    state = train_state_predictor(
        prepared.state,
        prepared.state_normalization,
        n_trees=n_trees,
        max_depth=max_depth,
        seed=seed,
    )
    doc = model_pair_to_doc(
        thermal,
        state,
        provenance={
            "asset_id": asset_id,
            "step_s": step_s,
            "n_trees": n_trees,
            "max_depth": max_depth,
            "seed": seed,
            "on_steps": prepared.on_steps,
            "n_steps": prepared.n_steps,
        },
    )
    store.save_artifact(asset_id, "hvac_model", "current", doc)
    return doc


def forecast_for_asset(
    store: Store,
    asset_id: str,
    horizon_steps: int,
    step_s: int,
    baseline_set_c: float,
    flex_set_c: float,
    direction: str = "downward",
) -> FlexibilityForecast:
    """Forecast from the stored model pair and the latest telemetry state.

    The outdoor path is a persistence forecast from the last observed
    outdoor temperature unless a real forecast is wired in upstream.
    """
    doc = store.load_artifact(asset_id, "hvac_model", "current")
    if doc is None:
        raise UnknownAsset(f"no trained model for {asset_id}")
    thermal, state, _ = model_pair_from_doc(doc)
    samples = store.load_hvac_samples(asset_id)
    if not samples:
        raise InsufficientOnTime(f"no telemetry for {asset_id}")
    asset = store.get_asset(asset_id)
    initial = samples[-1]
    outdoor = persistence_forecast(initial.outdoor_temp_c, horizon_steps)
    return forecast_flexibility(
        thermal,
        state,
        initial,
        baseline_set_c,
        flex_set_c,
        horizon_steps,
        step_s,
        outdoor,
        rated_power_kw=asset.rated_power_kw or 0.0,
        device_id=asset_id,
        direction=direction,
    )


def forecast_to_doc(forecast: FlexibilityForecast) -> dict:
    return {
        "device_id": forecast.device_id,
        "horizon_steps": forecast.horizon_steps,
        "step_s": forecast.step_s,
        "available_flex_kw": list(forecast.available_flex_kw),
        "baseline_set_temp_c": forecast.baseline_set_temp_c,
        "flex_set_temp_c": forecast.flex_set_temp_c,
        "direction": forecast.direction,
    }


def forecast_from_doc(doc: dict) -> FlexibilityForecast:
    return FlexibilityForecast(
        device_id=doc["device_id"],
        horizon_steps=doc["horizon_steps"],
        step_s=doc["step_s"],
        available_flex_kw=tuple(doc["available_flex_kw"]),
        baseline_set_temp_c=doc["baseline_set_temp_c"],
        flex_set_temp_c=doc["flex_set_temp_c"],
        direction=doc.get("direction", "downward"),
    )
