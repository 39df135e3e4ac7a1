"""Seeded synthetic datasets: industrial-park meters and apartment HVACs.

Stand-ins for field data in tests, demos, and the golden pipeline run.
The industrial generator emits hourly building meters with a strong
24-hour day/night cycle, a night floor under the essential-device bound,
and occasional spikes; the apartment generator simulates a first-order
RC zone (dT/dt = (T_out - T_in)/tau + r*state) under a hysteresis
thermostat and records the ground-truth parameters next to the telemetry
so model tests can check recovery against them.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from datetime import datetime, timedelta, timezone
from pathlib import Path

import numpy as np

from .errors import InvalidParameters
from .hvac.features import HvacSample, write_hvac_csv
from .timeseries import MeterSeries, format_timestamp

INDUSTRIAL_DEFAULTS = {
    "n_buildings": 7,
    "start": "2021-01-01T00:00:00Z",
    "days": 60,
    "day_start_hour": 8,
    "day_end_hour": 18,
    "night_wh": 300.0,
    "day_wh": 1800.0,
    "noise_frac": 0.05,
    "spike_prob": 0.004,
    "spike_multiplier": 3.0,
}

APARTMENT_DEFAULTS = {
    "n_units": 8,
    "start": "2021-07-01T00:00:00Z",
    "days": 21,
    "dt_s": 60,
    "tau_s": 7200.0,
    "cool_rate_c_per_s": -0.0010,
    "rated_power_w": 2000.0,
    "hysteresis_c": 1.5,
    "set_comfort_c": 24.0,
    "set_night_c": 26.0,
    "set_away_c": 30.0,
    "away_hours": (9, 16),
    "night_hours": (1, 7),
    "manual_overrides_per_day": 1,
    "override_minutes": (120, 240),
    "outdoor_mean_c": 29.0,
    "outdoor_amplitude_c": 5.0,
    "sensor_noise_c": 0.1,
    "initial_indoor_c": 26.0,
}

SCENARIO_KINDS = ("industrial_park", "apartment_block")


@dataclass(frozen=True)
class SyntheticScenario:
    seed: int
    kind: str
    params: dict

    def __post_init__(self):
        if self.kind not in SCENARIO_KINDS:
            raise InvalidParameters(f"unknown scenario kind {self.kind!r}")

    def merged_params(self) -> dict:
        base = dict(INDUSTRIAL_DEFAULTS if self.kind == "industrial_park" else APARTMENT_DEFAULTS)
        unknown = set(self.params) - set(base)
        if unknown:
            raise InvalidParameters(f"unknown parameters {sorted(unknown)}")
        base.update(self.params)
        return base


def _parse_start(p: dict) -> datetime:
    text = p["start"]
    if text.endswith("Z"):
        text = text[:-1] + "+00:00"
    return datetime.fromisoformat(text).astimezone(timezone.utc)


def industrial_series(scenario: SyntheticScenario, building: int) -> MeterSeries:
    """Hourly Wh series for one building of the industrial park."""
    p = scenario.merged_params()
    if not (0 <= building < p["n_buildings"]):
        raise InvalidParameters(f"building {building} outside 0..{p['n_buildings'] - 1}")
    if p["days"] < 1 or not (0 <= p["day_start_hour"] < p["day_end_hour"] <= 24):
        raise InvalidParameters("bad industrial schedule parameters")

    rng = np.random.default_rng(np.random.SeedSequence((scenario.seed, building)))
    start = _parse_start(p)
    n = p["days"] * 24
    hours = (np.arange(n) + start.hour) % 24
    daytime = (hours >= p["day_start_hour"]) & (hours < p["day_end_hour"])

    level_jitter = 1.0 + 0.1 * (rng.random() - 0.5)  # per-building plateau spread
    base = np.where(daytime, p["day_wh"] * level_jitter, p["night_wh"])
    values = base * (1.0 + p["noise_frac"] * rng.standard_normal(n))
    spikes = rng.random(n) < p["spike_prob"]
    values[spikes] = p["day_wh"] * p["spike_multiplier"] * level_jitter
    values = np.round(np.maximum(values, 0.0), 3)

    return MeterSeries(start, 3600, tuple(float(v) for v in values), "Wh")


def _setpoint_at(ts: datetime, p: dict, day_offset: float) -> float:
    # Away setback while out, comfort cooling in the evening, lighter
    # night cooling.  Occupants nudge the comfort/night setpoints day to
    # day; that spread plus the big return-home pull-down is what lets a
    # trained state model generalize to counterfactual setpoints.
    h = ts.hour
    away_lo, away_hi = p["away_hours"]
    night_start, night_end = p["night_hours"]
    if away_lo <= h < away_hi:
        return p["set_away_c"]
    if h >= night_start or h < night_end:
        # Night setpoints only nudge upward: pulling them down parks the
        # hysteresis band on the cool-night drift equilibrium, where
        # on/off labels stop being well defined.
        return p["set_night_c"] + max(0.0, day_offset)
    return p["set_comfort_c"] + day_offset


def apartment_telemetry(scenario: SyntheticScenario, unit: int):
    """Simulate one apartment's HVAC at 1-minute resolution.

    Returns (samples, truth) where truth holds the unit's effective RC
    parameters for oracle comparisons.
    """
    p = scenario.merged_params()
    if not (0 <= unit < p["n_units"]):
        raise InvalidParameters(f"unit {unit} outside 0..{p['n_units'] - 1}")
    if p["days"] < 1 or p["dt_s"] <= 0 or p["tau_s"] <= 0:
        raise InvalidParameters("bad apartment simulation parameters")
    if p["cool_rate_c_per_s"] >= 0:
        raise InvalidParameters("cool_rate_c_per_s must be negative (cooling)")

    rng = np.random.default_rng(np.random.SeedSequence((scenario.seed, unit)))
    tau = p["tau_s"] * (1.0 + 0.2 * (rng.random() - 0.5))
    rate = p["cool_rate_c_per_s"] * (1.0 + 0.15 * (rng.random() - 0.5))
    set_offset = round(0.5 * (rng.random() - 0.5), 2)
    day_offsets = rng.choice([-1.0, -0.5, 0.0, 0.5, 1.0], size=p["days"])

    start = _parse_start(p)
    dt = p["dt_s"]
    n = p["days"] * 24 * 3600 // dt
    sigma = p["sensor_noise_c"]

    # Occupants occasionally override the schedule for a while (and an
    # aggregator probes setpoints before enrollment); these excursions
    # spread the training data over the whole setpoint range instead of
    # leaving counterfactual setpoints unsupported.
    override_set = np.full(n, np.nan)
    steps_per_day = 24 * 3600 // dt
    dur_lo, dur_hi = p["override_minutes"]
    for d in range(p["days"]):
        for _ in range(int(p["manual_overrides_per_day"])):
            begin = d * steps_per_day + int(rng.integers(0, steps_per_day))
            length = int(rng.integers(dur_lo * 60 // dt, dur_hi * 60 // dt + 1))
            target = float(rng.choice(np.arange(22.5, 27.01, 0.5)))
            override_set[begin:begin + length] = target

    samples: list[HvacSample] = []
    indoor = p["initial_indoor_c"]
    state = 0
    for k in range(n):
        ts = start + timedelta(seconds=k * dt)
        seconds = (ts - ts.replace(hour=0, minute=0, second=0)).total_seconds()
        outdoor = p["outdoor_mean_c"] + p["outdoor_amplitude_c"] * math.sin(
            2 * math.pi * (seconds - 9 * 3600) / 86400.0
        )  # daily swing peaking mid-afternoon
        if not math.isnan(override_set[k]):
            setpoint = override_set[k] + set_offset
        else:
            setpoint = _setpoint_at(ts, p, day_offsets[k * dt // 86400]) + set_offset

        if indoor > setpoint + p["hysteresis_c"]:
            state = 1
        elif indoor < setpoint - p["hysteresis_c"]:
            state = 0

        power = p["rated_power_w"] * (1.0 + 0.01 * rng.standard_normal()) if state else 0.0
        samples.append(
            HvacSample(
                timestamp=ts,
                indoor_temp_c=round(indoor + sigma * rng.standard_normal(), 3),
                outdoor_temp_c=round(outdoor + sigma * rng.standard_normal(), 3),
                hvac_power_w=round(max(power, 0.0), 1),
                hvac_state=state,
                set_temp_c=round(setpoint, 2),
            )
        )
        indoor = indoor + dt * ((outdoor - indoor) / tau + rate * state)

    truth = {
        "tau_s": tau,
        "cool_rate_c_per_s": rate,
        "set_offset_c": set_offset,
        "dt_s": dt,
        "rated_power_w": p["rated_power_w"],
        "hysteresis_c": p["hysteresis_c"],
        "sensor_noise_c": sigma,
    }
    return samples, truth


def generate_synthetic(scenario: SyntheticScenario, out_dir: str | Path) -> list[str]:
    """Write the scenario's CSV files (plus a manifest) and list their paths.

    Same seed and parameters give byte-identical files.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    p = scenario.merged_params()
    written: list[str] = []

    if scenario.kind == "industrial_park":
        for b in range(p["n_buildings"]):
            series = industrial_series(scenario, b)
            path = out / f"building_{b + 1}.csv"
            lines = ["timestamp,value,unit"]
            for ts, value in series.rows():
                lines.append(f"{format_timestamp(ts)},{value:.3f},Wh")
            path.write_text("\n".join(lines) + "\n")
            written.append(str(path))
    else:
        truths = {}
        for u in range(p["n_units"]):
            samples, truth = apartment_telemetry(scenario, u)
            path = out / f"unit_{u + 1}.csv"
            path.write_text(write_hvac_csv(samples))
            truths[f"unit_{u + 1}"] = truth
            written.append(str(path))
        truth_path = out / "ground_truth.json"
        truth_path.write_text(json.dumps(truths, indent=2, sort_keys=True) + "\n")
        written.append(str(truth_path))

    manifest = out / "manifest.json"
    manifest.write_text(
        json.dumps(
            {"kind": scenario.kind, "seed": scenario.seed, "params": p, "files": written},
            indent=2,
            sort_keys=True,
            default=list,
        )
        + "\n"
    )
    written.append(str(manifest))
    return written
