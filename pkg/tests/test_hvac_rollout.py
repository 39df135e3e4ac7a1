"""Joint rollout traces and flexibility forecasting against stub oracles."""

from datetime import datetime, timezone

import pytest

from flexkit.errors import HorizonZero
from flexkit.hvac.features import HvacSample
from flexkit.hvac.rollout import (
    FlexibilityForecast,
    forecast_flexibility,
    persistence_forecast,
    rollout,
)

from oracles import StubThermal, StubThermostat, hand_rollout

T0 = datetime(2021, 7, 1, 18, 0, tzinfo=timezone.utc)


def initial(indoor=26.0, state=0):
    return HvacSample(T0, indoor, 31.0, 2000.0 * state, state, 24.0)


class AlwaysOff:
    def predict_state(self, *args):
        return 0


def test_all_off_rollout_consumes_nothing():
    states, energy = rollout(
        StubThermal(), AlwaysOff(), initial(), 24.0, 16, 900,
        persistence_forecast(31.0, 16), rated_power_kw=2.0,
    )
    assert states == [0] * 16
    assert energy == 0.0


def test_stub_rollout_equals_hand_stepped_oracle():
    thermal = StubThermal(delta_on=-0.5, delta_off=0.3)
    thermostat = StubThermostat(band=0.5)
    horizon = 20
    states, energy = rollout(
        thermal, thermostat, initial(indoor=26.0, state=0), 24.0,
        horizon, 900, persistence_forecast(31.0, horizon), rated_power_kw=2.0,
    )
    want_states, want_energy = hand_rollout(
        thermal, thermostat, 26.0, 0, 24.0, horizon, 900, 2.0
    )
    assert states == want_states
    assert energy == pytest.approx(want_energy, abs=1e-12)
    assert any(states) and not all(states)  # the trace actually cycles


def test_three_hour_quarter_hour_energy_formula():
    # 12 steps of 15 min: energy is the ON count times rated power / 4
    thermal = StubThermal()
    thermostat = StubThermostat()
    states, energy = rollout(
        thermal, thermostat, initial(26.5, 1), 24.0, 12, 900,
        persistence_forecast(31.0, 12), rated_power_kw=2.0,
    )
    assert energy == pytest.approx(sum(states) * 2.0 * 0.25, abs=1e-12)


def test_energy_is_monotone_in_the_state_trace():
    rated, step_s = 2.0, 900
    base = [0, 1, 0, 1, 0]
    energy = sum(base) * rated * step_s / 3600.0
    for i, s in enumerate(base):
        if s == 0:
            flipped = list(base)
            flipped[i] = 1
            flipped_energy = sum(flipped) * rated * step_s / 3600.0
            assert flipped_energy - energy == pytest.approx(rated * step_s / 3600.0)


def test_rollout_preconditions():
    with pytest.raises(HorizonZero):
        rollout(StubThermal(), StubThermostat(), initial(), 24.0, 0, 900, [], 2.0)
    with pytest.raises(ValueError):
        rollout(StubThermal(), StubThermostat(), initial(), 24.0, 5, 900, [31.0] * 3, 2.0)


def test_identical_setpoint_rollouts_give_zero_flexibility():
    class IgnoresSetpoint:
        def predict_state(self, indoor, set_temp, diff, prev, outdoor):
            return 1

    forecast = forecast_flexibility(
        StubThermal(), IgnoresSetpoint(), initial(), 23.0, 26.0, 12, 900,
        persistence_forecast(31.0, 12), rated_power_kw=2.0,
    )
    assert forecast.available_flex_kw == (0.0,) * 12


def test_flexibility_equals_rated_power_where_traces_diverge():
    thermal = StubThermal(delta_on=-0.5, delta_off=0.3)
    thermostat = StubThermostat(band=0.5)
    horizon, rated = 16, 2.0
    forecast = forecast_flexibility(
        thermal, thermostat, initial(26.0, 0), 23.0, 26.0, horizon, 900,
        persistence_forecast(31.0, horizon), rated_power_kw=rated, device_id="apt4",
    )
    base_states, _ = hand_rollout(thermal, thermostat, 26.0, 0, 23.0, horizon, 900, rated)
    flex_states, _ = hand_rollout(thermal, thermostat, 26.0, 0, 26.0, horizon, 900, rated)
    for value, b, f in zip(forecast.available_flex_kw, base_states, flex_states):
        assert value == pytest.approx(max(0.0, (b - f) * rated), abs=1e-12)
    assert max(forecast.available_flex_kw) == rated  # diverges somewhere
    assert forecast.device_id == "apt4"
    assert forecast.baseline_set_temp_c == 23.0 and forecast.flex_set_temp_c == 26.0


def test_flexibility_bounded_by_rated_power():
    thermal = StubThermal()
    thermostat = StubThermostat()
    for baseline, flex in ((22.0, 27.0), (27.0, 22.0)):
        for direction in ("downward", "upward"):
            forecast = forecast_flexibility(
                thermal, thermostat, initial(25.0, 1), baseline, flex, 12, 900,
                persistence_forecast(31.0, 12), rated_power_kw=1.5, direction=direction,
            )
            assert all(0.0 <= v <= 1.5 for v in forecast.available_flex_kw)


def test_equal_setpoints_rejected():
    with pytest.raises(ValueError):
        forecast_flexibility(
            StubThermal(), StubThermostat(), initial(), 24.0, 24.0, 4, 900,
            persistence_forecast(31.0, 4), 2.0,
        )


def test_forecast_invariants_enforced_by_type():
    with pytest.raises(ValueError):
        FlexibilityForecast("d", 4, 900, (1.0, 2.0), 23.0, 26.0)
    with pytest.raises(ValueError):
        FlexibilityForecast("d", 2, 900, (1.0, -0.5), 23.0, 26.0)
