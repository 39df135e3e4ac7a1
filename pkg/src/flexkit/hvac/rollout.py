"""Joint model rollout and setpoint-pair flexibility forecasting."""

from __future__ import annotations

from dataclasses import dataclass

from ..errors import HorizonZero
from .features import HvacSample


@dataclass(frozen=True)
class FlexibilityForecast:
    """Per-step deliverable HVAC flexibility over a horizon."""

    device_id: str
    horizon_steps: int
    step_s: int
    available_flex_kw: tuple[float, ...]
    baseline_set_temp_c: float
    flex_set_temp_c: float
    direction: str = "downward"

    def __post_init__(self):
        if len(self.available_flex_kw) != self.horizon_steps:
            raise ValueError("forecast length must equal horizon_steps")
        if any(v < 0 for v in self.available_flex_kw):
            raise ValueError("flexibility must be non-negative")


def persistence_forecast(last_outdoor_c: float, horizon_steps: int) -> list[float]:
    """Hold the last observed outdoor temperature over the horizon."""
    return [last_outdoor_c] * horizon_steps


def rollout(
    thermal,
    state,
    initial: HvacSample,
    set_temp_c: float,
    horizon_steps: int,
    step_s: int,
    outdoor_forecast: list[float],
    rated_power_kw: float,
) -> tuple[list[int], float]:
    """Alternate thermal and state predictions over the horizon.

    Each step first advances indoor temperature conditioned on the current
    state, then classifies the next state against the setpoint; the energy
    total is the ON-step count times rated power.  The trace is a pure
    function of the models and inputs.
    """
    if horizon_steps < 1:
        raise HorizonZero("horizon must cover at least one step")
    if len(outdoor_forecast) < horizon_steps:
        raise ValueError(
            f"outdoor forecast covers {len(outdoor_forecast)} of {horizon_steps} steps"
        )

    indoor = initial.indoor_temp_c
    current = initial.hvac_state
    states: list[int] = []
    for k in range(horizon_steps):
        outdoor = outdoor_forecast[k]
        indoor = indoor + thermal.predict_delta(indoor, outdoor, current)
        current = int(
            state.predict_state(indoor, set_temp_c, indoor - set_temp_c, current, outdoor)
        )
        states.append(current)

    energy_kwh = sum(states) * rated_power_kw * step_s / 3600.0
    return states, energy_kwh


def forecast_flexibility(
    thermal,
    state,
    initial: HvacSample,
    baseline_set_c: float,
    flex_set_c: float,
    horizon_steps: int,
    step_s: int,
    outdoor_forecast: list[float],
    rated_power_kw: float,
    device_id: str = "",
    direction: str = "downward",
) -> FlexibilityForecast:
    """Flexibility as the per-step power gap between two setpoint rollouts.

    Downward flexibility at step t is max(0, baseline power - flex power):
    the avoided consumption when the occupant accepts the flex setpoint.
    Upward mirrors the difference.
    """
    if baseline_set_c == flex_set_c:
        raise ValueError("baseline and flex setpoints must differ")
    if direction not in ("upward", "downward"):
        raise ValueError(f"unknown direction {direction!r}")

    base_states, _ = rollout(
        thermal, state, initial, baseline_set_c, horizon_steps, step_s,
        outdoor_forecast, rated_power_kw,
    )
    flex_states, _ = rollout(
        thermal, state, initial, flex_set_c, horizon_steps, step_s,
        outdoor_forecast, rated_power_kw,
    )

    flex_kw = []
    for b, f in zip(base_states, flex_states):
        gap = (b - f) if direction == "downward" else (f - b)
        flex_kw.append(max(0.0, gap * rated_power_kw))

    return FlexibilityForecast(
        device_id=device_id,
        horizon_steps=horizon_steps,
        step_s=step_s,
        available_flex_kw=tuple(flex_kw),
        baseline_set_temp_c=baseline_set_c,
        flex_set_temp_c=flex_set_c,
        direction=direction,
    )
