"""DR event allocation across contracted HVACs.

Minimizes the squared gap between the requested DR power and the total
delivered power, subject to per-(occupant, step) contract caps and
forecast availability.  The optimum total is min(request, capacity), so
the solver is closed-form; a tie-break policy makes the degenerate
under-capacity case (any feasible split of the request is optimal)
deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import datetime

import numpy as np

from .errors import (
    ForecastGap,
    GridMismatch,
    InconsistentSteps,
    InvalidParameters,
    NoActiveContracts,
)
from .hvac.rollout import FlexibilityForecast
from .timeseries import parse_timestamp

RESIDUAL_TOLERANCE = 1e-9


@dataclass(frozen=True)
class DrEvent:
    event_id: str
    requested_power_kw: float
    start_step: int
    duration_steps: int
    step_s: int
    notice_deadline: datetime
    direction: str = "reduce"

    def __post_init__(self):
        if self.requested_power_kw <= 0:
            raise InvalidParameters("requested_power_kw must be positive")
        if self.duration_steps < 1:
            raise InvalidParameters("duration_steps must be >= 1")
        if self.step_s <= 0:
            raise InvalidParameters("step_s must be positive")
        if self.direction not in ("reduce", "increase"):
            raise InvalidParameters(f"unknown direction {self.direction!r}")


def dr_event_from_doc(doc: dict) -> DrEvent:
    """Parse the wire-format event document.

    Shape: {event_id, direction, requested_power_kw, start_time,
    duration_s, step_s, notice_deadline}.
    """
    try:
        step_s = int(doc["step_s"])
        duration_s = int(doc["duration_s"])
        start = parse_timestamp(doc["start_time"])
        deadline = parse_timestamp(doc["notice_deadline"])
        requested = float(doc["requested_power_kw"])
        event_id = str(doc["event_id"])
        direction = str(doc.get("direction", "reduce"))
    except (KeyError, ValueError, TypeError) as exc:
        raise InvalidParameters(f"bad event document: {exc}") from exc
    if step_s <= 0 or duration_s % step_s != 0:
        raise InconsistentSteps(f"duration {duration_s}s not a multiple of step {step_s}s")
    return DrEvent(
        event_id=event_id,
        requested_power_kw=requested,
        start_step=int(start.timestamp()) // step_s,
        duration_steps=duration_s // step_s,
        step_s=step_s,
        notice_deadline=deadline,
        direction=direction,
    )


@dataclass(frozen=True)
class Contract:
    """Per-occupant flexibility agreement (cap applies at every step)."""

    occupant_id: str
    max_flex_kw: float
    baseline_set_temp_c: float
    flex_set_temp_c: float
    active: bool = True
    asset_id: str = ""
    compensation_eur_per_kwh: float = 0.0  # stored, never optimized over

    def __post_init__(self):
        if not np.isfinite(self.max_flex_kw) or self.max_flex_kw < 0:
            raise InvalidParameters("max_flex_kw must be finite and >= 0")


@dataclass(frozen=True)
class AllocationPlan:
    event_id: str
    occupant_ids: tuple[str, ...]
    delivered_power_kw: tuple[tuple[float, ...], ...]  # [occupant][step]
    residual_kw: float
    status: str  # exact | shortfall
    objective_kw2: float
    policy: str
    mode: str = "event_total"

    def total_per_step(self) -> tuple[float, ...]:
        arr = np.asarray(self.delivered_power_kw)
        return tuple(float(v) for v in arr.sum(axis=0))

    def total_kw(self) -> float:
        return float(np.asarray(self.delivered_power_kw).sum())


def _caps_matrix(
    event: DrEvent,
    contracts: list[Contract],
    forecasts: list[FlexibilityForecast],
) -> tuple[list[Contract], np.ndarray]:
    active = sorted((c for c in contracts if c.active), key=lambda c: c.occupant_id)
    if not active:
        raise NoActiveContracts("no active contracts")

    by_device = {f.device_id: f for f in forecasts}
    caps = np.zeros((len(active), event.duration_steps))
    for i, contract in enumerate(active):
        forecast = by_device.get(contract.occupant_id)
        if forecast is None:
            raise ForecastGap(f"no forecast for occupant {contract.occupant_id}")
        if forecast.step_s != event.step_s:
            raise InconsistentSteps(
                f"forecast step {forecast.step_s}s != event step {event.step_s}s"
            )
        if forecast.horizon_steps < event.duration_steps:
            raise ForecastGap(
                f"forecast for {contract.occupant_id} covers "
                f"{forecast.horizon_steps} of {event.duration_steps} steps"
            )
        for t in range(event.duration_steps):
            caps[i, t] = min(contract.max_flex_kw, forecast.available_flex_kw[t])
    return active, caps


def _fill_proportional(caps: np.ndarray, request: float) -> np.ndarray:
    capacity = float(caps.sum())
    if capacity <= 0.0:
        return np.zeros_like(caps)
    ratio = min(1.0, request / capacity)
    # min() guard keeps every cell exactly within its cap in floating point.
    return np.minimum(caps, caps * ratio)


def _fill_greedy(caps: np.ndarray, request: float) -> np.ndarray:
    alloc = np.zeros_like(caps)
    remaining = request
    for i in range(caps.shape[0]):  # occupants already in ascending id order
        for t in range(caps.shape[1]):
            if remaining <= 0.0:
                return alloc
            take = min(caps[i, t], remaining)
            alloc[i, t] = take
            remaining -= take
    return alloc


def solve_allocation(
    event: DrEvent,
    contracts: list[Contract],
    forecasts: list[FlexibilityForecast],
    policy: str = "proportional",
    mode: str = "event_total",
) -> AllocationPlan:
    """Allocate the requested DR power across occupants and steps.

    ``event_total`` treats the request as a single target for the whole
    event (the objective exactly as stated); ``per_step`` re-reads the
    request as a per-step target and solves each step independently.
    With capacity above the request the optimum is degenerate, so the
    policy picks the unique plan: ``proportional`` spreads by cap share,
    ``greedy_cheapest_first`` fills ascending occupant ids to their caps.
    """
    if policy not in ("proportional", "greedy_cheapest_first"):
        raise InvalidParameters(f"unknown policy {policy!r}")
    if mode not in ("event_total", "per_step"):
        raise InvalidParameters(f"unknown mode {mode!r}")

    active, caps = _caps_matrix(event, contracts, forecasts)
    request = event.requested_power_kw

    fill = _fill_proportional if policy == "proportional" else _fill_greedy
    if mode == "event_total":
        alloc = fill(caps, request)
        residual = request - float(alloc.sum())
        objective = residual * residual
    else:
        alloc = np.zeros_like(caps)
        residual = 0.0
        objective = 0.0
        for t in range(caps.shape[1]):
            col = fill(caps[:, t:t + 1], request)
            alloc[:, t:t + 1] = col
            step_residual = request - float(col.sum())
            residual += step_residual
            objective += step_residual * step_residual

    status = "exact" if abs(residual) <= RESIDUAL_TOLERANCE * max(1.0, request) else "shortfall"
    return AllocationPlan(
        event_id=event.event_id,
        occupant_ids=tuple(c.occupant_id for c in active),
        delivered_power_kw=tuple(tuple(float(v) for v in row) for row in alloc),
        residual_kw=residual,
        status=status,
        objective_kw2=objective,
        policy=policy,
        mode=mode,
    )


@dataclass(frozen=True)
class StepFeasibility:
    step: int
    capacity_kw: float
    short: bool  # capacity below the requested power


@dataclass(frozen=True)
class FeasibilityReport:
    steps: tuple[StepFeasibility, ...]
    binding: tuple[tuple[str, ...], ...]  # [occupant][step]: contract | availability
    max_deliverable_kw: float


def feasibility_report(
    event: DrEvent,
    contracts: list[Contract],
    forecasts: list[FlexibilityForecast],
) -> FeasibilityReport:
    """Summarize per-step capacity and which constraint binds each cell."""
    active, caps = _caps_matrix(event, contracts, forecasts)
    by_device = {f.device_id: f for f in forecasts}

    binding = []
    for contract in active:
        forecast = by_device[contract.occupant_id]
        row = []
        for t in range(event.duration_steps):
            avail = forecast.available_flex_kw[t]
            row.append("contract" if contract.max_flex_kw <= avail else "availability")
        binding.append(tuple(row))

    per_step = caps.sum(axis=0)
    steps = tuple(
        StepFeasibility(
            step=t,
            capacity_kw=float(per_step[t]),
            short=bool(per_step[t] < event.requested_power_kw),
        )
        for t in range(event.duration_steps)
    )
    return FeasibilityReport(
        steps=steps,
        binding=tuple(binding),
        max_deliverable_kw=float(caps.sum()),
    )


@dataclass(frozen=True)
class MeteredReading:
    occupant_id: str
    step: int
    actual_kw: float


@dataclass(frozen=True)
class StepFulfillment:
    step: int
    requested_kw: float
    planned_kw: float
    actual_kw: float
    deviation_kw: float


@dataclass(frozen=True)
class FulfillmentReport:
    event_id: str
    steps: tuple[StepFulfillment, ...]
    per_occupant_deviation_kw: dict
    missing: tuple[tuple[str, int], ...]

    def aggregate_deviation_kw(self) -> float:
        return float(sum(s.deviation_kw for s in self.steps))


def track_fulfillment(
    plan: AllocationPlan,
    metered: list[MeteredReading],
    requested_power_kw: float,
) -> FulfillmentReport:
    """Compare planned allocation against metered delivery.

    Metered readings must address (occupant, step) cells of the plan grid;
    anything else is a grid mismatch.  Cells without a reading are listed
    as missing and excluded from the actual totals -- never imputed.  The
    per-step requested line spreads an event-total request evenly, purely
    for display; per-step plans report the request as-is.
    """
    occupants = plan.occupant_ids
    n_steps = len(plan.delivered_power_kw[0]) if plan.delivered_power_kw else 0
    index = {occ: i for i, occ in enumerate(occupants)}

    actual = np.full((len(occupants), n_steps), np.nan)
    for reading in metered:
        if reading.occupant_id not in index:
            raise GridMismatch(f"unknown occupant {reading.occupant_id}")
        if not (0 <= reading.step < n_steps):
            raise GridMismatch(f"step {reading.step} outside plan grid")
        actual[index[reading.occupant_id], reading.step] = reading.actual_kw

    planned = np.asarray(plan.delivered_power_kw)
    missing = tuple(
        (occupants[i], t)
        for i in range(len(occupants))
        for t in range(n_steps)
        if np.isnan(actual[i, t])
    )

    if plan.mode == "per_step":
        requested_step = requested_power_kw
    else:
        requested_step = requested_power_kw / n_steps if n_steps else 0.0

    steps = []
    for t in range(n_steps):
        col = actual[:, t]
        actual_total = float(np.nansum(col)) if not np.isnan(col).all() else 0.0
        planned_total = float(planned[:, t].sum())
        steps.append(
            StepFulfillment(
                step=t,
                requested_kw=requested_step,
                planned_kw=planned_total,
                actual_kw=actual_total,
                deviation_kw=actual_total - planned_total,
            )
        )

    per_occupant = {}
    for occ, i in index.items():
        row = actual[i]
        have = ~np.isnan(row)
        per_occupant[occ] = float((row[have] - planned[i][have]).sum())

    return FulfillmentReport(
        event_id=plan.event_id,
        steps=tuple(steps),
        per_occupant_deviation_kw=per_occupant,
        missing=missing,
    )
