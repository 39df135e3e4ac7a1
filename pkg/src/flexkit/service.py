"""HTTP API for the aggregator dashboard and external DR signals.

Orchestrates the event lifecycle (receive -> solve -> publish -> active
-> completed, with failed reachable until completion) over the embedded
store.  Domain errors always map onto 4xx bodies shaped
``{"error": {"code", "message"}}``; 5xx is reserved for genuine crashes.
Mutations honor a client-supplied ``Idempotency-Key`` header: retries
with the same key replay the stored response instead of re-executing.
"""

from __future__ import annotations

import os
import threading
from dataclasses import replace
from datetime import datetime, timezone
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from . import pipeline
from .errors import (
    DeadlinePassed,
    DuplicateTimestamp,
    FlexError,
    ForecastGap,
    FractionOutOfRange,
    InvalidParameters,
    LifecycleViolation,
    NoActiveContracts,
    UnknownAsset,
)
from .storage import AssetRecord, Store
from .timeseries import format_timestamp
from .vpp import (
    Contract,
    MeteredReading,
    dr_event_from_doc,
    solve_allocation,
    track_fulfillment,
)

API_PREFIX = "/api/v1"
LIFECYCLE_ORDER = ("received", "solved", "published", "active", "completed")

CONFLICT_ERRORS = (
    DuplicateTimestamp,
    NoActiveContracts,
    DeadlinePassed,
    LifecycleViolation,
    ForecastGap,
)


def _status_for(exc: FlexError) -> int:
    if isinstance(exc, UnknownAsset):
        return 404
    if isinstance(exc, CONFLICT_ERRORS):
        return 409
    return 422


def _error_body(code: str, message: str) -> dict:
    return {"error": {"code": code, "message": message}}


# -- request bodies -----------------------------------------------------------

class AssetIn(BaseModel):
    asset_id: str
    kind: str
    rated_power_kw: float | None = None
    location: str = ""
    contract_id: str | None = None


class BaselineRequest(BaseModel):
    month: str
    epsilon_wh: float | None = None  # None tunes from the k-distance elbow
    min_points: int = 5
    low_load_floor_wh: float = 500.0
    medium_method: str = "median"


class TrainRequest(BaseModel):
    step_s: int = 900
    n_trees: int = 100
    max_depth: int = 12
    seed: int = 0


class ForecastRequest(BaseModel):
    horizon_steps: int
    step_s: int = 900
    baseline_set_c: float
    flex_set_c: float
    direction: str = "downward"


class ContractIn(BaseModel):
    occupant_id: str
    asset_id: str
    max_flex_kw: float
    baseline_set_temp_c: float
    flex_set_temp_c: float
    active: bool = True
    compensation_eur_per_kwh: float = 0.0


class EventIn(BaseModel):
    event_id: str
    direction: str = "reduce"
    requested_power_kw: float
    start_time: str
    duration_s: int
    step_s: int
    notice_deadline: str
    policy: str = "proportional"
    mode: str = "event_total"


class TransitionIn(BaseModel):
    to: str


class ActualReadingIn(BaseModel):
    occupant_id: str
    step: int
    actual_kw: float


class ActualsIn(BaseModel):
    readings: list[ActualReadingIn]


class ConfigIn(BaseModel):
    adjustment_fraction: float = Field(gt=0.0)
    included_assets: list[str] = []


def create_app(data_dir: str | Path) -> FastAPI:
    store = Store(Path(data_dir) / "flexkit.db")
    app = FastAPI(title="flexkit", version="0.1.0")
    app.state.store = store
    app.state.write_lock = threading.Lock()

    @app.exception_handler(FlexError)
    async def flex_error_handler(_req: Request, exc: FlexError):
        return JSONResponse(_error_body(exc.code, str(exc)), status_code=_status_for(exc))

    def idempotent(request: Request, compute):
        """Replay cached responses for retried mutation keys."""
        key = request.headers.get("Idempotency-Key")
        if key:
            hit = store.idempotency_get(key)
            if hit:
                return JSONResponse(hit[1], status_code=hit[0])
        with app.state.write_lock:
            status, body = compute()
        if key:
            store.idempotency_put(key, status, body)
        return JSONResponse(body, status_code=status)

    # -- assets & telemetry ----------------------------------------------------

    @app.get(API_PREFIX + "/health")
    def health():
        return {"status": "ok"}

    @app.get(API_PREFIX + "/assets")
    def list_assets():
        return [vars(a) for a in store.list_assets()]

    @app.post(API_PREFIX + "/assets", status_code=201)
    def create_asset(body: AssetIn, request: Request):
        def compute():
            asset = AssetRecord(**body.model_dump())
            store.add_asset(asset)
            return 201, vars(asset)

        return idempotent(request, compute)

    @app.get(API_PREFIX + "/assets/{asset_id}")
    def get_asset(asset_id: str):
        return vars(store.get_asset(asset_id))

    @app.post(API_PREFIX + "/assets/{asset_id}/telemetry")
    async def upload_telemetry(asset_id: str, request: Request):
        text = (await request.body()).decode("utf-8")

        def compute():
            asset = store.get_asset(asset_id)
            if asset.kind == "building_meter":
                report = store.ingest_meter_text(text, asset_id)
            else:
                report = store.ingest_hvac_text(text, asset_id)
            return 200, {
                "rows_stored": report.rows_stored,
                "errors": [list(e) for e in report.errors],
            }

        return idempotent(request, compute)

    # -- baselines & bands -------------------------------------------------------

    def _compute_and_store_bands(asset_id: str, month: str, fraction: float):
        doc = store.load_artifact(asset_id, "baselines", month)
        if doc is None:
            return None
        baselines = pipeline.baselines_from_doc(doc)
        from .baseline import flexibility_band

        out = {}
        for direction in ("downward", "upward"):
            band = flexibility_band(baselines, direction, fraction)
            band_doc = pipeline.band_to_doc(band)
            store.save_artifact(asset_id, "band", f"{month}/{direction}", band_doc)
            out[direction] = band_doc
        return out

    @app.post(API_PREFIX + "/assets/{asset_id}/baselines")
    def compute_baselines(asset_id: str, body: BaselineRequest, request: Request):
        def compute():
            store.get_asset(asset_id)
            series = store.load_meter_series(asset_id)
            baselines = pipeline.compute_baselines(
                series,
                body.month,
                body.epsilon_wh,
                body.min_points,
                body.low_load_floor_wh,
                body.medium_method,
            )
            doc = pipeline.baselines_to_doc(
                baselines,
                params={
                    "epsilon_wh": body.epsilon_wh,
                    "min_points": body.min_points,
                    "low_load_floor_wh": body.low_load_floor_wh,
                },
            )
            store.save_artifact(asset_id, "baselines", body.month, doc)
            fraction = store.get_config()["adjustment_fraction"]
            bands = _compute_and_store_bands(asset_id, body.month, fraction)
            return 200, {"baselines": doc, "bands": bands}

        return idempotent(request, compute)

    @app.get(API_PREFIX + "/assets/{asset_id}/baselines/{month}")
    def get_baselines(asset_id: str, month: str):
        doc = store.load_artifact(asset_id, "baselines", month)
        if doc is None:
            raise UnknownAsset(f"no baselines for {asset_id} {month}")
        return doc

    @app.get(API_PREFIX + "/assets/{asset_id}/baselines/{month}/band")
    def get_band(asset_id: str, month: str, direction: str = "downward"):
        doc = store.load_artifact(asset_id, "band", f"{month}/{direction}")
        if doc is None:
            raise UnknownAsset(f"no {direction} band for {asset_id} {month}")
        return doc

    # -- HVAC models & forecasts -------------------------------------------------

    @app.post(API_PREFIX + "/assets/{asset_id}/hvac-model")
    def train_model(asset_id: str, body: TrainRequest, request: Request):
        def compute():
            doc = pipeline.train_hvac_models(
                store,
                asset_id,
                step_s=body.step_s,
                n_trees=body.n_trees,
                max_depth=body.max_depth,
                seed=body.seed,
            )
            return 200, {
                "thermal_metrics": doc["thermal"]["metrics"],
                "state_metrics": doc["state"]["metrics"],
                "provenance": doc["provenance"],
            }

        return idempotent(request, compute)

    @app.get(API_PREFIX + "/assets/{asset_id}/hvac-model")
    def get_model(asset_id: str):
        doc = store.load_artifact(asset_id, "hvac_model", "current")
        if doc is None:
            raise UnknownAsset(f"no trained model for {asset_id}")
        return doc

    @app.post(API_PREFIX + "/assets/{asset_id}/flexibility-forecast")
    def forecast(asset_id: str, body: ForecastRequest):
        fc = pipeline.forecast_for_asset(
            store,
            asset_id,
            body.horizon_steps,
            body.step_s,
            body.baseline_set_c,
            body.flex_set_c,
            body.direction,
        )
        return pipeline.forecast_to_doc(fc)

    # -- VPP configuration ---------------------------------------------------------

    @app.get(API_PREFIX + "/vpp/config")
    def get_config():
        return store.get_config()

    @app.put(API_PREFIX + "/vpp/config")
    def put_config(body: ConfigIn, request: Request):
        def compute():
            if not (0.0 < body.adjustment_fraction <= 0.10):
                raise FractionOutOfRange("adjustment fraction must be in (0, 0.10]")
            doc = {
                "adjustment_fraction": body.adjustment_fraction,
                "included_assets": sorted(set(body.included_assets)),
            }
            store.set_config(doc)
            recomputed = 0
            for asset_id, key, _ in store.list_artifacts("baselines"):
                if asset_id in doc["included_assets"]:
                    if _compute_and_store_bands(asset_id, key, body.adjustment_fraction):
                        recomputed += 1
            return 200, {"config": doc, "bands_recomputed": recomputed}

        return idempotent(request, compute)

    # -- contracts -----------------------------------------------------------------

    @app.post(API_PREFIX + "/contracts", status_code=201)
    def create_contract(body: ContractIn, request: Request):
        def compute():
            Contract(  # validate through the domain type
                occupant_id=body.occupant_id,
                max_flex_kw=body.max_flex_kw,
                baseline_set_temp_c=body.baseline_set_temp_c,
                flex_set_temp_c=body.flex_set_temp_c,
                active=body.active,
                asset_id=body.asset_id,
                compensation_eur_per_kwh=body.compensation_eur_per_kwh,
            )
            store.save_contract(body.model_dump())
            return 201, body.model_dump()

        return idempotent(request, compute)

    @app.get(API_PREFIX + "/contracts")
    def list_contracts():
        return store.list_contracts()

    # -- events ---------------------------------------------------------------------

    def _transition(transitions: list[dict], to: str) -> list[dict]:
        transitions.append(
            {"to": to, "at": format_timestamp(datetime.now(tz=timezone.utc))}
        )
        return transitions

    def _solve_event(event_doc: dict):
        event = dr_event_from_doc(event_doc)
        contracts = [
            Contract(
                occupant_id=c["occupant_id"],
                max_flex_kw=c["max_flex_kw"],
                baseline_set_temp_c=c["baseline_set_temp_c"],
                flex_set_temp_c=c["flex_set_temp_c"],
                active=c.get("active", True),
                asset_id=c.get("asset_id", ""),
                compensation_eur_per_kwh=c.get("compensation_eur_per_kwh", 0.0),
            )
            for c in store.list_contracts()
        ]
        active = [c for c in contracts if c.active]
        if not active:
            raise NoActiveContracts("no active contracts registered")
        direction = "downward" if event.direction == "reduce" else "upward"
        forecasts = []
        for c in active:
            fc = pipeline.forecast_for_asset(
                store,
                c.asset_id,
                event.duration_steps,
                event.step_s,
                c.baseline_set_temp_c,
                c.flex_set_temp_c,
                direction,
            )
            forecasts.append(replace(fc, device_id=c.occupant_id))
        plan = solve_allocation(
            event,
            active,
            forecasts,
            policy=event_doc.get("policy", "proportional"),
            mode=event_doc.get("mode", "event_total"),
        )
        return event, plan

    def _plan_doc(plan, event_doc: dict) -> dict:
        matrix = [list(row) for row in plan.delivered_power_kw]
        return {
            "event_id": plan.event_id,
            "requested_power_kw": event_doc["requested_power_kw"],
            "step_s": event_doc["step_s"],
            "occupant_ids": list(plan.occupant_ids),
            "steps": list(range(len(matrix[0]) if matrix else 0)),
            "delivered_power_kw": matrix,
            "per_step_total_kw": list(plan.total_per_step()),
            "per_occupant_total_kwh": [
                sum(row) * event_doc["step_s"] / 3600.0 for row in matrix
            ],
            "residual_kw": plan.residual_kw,
            "status": plan.status,
            "objective_kw2": plan.objective_kw2,
            "policy": plan.policy,
            "mode": plan.mode,
        }

    @app.post(API_PREFIX + "/events", status_code=201)
    def post_event(body: EventIn, request: Request):
        def compute():
            event_doc = body.model_dump()
            existing = store.load_event(body.event_id)
            if existing is not None:
                raise LifecycleViolation(f"event {body.event_id} already exists")
            now = datetime.now(tz=timezone.utc)
            deadline = dr_event_from_doc(event_doc).notice_deadline
            transitions = _transition([], "received")
            if now > deadline:
                store.save_event(body.event_id, event_doc, "failed",
                                 _transition(transitions, "failed"))
                raise DeadlinePassed(f"notice deadline {deadline.isoformat()} has passed")
            try:
                _, plan = _solve_event(event_doc)
            except FlexError:
                store.save_event(body.event_id, event_doc, "failed",
                                 _transition(transitions, "failed"))
                raise
            plan_doc = _plan_doc(plan, event_doc)
            store.save_event(body.event_id, event_doc, "solved",
                             _transition(transitions, "solved"))
            store.save_plan(body.event_id, plan_doc)
            return 201, {"event_id": body.event_id, "state": "solved", "plan": plan_doc}

        return idempotent(request, compute)

    @app.get(API_PREFIX + "/events")
    def list_events():
        return [
            {"event_id": eid, "state": state, "doc": doc}
            for eid, doc, state in store.list_events()
        ]

    @app.get(API_PREFIX + "/events/{event_id}")
    def get_event(event_id: str):
        found = store.load_event(event_id)
        if found is None:
            raise UnknownAsset(f"no event {event_id}")
        doc, state, transitions = found
        return {"event_id": event_id, "state": state, "doc": doc, "transitions": transitions}

    @app.get(API_PREFIX + "/events/{event_id}/plan")
    def get_plan(event_id: str):
        doc = store.load_plan(event_id)
        if doc is None:
            raise UnknownAsset(f"no plan for event {event_id}")
        return doc

    @app.post(API_PREFIX + "/events/{event_id}/resolve")
    def resolve_event(event_id: str, request: Request, policy: str = "proportional"):
        """Re-solve with a different policy; allowed until published."""

        def compute():
            found = store.load_event(event_id)
            if found is None:
                raise UnknownAsset(f"no event {event_id}")
            doc, state, transitions = found
            if state != "solved":
                raise LifecycleViolation(f"cannot re-solve in state {state!r}")
            doc["policy"] = policy
            _, plan = _solve_event(doc)
            plan_doc = _plan_doc(plan, doc)
            store.save_event(event_id, doc, "solved", transitions)
            store.save_plan(event_id, plan_doc)
            return 200, {"event_id": event_id, "state": "solved", "plan": plan_doc}

        return idempotent(request, compute)

    @app.post(API_PREFIX + "/events/{event_id}/transition")
    def transition_event(event_id: str, body: TransitionIn, request: Request):
        def compute():
            found = store.load_event(event_id)
            if found is None:
                raise UnknownAsset(f"no event {event_id}")
            doc, state, transitions = found
            if body.to == "failed":
                if state in ("completed", "failed"):
                    raise LifecycleViolation(f"cannot fail from {state!r}")
            else:
                if state not in LIFECYCLE_ORDER or body.to not in LIFECYCLE_ORDER:
                    raise LifecycleViolation(f"unknown transition {state!r} -> {body.to!r}")
                if LIFECYCLE_ORDER.index(body.to) != LIFECYCLE_ORDER.index(state) + 1:
                    raise LifecycleViolation(
                        f"transition {state!r} -> {body.to!r} skips the lifecycle order"
                    )
            store.save_event(event_id, doc, body.to, _transition(transitions, body.to))
            return 200, {"event_id": event_id, "state": body.to}

        return idempotent(request, compute)

    @app.post(API_PREFIX + "/events/{event_id}/actuals")
    def post_actuals(event_id: str, body: ActualsIn, request: Request):
        def compute():
            found = store.load_event(event_id)
            if found is None:
                raise UnknownAsset(f"no event {event_id}")
            _, state, _ = found
            if state not in ("published", "active", "completed"):
                raise LifecycleViolation(f"actuals not accepted in state {state!r}")
            stored = store.save_actuals(
                event_id,
                [(r.occupant_id, r.step, r.actual_kw) for r in body.readings],
            )
            return 200, {"stored": stored}

        return idempotent(request, compute)

    @app.get(API_PREFIX + "/events/{event_id}/fulfillment")
    def get_fulfillment(event_id: str):
        found = store.load_event(event_id)
        if found is None:
            raise UnknownAsset(f"no event {event_id}")
        doc, _, _ = found
        plan_doc = store.load_plan(event_id)
        if plan_doc is None:
            raise UnknownAsset(f"no plan for event {event_id}")

        from .vpp import AllocationPlan

        plan = AllocationPlan(
            event_id=event_id,
            occupant_ids=tuple(plan_doc["occupant_ids"]),
            delivered_power_kw=tuple(tuple(row) for row in plan_doc["delivered_power_kw"]),
            residual_kw=plan_doc["residual_kw"],
            status=plan_doc["status"],
            objective_kw2=plan_doc["objective_kw2"],
            policy=plan_doc["policy"],
            mode=plan_doc["mode"],
        )
        metered = [
            MeteredReading(occupant_id=o, step=s, actual_kw=kw)
            for o, s, kw in store.load_actuals(event_id)
        ]
        report = track_fulfillment(plan, metered, doc["requested_power_kw"])
        return {
            "event_id": event_id,
            "steps": [vars(s) for s in report.steps],
            "per_occupant_deviation_kw": report.per_occupant_deviation_kw,
            "missing": [list(m) for m in report.missing],
            "aggregate_deviation_kw": report.aggregate_deviation_kw(),
        }

    static_dir = os.environ.get("FLEXKIT_STATIC_DIR", "")
    if static_dir and Path(static_dir).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=static_dir, html=True), name="dashboard")

    return app


def main():  # pragma: no cover - thin uvicorn wrapper
    import uvicorn

    data_dir = os.environ.get("FLEXKIT_DATA_DIR", "./data")
    bind = os.environ.get("FLEXKIT_BIND", "127.0.0.1:8000")
    host, _, port = bind.partition(":")
    uvicorn.run(
        create_app(data_dir),
        host=host or "127.0.0.1",
        port=int(port or 8000),
        log_level=os.environ.get("FLEXKIT_LOG_LEVEL", "info"),
    )
