"""Embedded store: assets, ingestion, artifacts, events, atomicity."""

import json
from datetime import datetime, timedelta, timezone

import pytest

import flexkit.storage
from flexkit.errors import InvalidParameters, UnknownAsset
from flexkit.storage import AssetRecord, Store
from flexkit.timeseries import format_timestamp

T0 = datetime(2021, 1, 1, tzinfo=timezone.utc)


@pytest.fixture
def store(tmp_path):
    s = Store(tmp_path / "flexkit.db")
    yield s
    s.close()


def meter_csv(n=24, start=T0, bad_lines=()):
    lines = ["timestamp,value,unit"]
    for i in range(n):
        if i in bad_lines:
            lines.append("garbage-row")
        else:
            lines.append(f"{format_timestamp(start + timedelta(hours=i))},{100 + i},Wh")
    return "\n".join(lines) + "\n"


def test_asset_round_trip(store):
    asset = AssetRecord("b1", "building_meter", location="plant 4")
    assert store.add_asset(asset)
    assert store.get_asset("b1") == asset
    assert not store.add_asset(asset)  # second insert is a no-op
    assert [a.asset_id for a in store.list_assets()] == ["b1"]


def test_unknown_asset(store):
    with pytest.raises(UnknownAsset):
        store.get_asset("nope")
    with pytest.raises(UnknownAsset):
        store.ingest_meter_text(meter_csv(), "nope")


def test_hvac_asset_requires_rated_power():
    with pytest.raises(InvalidParameters):
        AssetRecord("h1", "hvac_unit")
    with pytest.raises(InvalidParameters):
        AssetRecord("h1", "imaginary_kind")


def test_reingest_is_idempotent(store):
    store.add_asset(AssetRecord("b1", "building_meter"))
    first = store.ingest_meter_text(meter_csv(), "b1")
    assert first.rows_stored == 24 and not first.errors
    second = store.ingest_meter_text(meter_csv(), "b1")
    assert second.rows_stored == 0
    assert len(second.errors) == 24
    assert all(code == "DuplicateTimestamp" for _, code, _ in second.errors)


def test_partial_acceptance_of_bad_rows(store):
    store.add_asset(AssetRecord("b1", "building_meter"))
    report = store.ingest_meter_text(meter_csv(100, bad_lines={42}), "b1")
    assert report.rows_stored == 99
    assert len(report.errors) == 1
    assert report.errors[0][1] == "MalformedRow"


def test_negative_rows_reported_not_stored(store):
    store.add_asset(AssetRecord("b1", "building_meter"))
    text = (
        "timestamp,value,unit\n"
        "2021-01-01T00:00:00Z,10,Wh\n"
        "2021-01-01T01:00:00Z,-5,Wh\n"
        "2021-01-01T02:00:00Z,10,Wh\n"
    )
    report = store.ingest_meter_text(text, "b1")
    assert report.rows_stored == 2
    assert report.errors[0][1] == "NegativeReading"


def test_large_file_round_trips(store):
    store.add_asset(AssetRecord("b1", "building_meter"))
    n = 10_000
    report = store.ingest_meter_text(meter_csv(n), "b1")
    assert report.rows_stored == n
    series = store.load_meter_series("b1")
    assert len(series) == n
    assert series.values[0] == 100.0 and series.values[-1] == 100.0 + n - 1
    assert series.gaps == ()


def test_ingest_is_atomic_under_crash(store, monkeypatch):
    store.add_asset(AssetRecord("b1", "building_meter"))
    calls = {"n": 0}
    real = flexkit.storage.to_wh

    def explode_midway(value, unit, interval_s):
        calls["n"] += 1
        if calls["n"] == 50:
            raise RuntimeError("injected crash")
        return real(value, unit, interval_s)

    monkeypatch.setattr(flexkit.storage, "to_wh", explode_midway)
    with pytest.raises(RuntimeError):
        store.ingest_meter_text(meter_csv(100), "b1")
    monkeypatch.setattr(flexkit.storage, "to_wh", real)
    with pytest.raises(UnknownAsset):  # "no meter readings": nothing partial
        store.load_meter_series("b1")


def test_hvac_telemetry_round_trip(store):
    from flexkit.hvac.features import write_hvac_csv
    from flexkit.synth import SyntheticScenario, apartment_telemetry

    samples, _ = apartment_telemetry(
        SyntheticScenario(1, "apartment_block", {"days": 1, "n_units": 1}), 0
    )
    store.add_asset(AssetRecord("h1", "hvac_unit", rated_power_kw=2.0))
    report = store.ingest_hvac_text(write_hvac_csv(samples), "h1")
    assert report.rows_stored == len(samples)
    loaded = store.load_hvac_samples("h1")
    assert len(loaded) == len(samples)
    assert loaded[0] == samples[0] and loaded[-1] == samples[-1]


def test_artifact_round_trip(store):
    doc = {"format": "x/1", "numbers": [1.5, 2.5], "nested": {"a": 1}}
    store.save_artifact("b1", "baselines", "2021-01", doc)
    assert store.load_artifact("b1", "baselines", "2021-01") == doc
    assert store.load_artifact("b1", "baselines", "2021-02") is None
    store.save_artifact("b1", "baselines", "2021-01", {"replaced": True})
    assert store.load_artifact("b1", "baselines", "2021-01") == {"replaced": True}
    assert store.list_artifacts("baselines") == [("b1", "2021-01", {"replaced": True})]


def test_contract_event_plan_actuals_round_trip(store):
    contract = {"occupant_id": "apt1", "max_flex_kw": 2.0, "active": True}
    store.save_contract(contract)
    assert store.list_contracts() == [contract]

    event_doc = {"event_id": "e1", "requested_power_kw": 5.0}
    transitions = [{"to": "received", "at": "2021-01-01T00:00:00Z"}]
    store.save_event("e1", event_doc, "received", transitions)
    doc, state, saved_transitions = store.load_event("e1")
    assert (doc, state, saved_transitions) == (event_doc, "received", transitions)

    plan = {"event_id": "e1", "delivered_power_kw": [[1.0, 2.0]]}
    store.save_plan("e1", plan)
    assert store.load_plan("e1") == plan

    assert store.save_actuals("e1", [("apt1", 0, 0.9), ("apt1", 1, 1.8)]) == 2
    assert store.load_actuals("e1") == [("apt1", 0, 0.9), ("apt1", 1, 1.8)]


def test_config_defaults_and_round_trip(store):
    assert store.get_config() == {"adjustment_fraction": 0.10, "included_assets": []}
    store.set_config({"adjustment_fraction": 0.05, "included_assets": ["b1"]})
    assert store.get_config()["adjustment_fraction"] == 0.05


def test_idempotency_cache(store):
    assert store.idempotency_get("k1") is None
    store.idempotency_put("k1", 201, {"ok": True})
    assert store.idempotency_get("k1") == (201, {"ok": True})
