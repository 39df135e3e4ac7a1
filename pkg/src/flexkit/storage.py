"""Embedded file-backed store for assets, telemetry, models, and events.

A single SQLite file gives desk-scale persistence with per-file
transactional ingestion (a crash mid-file leaves nothing behind) under a
single-writer/multi-reader contract; the service layer serializes
writers.  Model and baseline artifacts are stored as versioned JSON
documents so they stay readable across minor versions.
"""

from __future__ import annotations

import json
import sqlite3
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

from .errors import DuplicateTimestamp, InvalidParameters, UnknownAsset
from .hvac.features import HvacSample, read_hvac_csv
from .timeseries import MeterSeries, read_meter_csv, series_from_unit_rows, to_wh

SCHEMA = """
CREATE TABLE IF NOT EXISTS assets (
    asset_id TEXT PRIMARY KEY,
    kind TEXT NOT NULL,
    rated_power_kw REAL,
    location TEXT,
    contract_id TEXT
);
CREATE TABLE IF NOT EXISTS meter_readings (
    asset_id TEXT NOT NULL,
    ts INTEGER NOT NULL,
    value_wh REAL NOT NULL,
    PRIMARY KEY (asset_id, ts)
);
CREATE TABLE IF NOT EXISTS hvac_telemetry (
    asset_id TEXT NOT NULL,
    ts INTEGER NOT NULL,
    indoor_c REAL NOT NULL,
    outdoor_c REAL NOT NULL,
    power_w REAL NOT NULL,
    state INTEGER NOT NULL,
    set_temp_c REAL NOT NULL,
    PRIMARY KEY (asset_id, ts)
);
CREATE TABLE IF NOT EXISTS artifacts (
    asset_id TEXT NOT NULL,
    kind TEXT NOT NULL,
    key TEXT NOT NULL,
    doc TEXT NOT NULL,
    created_ts INTEGER NOT NULL,
    PRIMARY KEY (asset_id, kind, key)
);
CREATE TABLE IF NOT EXISTS contracts (
    occupant_id TEXT PRIMARY KEY,
    doc TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS events (
    event_id TEXT PRIMARY KEY,
    doc TEXT NOT NULL,
    state TEXT NOT NULL,
    transitions TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS plans (
    event_id TEXT PRIMARY KEY,
    doc TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS actuals (
    event_id TEXT NOT NULL,
    occupant_id TEXT NOT NULL,
    step INTEGER NOT NULL,
    actual_kw REAL NOT NULL,
    PRIMARY KEY (event_id, occupant_id, step)
);
CREATE TABLE IF NOT EXISTS vpp_config (
    id INTEGER PRIMARY KEY CHECK (id = 1),
    doc TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS idempotency (
    key TEXT PRIMARY KEY,
    status INTEGER NOT NULL,
    body TEXT NOT NULL
);
"""

ASSET_KINDS = ("building_meter", "hvac_unit")


@dataclass(frozen=True)
class AssetRecord:
    asset_id: str
    kind: str
    rated_power_kw: float | None = None
    location: str = ""
    contract_id: str | None = None

    def __post_init__(self):
        if self.kind not in ASSET_KINDS:
            raise InvalidParameters(f"kind must be one of {ASSET_KINDS}")
        if self.kind == "hvac_unit" and not (self.rated_power_kw or 0) > 0:
            raise InvalidParameters("hvac assets need rated_power_kw > 0")


@dataclass(frozen=True)
class IngestReport:
    rows_stored: int
    errors: tuple[tuple[int, str, str], ...]  # (line, code, message)


class Store:
    """Single-file store; writer calls must be externally serialized."""

    def __init__(self, path: str | Path):
        self.path = str(path)
        Path(self.path).parent.mkdir(parents=True, exist_ok=True)
        self._db = sqlite3.connect(self.path, check_same_thread=False)
        self._db.executescript(SCHEMA)
        self._db.commit()

    def close(self):
        self._db.close()

    # -- assets ---------------------------------------------------------------

    def add_asset(self, asset: AssetRecord) -> bool:
        cur = self._db.execute(
            "INSERT OR IGNORE INTO assets VALUES (?, ?, ?, ?, ?)",
            (asset.asset_id, asset.kind, asset.rated_power_kw, asset.location, asset.contract_id),
        )
        self._db.commit()
        return cur.rowcount == 1

    def get_asset(self, asset_id: str) -> AssetRecord:
        row = self._db.execute(
            "SELECT asset_id, kind, rated_power_kw, location, contract_id "
            "FROM assets WHERE asset_id = ?",
            (asset_id,),
        ).fetchone()
        if row is None:
            raise UnknownAsset(asset_id)
        return AssetRecord(*row)

    def list_assets(self) -> list[AssetRecord]:
        rows = self._db.execute(
            "SELECT asset_id, kind, rated_power_kw, location, contract_id "
            "FROM assets ORDER BY asset_id"
        ).fetchall()
        return [AssetRecord(*r) for r in rows]

    # -- ingestion ------------------------------------------------------------

    def ingest_csv(self, path: str | Path, asset_id: str) -> IngestReport:
        """Ingest a telemetry file for an asset, dispatching on its kind.

        Valid rows are appended in one transaction (atomic per file);
        duplicate timestamps and malformed rows are reported per row and
        never abort the rest of the file.
        """
        asset = self.get_asset(asset_id)
        text = Path(path).read_text()
        if asset.kind == "building_meter":
            return self.ingest_meter_text(text, asset_id)
        return self.ingest_hvac_text(text, asset_id)

    def ingest_meter_text(self, text: str, asset_id: str) -> IngestReport:
        self.get_asset(asset_id)
        rows, errors = read_meter_csv(text)
        errors = list(errors)
        stored = 0
        # Interval inference needs the whole file; W/kW rows convert
        # against the file's grid when present, else fall back to 1 h.
        interval = 3600
        if len(rows) >= 2:
            try:
                interval = series_from_unit_rows(
                    [(ts, v, u) for _, ts, v, u in rows]
                ).sampling_interval_s
            except Exception:
                pass
        with self._db:  # one transaction: crash mid-file leaves no rows
            for line_no, ts, value, unit in rows:
                if value < 0:
                    errors.append((line_no, "NegativeReading", f"value {value}"))
                    continue
                cur = self._db.execute(
                    "INSERT OR IGNORE INTO meter_readings VALUES (?, ?, ?)",
                    (asset_id, int(ts.timestamp()), to_wh(value, unit, interval)),
                )
                if cur.rowcount == 0:
                    errors.append((line_no, "DuplicateTimestamp", ts.isoformat()))
                else:
                    stored += 1
        return IngestReport(stored, tuple(errors))

    def ingest_hvac_text(self, text: str, asset_id: str) -> IngestReport:
        self.get_asset(asset_id)
        samples, errors = read_hvac_csv(text)
        errors = list(errors)
        stored = 0
        with self._db:
            for line_no, s in samples:
                cur = self._db.execute(
                    "INSERT OR IGNORE INTO hvac_telemetry VALUES (?, ?, ?, ?, ?, ?, ?)",
                    (
                        asset_id,
                        int(s.timestamp.timestamp()),
                        s.indoor_temp_c,
                        s.outdoor_temp_c,
                        s.hvac_power_w,
                        s.hvac_state,
                        s.set_temp_c,
                    ),
                )
                if cur.rowcount == 0:
                    errors.append((line_no, "DuplicateTimestamp", s.timestamp.isoformat()))
                else:
                    stored += 1
        return IngestReport(stored, tuple(errors))

    def load_meter_series(self, asset_id: str) -> MeterSeries:
        self.get_asset(asset_id)
        rows = self._db.execute(
            "SELECT ts, value_wh FROM meter_readings WHERE asset_id = ? ORDER BY ts",
            (asset_id,),
        ).fetchall()
        if not rows:
            raise UnknownAsset(f"no meter readings for {asset_id}")
        raw = [(datetime.fromtimestamp(ts, tz=timezone.utc), v) for ts, v in rows]
        return series_from_unit_rows([(ts, v, "Wh") for ts, v in raw])

    def load_hvac_samples(self, asset_id: str) -> list[HvacSample]:
        self.get_asset(asset_id)
        rows = self._db.execute(
            "SELECT ts, indoor_c, outdoor_c, power_w, state, set_temp_c "
            "FROM hvac_telemetry WHERE asset_id = ? ORDER BY ts",
            (asset_id,),
        ).fetchall()
        if not rows:
            raise UnknownAsset(f"no telemetry for {asset_id}")
        return [
            HvacSample(
                timestamp=datetime.fromtimestamp(r[0], tz=timezone.utc),
                indoor_temp_c=r[1],
                outdoor_temp_c=r[2],
                hvac_power_w=r[3],
                hvac_state=int(r[4]),
                set_temp_c=r[5],
            )
            for r in rows
        ]

    # -- artifacts (models, baselines, bands) ----------------------------------

    def save_artifact(self, asset_id: str, kind: str, key: str, doc: dict):
        self._db.execute(
            "INSERT OR REPLACE INTO artifacts VALUES (?, ?, ?, ?, ?)",
            (
                asset_id,
                kind,
                key,
                json.dumps(doc, sort_keys=True),
                int(datetime.now(tz=timezone.utc).timestamp()),
            ),
        )
        self._db.commit()

    def load_artifact(self, asset_id: str, kind: str, key: str) -> dict | None:
        row = self._db.execute(
            "SELECT doc FROM artifacts WHERE asset_id = ? AND kind = ? AND key = ?",
            (asset_id, kind, key),
        ).fetchone()
        return json.loads(row[0]) if row else None

    def list_artifacts(self, kind: str) -> list[tuple[str, str, dict]]:
        rows = self._db.execute(
            "SELECT asset_id, key, doc FROM artifacts WHERE kind = ? ORDER BY asset_id, key",
            (kind,),
        ).fetchall()
        return [(a, k, json.loads(d)) for a, k, d in rows]

    # -- contracts -------------------------------------------------------------

    def save_contract(self, doc: dict):
        if "occupant_id" not in doc:
            raise InvalidParameters("contract needs occupant_id")
        self._db.execute(
            "INSERT OR REPLACE INTO contracts VALUES (?, ?)",
            (doc["occupant_id"], json.dumps(doc, sort_keys=True)),
        )
        self._db.commit()

    def list_contracts(self) -> list[dict]:
        rows = self._db.execute("SELECT doc FROM contracts ORDER BY occupant_id").fetchall()
        return [json.loads(r[0]) for r in rows]

    # -- events / plans / actuals ----------------------------------------------

    def save_event(self, event_id: str, doc: dict, state: str, transitions: list[dict]):
        self._db.execute(
            "INSERT OR REPLACE INTO events VALUES (?, ?, ?, ?)",
            (event_id, json.dumps(doc, sort_keys=True), state, json.dumps(transitions)),
        )
        self._db.commit()

    def load_event(self, event_id: str):
        row = self._db.execute(
            "SELECT doc, state, transitions FROM events WHERE event_id = ?",
            (event_id,),
        ).fetchone()
        if row is None:
            return None
        return json.loads(row[0]), row[1], json.loads(row[2])

    def list_events(self) -> list[tuple[str, dict, str]]:
        rows = self._db.execute(
            "SELECT event_id, doc, state FROM events ORDER BY event_id"
        ).fetchall()
        return [(r[0], json.loads(r[1]), r[2]) for r in rows]

    def save_plan(self, event_id: str, doc: dict):
        self._db.execute(
            "INSERT OR REPLACE INTO plans VALUES (?, ?)",
            (event_id, json.dumps(doc, sort_keys=True)),
        )
        self._db.commit()

    def load_plan(self, event_id: str) -> dict | None:
        row = self._db.execute(
            "SELECT doc FROM plans WHERE event_id = ?", (event_id,)
        ).fetchone()
        return json.loads(row[0]) if row else None

    def save_actuals(self, event_id: str, readings: list[tuple[str, int, float]]) -> int:
        stored = 0
        with self._db:
            for occupant_id, step, kw in readings:
                cur = self._db.execute(
                    "INSERT OR REPLACE INTO actuals VALUES (?, ?, ?, ?)",
                    (event_id, occupant_id, step, kw),
                )
                stored += cur.rowcount
        return stored

    def load_actuals(self, event_id: str) -> list[tuple[str, int, float]]:
        rows = self._db.execute(
            "SELECT occupant_id, step, actual_kw FROM actuals "
            "WHERE event_id = ? ORDER BY occupant_id, step",
            (event_id,),
        ).fetchall()
        return [(r[0], int(r[1]), r[2]) for r in rows]

    # -- VPP config & idempotency ------------------------------------------------

    def get_config(self) -> dict:
        row = self._db.execute("SELECT doc FROM vpp_config WHERE id = 1").fetchone()
        if row is None:
            return {"adjustment_fraction": 0.10, "included_assets": []}
        return json.loads(row[0])

    def set_config(self, doc: dict):
        self._db.execute(
            "INSERT OR REPLACE INTO vpp_config VALUES (1, ?)",
            (json.dumps(doc, sort_keys=True),),
        )
        self._db.commit()

    def idempotency_get(self, key: str):
        row = self._db.execute(
            "SELECT status, body FROM idempotency WHERE key = ?", (key,)
        ).fetchone()
        return (row[0], json.loads(row[1])) if row else None

    def idempotency_put(self, key: str, status: int, body: dict):
        self._db.execute(
            "INSERT OR REPLACE INTO idempotency VALUES (?, ?, ?)",
            (key, status, json.dumps(body)),
        )
        self._db.commit()
