"""Canonical metered time series: validation, resampling, gap handling.

All analytics in this package consume :class:`MeterSeries` values: a uniform
UTC grid of non-negative energy readings in Wh per interval.  Raw meter
exports (possibly in kWh/W/kW, with jitter and holes) are turned into that
canonical form by :func:`validate_series`.
"""

from __future__ import annotations

import csv
import io
from collections import Counter
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone

import numpy as np

from .errors import (
    AllGaps,
    EmptyInput,
    IncompatibleIntervals,
    MalformedRow,
    NegativeReading,
    NonUniformGrid,
    UpsampleRequested,
)

UNITS = ("Wh", "kWh", "W", "kW")

# Fraction of consecutive-timestamp deltas the modal interval must explain
# (as an exact multiple) for the grid to count as uniform.
UNIFORMITY_THRESHOLD = 0.95


def _to_epoch(ts: datetime) -> int:
    if ts.tzinfo is None:
        raise ValueError("naive timestamp; all timestamps must be UTC-aware")
    return int(ts.timestamp())


def _from_epoch(epoch: int) -> datetime:
    return datetime.fromtimestamp(epoch, tz=timezone.utc)


def to_wh(value: float, unit: str, interval_s: int) -> float:
    """Convert one reading to Wh-per-interval given the grid interval."""
    if unit == "Wh":
        return value
    if unit == "kWh":
        return value * 1000.0
    if unit == "W":
        return value * interval_s / 3600.0
    if unit == "kW":
        return value * 1000.0 * interval_s / 3600.0
    raise MalformedRow(f"unknown unit {unit!r}")


@dataclass(frozen=True)
class MeterSeries:
    """Uniformly sampled energy series in Wh per interval.

    ``gaps`` lists [start, end] index ranges (inclusive) of missing grid
    points; the ``values`` entries there are 0.0 placeholders and carry no
    meaning.  Instances are immutable and safe to share across threads.
    """

    start_time: datetime
    sampling_interval_s: int
    values: tuple[float, ...]
    unit: str = "Wh"
    gaps: tuple[tuple[int, int], ...] = ()

    def __post_init__(self):
        if self.sampling_interval_s <= 0:
            raise ValueError("sampling_interval_s must be positive")
        if self.unit not in UNITS:
            raise ValueError(f"unit must be one of {UNITS}")
        prev_end = -1
        for lo, hi in self.gaps:
            if lo > hi or lo <= prev_end:
                raise ValueError("gap ranges must be sorted and disjoint")
            if lo < 0 or hi >= len(self.values):
                raise ValueError("gap range out of bounds")
            prev_end = hi

    def __len__(self) -> int:
        return len(self.values)

    @property
    def sampling_frequency_hz(self) -> float:
        return 1.0 / self.sampling_interval_s

    def timestamp_at(self, index: int) -> datetime:
        return _from_epoch(_to_epoch(self.start_time) + index * self.sampling_interval_s)

    def gap_indices(self) -> set[int]:
        out: set[int] = set()
        for lo, hi in self.gaps:
            out.update(range(lo, hi + 1))
        return out

    def gap_fraction(self) -> float:
        if not self.values:
            return 0.0
        return len(self.gap_indices()) / len(self.values)

    def rows(self):
        """Yield (timestamp, value) for every non-gap grid point."""
        holes = self.gap_indices()
        for i, v in enumerate(self.values):
            if i not in holes:
                yield self.timestamp_at(i), v


def _ranges_from_indices(indices: list[int]) -> tuple[tuple[int, int], ...]:
    """Collapse a sorted index list into inclusive [start, end] ranges."""
    ranges: list[tuple[int, int]] = []
    for i in indices:
        if ranges and i == ranges[-1][1] + 1:
            ranges[-1] = (ranges[-1][0], i)
        else:
            ranges.append((i, i))
    return tuple(ranges)


def validate_series(
    raw: list[tuple[datetime, float]],
    unit: str = "Wh",
) -> MeterSeries:
    """Build a canonical :class:`MeterSeries` from raw (timestamp, value) rows.

    The grid interval is the modal timestamp delta (ties broken toward the
    larger delta, which implies the fewest phantom holes).  The grid counts
    as uniform when that interval explains at least 95% of deltas as exact
    multiples; missing grid points become gaps, off-grid rows are dropped.
    Values are converted to Wh per interval after the interval is known.

    Raises: EmptyInput, NegativeReading, NonUniformGrid.
    """
    if not raw:
        raise EmptyInput("no rows")
    for ts, value in raw:
        if not np.isfinite(value):
            raise NegativeReading(f"non-finite reading at {ts.isoformat()}")
        if value < 0:
            raise NegativeReading(f"negative reading {value} at {ts.isoformat()}")

    epochs = [_to_epoch(ts) for ts, _ in raw]
    for a, b in zip(epochs, epochs[1:]):
        if b <= a:
            raise NonUniformGrid("timestamps not strictly increasing")

    if len(raw) == 1:
        # A single reading defines no interval; treat as hourly by convention.
        value = to_wh(raw[0][1], unit, 3600)
        return MeterSeries(raw[0][0], 3600, (value,), "Wh")

    deltas = [b - a for a, b in zip(epochs, epochs[1:])]
    counts = Counter(deltas)
    top = max(counts.values())
    interval = max(d for d, c in counts.items() if c == top)

    explained = sum(1 for d in deltas if d % interval == 0)
    if explained / len(deltas) < UNIFORMITY_THRESHOLD:
        raise NonUniformGrid(
            f"interval {interval}s explains {explained}/{len(deltas)} deltas"
        )

    start = epochs[0]
    n = (epochs[-1] - start) // interval + 1
    values = [0.0] * n
    seen = [False] * n
    for epoch, (_, value) in zip(epochs, raw):
        offset = epoch - start
        if offset % interval != 0:
            continue  # off-grid row: rejected
        k = offset // interval
        values[k] = to_wh(value, unit, interval)
        seen[k] = True

    gaps = _ranges_from_indices([i for i, ok in enumerate(seen) if not ok])
    return MeterSeries(_from_epoch(start), interval, tuple(values), "Wh", gaps)


def resample(series: MeterSeries, target_interval_s: int, mode: str = "sum") -> MeterSeries:
    """Down-sample to a coarser grid; mode is one of sum/mean/last.

    Only complete windows are emitted (a trailing partial window is
    dropped), so ``sum`` conserves total energy over the emitted span.
    Any window touching a gap index becomes a gap in the output.
    """
    if mode not in ("sum", "mean", "last"):
        raise ValueError(f"unknown resample mode {mode!r}")
    if target_interval_s < series.sampling_interval_s:
        raise UpsampleRequested(
            f"{target_interval_s}s is finer than source {series.sampling_interval_s}s"
        )
    if target_interval_s % series.sampling_interval_s != 0:
        raise IncompatibleIntervals(
            f"{target_interval_s}s is not a multiple of {series.sampling_interval_s}s"
        )

    factor = target_interval_s // series.sampling_interval_s
    if factor == 1:
        return series

    n_out = len(series) // factor
    holes = series.gap_indices()
    values: list[float] = []
    out_gaps: list[int] = []
    for w in range(n_out):
        window = series.values[w * factor:(w + 1) * factor]
        if any(i in holes for i in range(w * factor, (w + 1) * factor)):
            values.append(0.0)
            out_gaps.append(w)
        elif mode == "sum":
            values.append(float(sum(window)))
        elif mode == "mean":
            values.append(float(sum(window)) / factor)
        else:
            values.append(window[-1])

    return MeterSeries(
        series.start_time,
        target_interval_s,
        tuple(values),
        series.unit,
        _ranges_from_indices(out_gaps),
    )


def fill_gaps(series: MeterSeries, policy: str = "drop_segment") -> MeterSeries:
    """Return a gap-free series per the chosen policy.

    ``drop_segment`` keeps the longest contiguous gap-free run (earliest on
    ties) -- the safe choice for model training.  ``linear_interp`` fills
    interior gaps linearly and trims leading/trailing gaps; intended for
    baseline analytics only.
    """
    if policy not in ("drop_segment", "linear_interp"):
        raise ValueError(f"unknown gap policy {policy!r}")
    if not series.gaps:
        return series

    holes = series.gap_indices()
    if len(holes) == len(series):
        raise AllGaps("every grid point is missing")

    if policy == "drop_segment":
        best_lo, best_len = 0, 0
        lo = None
        for i in range(len(series) + 1):
            if i < len(series) and i not in holes:
                if lo is None:
                    lo = i
            elif lo is not None:
                if i - lo > best_len:
                    best_lo, best_len = lo, i - lo
                lo = None
        segment = series.values[best_lo:best_lo + best_len]
        return MeterSeries(
            series.timestamp_at(best_lo),
            series.sampling_interval_s,
            tuple(segment),
            series.unit,
        )

    # linear_interp: trim boundary gaps, then interpolate interior ones.
    present = [i for i in range(len(series)) if i not in holes]
    lo, hi = present[0], present[-1]
    values = list(series.values[lo:hi + 1])
    interior = sorted(i - lo for i in holes if lo < i < hi)
    for run in _ranges_from_indices(interior):
        a, b = run[0] - 1, run[1] + 1
        span = b - a
        for j in range(run[0], run[1] + 1):
            values[j] = values[a] + (values[b] - values[a]) * (j - a) / span
    return MeterSeries(
        series.timestamp_at(lo),
        series.sampling_interval_s,
        tuple(values),
        series.unit,
    )


def slice_month(series: MeterSeries, month: str) -> MeterSeries:
    """Extract the sub-series falling inside a UTC calendar month (YYYY-MM)."""
    year, mon = month.split("-")
    m_start = datetime(int(year), int(mon), 1, tzinfo=timezone.utc)
    if int(mon) == 12:
        m_end = datetime(int(year) + 1, 1, 1, tzinfo=timezone.utc)
    else:
        m_end = datetime(int(year), int(mon) + 1, 1, tzinfo=timezone.utc)

    start_epoch = _to_epoch(series.start_time)
    step = series.sampling_interval_s
    lo_e, hi_e = _to_epoch(m_start), _to_epoch(m_end)
    first = max(0, -(-(lo_e - start_epoch) // step))  # ceil division
    last = min(len(series), (hi_e - start_epoch + step - 1) // step)
    if first >= last:
        raise EmptyInput(f"series does not cover {month}")

    holes = series.gap_indices()
    gaps = _ranges_from_indices(sorted(i - first for i in holes if first <= i < last))
    return MeterSeries(
        series.timestamp_at(first),
        step,
        series.values[first:last],
        series.unit,
        gaps,
    )


# -- normalization ------------------------------------------------------------

@dataclass(frozen=True)
class NormalizationSpec:
    """Per-feature affine normalization: z = (x - offset) / scale."""

    method: str  # min_max | z_score
    per_feature_params: tuple[tuple[float, float], ...]

    def __post_init__(self):
        if self.method not in ("min_max", "z_score"):
            raise ValueError(f"unknown normalization method {self.method!r}")
        for _, scale in self.per_feature_params:
            if scale == 0:
                raise ValueError("zero scale breaks invertibility")


def fit_normalization(x: np.ndarray, method: str = "min_max") -> NormalizationSpec:
    """Fit per-column normalization parameters on a 2-D feature matrix.

    Constant columns get scale 1.0 so the round-trip stays exact.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 2:
        raise ValueError("expected a 2-D feature matrix")
    params = []
    for j in range(x.shape[1]):
        col = x[:, j]
        if method == "min_max":
            offset, scale = float(col.min()), float(col.max() - col.min())
        elif method == "z_score":
            offset, scale = float(col.mean()), float(col.std())
        else:
            raise ValueError(f"unknown normalization method {method!r}")
        if scale == 0.0:
            scale = 1.0
        params.append((offset, scale))
    return NormalizationSpec(method, tuple(params))


def apply_normalization(x: np.ndarray, spec: NormalizationSpec) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    offsets = np.array([p[0] for p in spec.per_feature_params])
    scales = np.array([p[1] for p in spec.per_feature_params])
    return (x - offsets) / scales


def invert_normalization(z: np.ndarray, spec: NormalizationSpec) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    offsets = np.array([p[0] for p in spec.per_feature_params])
    scales = np.array([p[1] for p in spec.per_feature_params])
    return z * scales + offsets


# -- CSV interface ------------------------------------------------------------

TIME_FORMAT = "%Y-%m-%dT%H:%M:%SZ"


def format_timestamp(ts: datetime) -> str:
    return ts.astimezone(timezone.utc).strftime(TIME_FORMAT)


def parse_timestamp(text: str) -> datetime:
    """Parse an RFC 3339 UTC timestamp ('Z' or explicit offset)."""
    cleaned = text.strip()
    if cleaned.endswith("Z"):
        cleaned = cleaned[:-1] + "+00:00"
    ts = datetime.fromisoformat(cleaned)
    if ts.tzinfo is None:
        raise ValueError("timestamp lacks a timezone")
    return ts.astimezone(timezone.utc)


def read_meter_csv(text: str):
    """Parse the `timestamp,value,unit` meter format.

    Returns (rows, errors): rows are (line_number, timestamp,
    value_in_declared_unit, unit) tuples; errors are (line_number, code,
    message) for rows that failed to parse.  Bad rows never abort the
    whole file.
    """
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header is None or [h.strip() for h in header] != ["timestamp", "value", "unit"]:
        raise MalformedRow("expected header 'timestamp,value,unit'")
    rows, errors = [], []
    for line_no, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        try:
            if len(row) != 3:
                raise ValueError(f"expected 3 fields, got {len(row)}")
            ts = parse_timestamp(row[0])
            value = float(row[1])
            unit = row[2].strip()
            if unit not in UNITS:
                raise ValueError(f"unknown unit {unit!r}")
            rows.append((line_no, ts, value, unit))
        except (ValueError, OverflowError) as exc:
            errors.append((line_no, "MalformedRow", str(exc)))
    return rows, errors


def write_meter_csv(series: MeterSeries) -> str:
    """Serialize a series back to the canonical CSV format (Wh rows)."""
    out = io.StringIO()
    out.write("timestamp,value,unit\n")
    for ts, value in series.rows():
        out.write(f"{format_timestamp(ts)},{value:.3f},Wh\n")
    return out.getvalue()


def series_from_unit_rows(rows: list[tuple[datetime, float, str]]) -> MeterSeries:
    """Validate rows that carry a per-row unit (the CSV ingestion shape)."""
    if not rows:
        raise EmptyInput("no rows")
    units = {u for _, _, u in rows}
    if len(units) == 1:
        return validate_series([(ts, v) for ts, v, _ in rows], unit=units.pop())
    # Mixed units: infer the grid from a Wh pass-through, then convert.
    probe = validate_series([(ts, 0.0) for ts, v, _ in rows])
    interval = probe.sampling_interval_s
    converted = [(ts, to_wh(v, u, interval)) for ts, v, u in rows]
    return validate_series(converted)
