"""HVAC telemetry: sample type, CSV interface, training-set preparation."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from datetime import datetime

import numpy as np

from ..errors import (
    IncompatibleIntervals,
    InsufficientOnTime,
    MalformedRow,
    NonUniformGrid,
)
from ..timeseries import (
    NormalizationSpec,
    apply_normalization,
    fit_normalization,
    format_timestamp,
    parse_timestamp,
)

STANDBY_POWER_W = 5.0
TEMP_BOUNDS_C = (-40.0, 60.0)

THERMAL_FEATURES = ("indoor_temp_c", "outdoor_temp_c", "hvac_state")
STATE_FEATURES = (
    "indoor_pred_c",
    "set_temp_c",
    "temp_diff_c",
    "prev_state",
    "outdoor_temp_c",
)


@dataclass(frozen=True)
class HvacSample:
    timestamp: datetime
    indoor_temp_c: float
    outdoor_temp_c: float
    hvac_power_w: float
    hvac_state: int
    set_temp_c: float

    def __post_init__(self):
        lo, hi = TEMP_BOUNDS_C
        for name in ("indoor_temp_c", "outdoor_temp_c", "set_temp_c"):
            t = getattr(self, name)
            if not (lo <= t <= hi):
                raise ValueError(f"{name}={t} outside physical bounds {TEMP_BOUNDS_C}")
        if self.hvac_power_w < 0:
            raise ValueError("hvac_power_w must be non-negative")
        if self.hvac_state not in (0, 1):
            raise ValueError("hvac_state must be 0 or 1")
        if self.hvac_state == 1 and self.hvac_power_w <= STANDBY_POWER_W:
            raise ValueError(
                f"state ON but power {self.hvac_power_w} W under standby threshold"
            )


@dataclass(frozen=True)
class SupervisedSplit:
    """Chronological train/test arrays for one model."""

    x_train: np.ndarray
    y_train: np.ndarray
    x_test: np.ndarray
    y_test: np.ndarray


@dataclass(frozen=True)
class TrainingSet:
    thermal: SupervisedSplit
    state: SupervisedSplit
    thermal_normalization: NormalizationSpec
    state_normalization: NormalizationSpec
    step_s: int
    n_steps: int
    on_steps: int
    mean_on_delta_c: float


def _split_chronological(x: np.ndarray, y: np.ndarray, train_fraction: float = 0.8):
    cut = int(round(len(x) * train_fraction))
    cut = min(max(cut, 1), len(x) - 1)
    return x[:cut], y[:cut], x[cut:], y[cut:]


def _normalized_split(x, y, method: str):
    x_tr, y_tr, x_te, y_te = _split_chronological(np.asarray(x, float), np.asarray(y, float))
    spec = fit_normalization(x_tr, method)
    return (
        SupervisedSplit(
            apply_normalization(x_tr, spec),
            y_tr,
            apply_normalization(x_te, spec),
            y_te,
        ),
        spec,
    )


def _session_spans(on_indices: np.ndarray, gap_steps: int) -> list[tuple[int, int]]:
    """Merge ON step indices into usage-session spans.

    Consecutive ON steps at most ``gap_steps`` apart belong to one
    session; the span includes the OFF cycling steps in between.
    """
    spans: list[tuple[int, int]] = []
    for i in on_indices:
        if spans and i - spans[-1][1] <= gap_steps:
            spans[-1] = (spans[-1][0], int(i))
        else:
            spans.append((int(i), int(i)))
    return spans


def prepare_training_set(
    samples: list[HvacSample],
    step_s: int,
    session_gap_s: int = 7200,
    min_on_steps: int = 100,
    normalization_method: str = "min_max",
) -> TrainingSet:
    """Resample telemetry and build both models' feature/target matrices.

    Thermal rows cover usage sessions only (ON steps plus the OFF cycling
    gaps between them, so the state coefficient stays identifiable):
    features (indoor, outdoor, state) at step i, target the indoor change
    to step i+1.  The state feature is the boundary-weighted ON duty of
    the step pair (see ``tri_duty`` below); binary rollout states are its
    endpoints.  State-classifier rows cover all steps: features (next
    indoor, set temp, their difference, current majority state, outdoor)
    at step i, target the majority state at i+1.  Both get a
    chronological 80/20 split -- never shuffled, autocorrelation would
    leak -- and per-feature normalization fit on the train part.
    """
    if len(samples) < 2:
        raise InsufficientOnTime("need at least 2 samples")
    epochs = np.array([int(s.timestamp.timestamp()) for s in samples], dtype=np.int64)
    deltas = np.diff(epochs)
    if (deltas <= 0).any():
        raise NonUniformGrid("samples not strictly time-ordered")
    src_s = int(deltas[0])
    if (deltas != src_s).any():
        raise NonUniformGrid("telemetry must be gap-free and uniform")
    if step_s < src_s or step_s % src_s != 0:
        raise IncompatibleIntervals(
            f"step {step_s}s must be a multiple of source resolution {src_s}s"
        )

    factor = step_s // src_s
    n = len(samples) // factor
    if n < 3:
        raise InsufficientOnTime(f"only {n} resampled steps")

    def window_mean(attr):
        a = np.array([getattr(s, attr) for s in samples], dtype=float)
        return a[: n * factor].reshape(n, factor).mean(axis=1)

    indoor = window_mean("indoor_temp_c")
    outdoor = window_mean("outdoor_temp_c")
    on_fraction = window_mean("hvac_state")
    state = (on_fraction >= 0.5).astype(float)
    # Setpoints are step functions; averaging a schedule change across a
    # window blurs exactly the transition rows a counterfactual rollout
    # depends on, so each window carries the setpoint in force at its end.
    set_all = np.array([s.set_temp_c for s in samples], dtype=float)
    set_temp = set_all[: n * factor].reshape(n, factor)[:, -1]

    # A mean-to-mean temperature delta integrates the ON signal over the
    # two windows it straddles with triangular weights peaking at their
    # boundary; that weighted duty is the exact state feature for the
    # thermal target.  It degenerates to the plain binary state both at
    # native resolution (factor 1) and in rollout, where the state is
    # constant across a step.
    raw_state = np.array([s.hvac_state for s in samples], dtype=float)[: n * factor]
    tri = (factor - np.abs(np.arange(2 * factor - 1) - (factor - 1))) / (factor * factor)
    tri_duty = np.array(
        [float(raw_state[i * factor:i * factor + 2 * factor - 1] @ tri) for i in range(n - 1)]
    )

    on_idx = np.flatnonzero(state == 1.0)
    on_steps = int(on_idx.size)
    if on_steps < min_on_steps:
        raise InsufficientOnTime(f"{on_steps} ON steps, need {min_on_steps}")

    thermal_rows = []
    thermal_targets = []
    session_gap_steps = max(1, session_gap_s // step_s)
    for a, b in _session_spans(on_idx, session_gap_steps):
        for i in range(a, b):  # i and i+1 both inside the session
            thermal_rows.append((indoor[i], outdoor[i], tri_duty[i]))
            thermal_targets.append(indoor[i + 1] - indoor[i])
    thermal_rows = np.asarray(thermal_rows, dtype=float)
    thermal_targets = np.asarray(thermal_targets, dtype=float)
    if len(thermal_rows) < 2:
        raise InsufficientOnTime("sessions too short for thermal targets")

    # The predicted step's state is governed by the setpoint in force
    # during that step, so features align on set_temp[i + 1].
    idx = np.arange(n - 1)
    state_rows = np.column_stack(
        [
            indoor[idx + 1],
            set_temp[idx + 1],
            indoor[idx + 1] - set_temp[idx + 1],
            state[idx],
            outdoor[idx],
        ]
    )
    state_targets = state[idx + 1]

    on_mask = thermal_rows[:, 2] == 1.0
    mean_on_delta = float(thermal_targets[on_mask].mean()) if on_mask.any() else 0.0

    thermal_split, thermal_norm = _normalized_split(
        thermal_rows, thermal_targets, normalization_method
    )
    state_split, state_norm = _normalized_split(
        state_rows, state_targets, normalization_method
    )
    return TrainingSet(
        thermal=thermal_split,
        state=state_split,
        thermal_normalization=thermal_norm,
        state_normalization=state_norm,
        step_s=step_s,
        n_steps=n,
        on_steps=on_steps,
        mean_on_delta_c=mean_on_delta,
    )


# -- telemetry CSV -------------------------------------------------------------

HVAC_CSV_HEADER = "timestamp,indoor_c,outdoor_c,power_w,state,set_temp_c"


def read_hvac_csv(text: str):
    """Parse HVAC telemetry CSV; bad rows are reported, not fatal.

    Returns (rows, errors) with rows as (line_number, HvacSample) pairs.
    """
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header is None or ",".join(h.strip() for h in header) != HVAC_CSV_HEADER:
        raise MalformedRow(f"expected header '{HVAC_CSV_HEADER}'")
    samples, errors = [], []
    for line_no, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        try:
            if len(row) != 6:
                raise ValueError(f"expected 6 fields, got {len(row)}")
            samples.append(
                (
                    line_no,
                    HvacSample(
                        timestamp=parse_timestamp(row[0]),
                        indoor_temp_c=float(row[1]),
                        outdoor_temp_c=float(row[2]),
                        hvac_power_w=float(row[3]),
                        hvac_state=int(row[4]),
                        set_temp_c=float(row[5]),
                    ),
                )
            )
        except (ValueError, OverflowError) as exc:
            errors.append((line_no, "MalformedRow", str(exc)))
    return samples, errors


def write_hvac_csv(samples: list[HvacSample]) -> str:
    out = io.StringIO()
    out.write(HVAC_CSV_HEADER + "\n")
    for s in samples:
        out.write(
            f"{format_timestamp(s.timestamp)},{s.indoor_temp_c:.3f},"
            f"{s.outdoor_temp_c:.3f},{s.hvac_power_w:.1f},{s.hvac_state:d},"
            f"{s.set_temp_c:.2f}\n"
        )
    return out.getvalue()
