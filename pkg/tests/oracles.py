"""Independent reference implementations used only to check the library.

Each oracle recomputes a result by a different route than the production
code (naive summation, brute-force search, hand-stepped recursion) so a
shared bug cannot hide.
"""

from __future__ import annotations

import cmath
import math
from datetime import datetime, timedelta, timezone

import numpy as np


def naive_dft(values) -> list[complex]:
    """O(n^2) textbook DFT, non-negative-frequency half spectrum."""
    n = len(values)
    out = []
    for k in range(n // 2 + 1):
        acc = 0j
        for j, x in enumerate(values):
            acc += x * cmath.exp(-2j * math.pi * k * j / n)
        out.append(acc)
    return out


def parseval_gap(values, half_spectrum) -> float:
    """Relative gap between time-domain and frequency-domain energy."""
    n = len(values)
    time_energy = sum(x * x for x in values)
    freq_energy = abs(half_spectrum[0]) ** 2
    for k in range(1, len(half_spectrum)):
        weight = 1.0 if (n % 2 == 0 and k == n // 2) else 2.0
        freq_energy += weight * abs(half_spectrum[k]) ** 2
    freq_energy /= n
    scale = max(time_energy, 1e-30)
    return abs(time_energy - freq_energy) / scale


def brute_dbscan(points, eps: float, min_points: int):
    """Textbook DBSCAN (Ester et al.) with pure-Python loops.

    Core test: closed eps-ball holds >= min_points points including the
    point itself.  Points are processed in ascending (coords, index)
    order, matching the library's documented tie-break.
    """
    pts = [tuple(float(c) for c in np.atleast_1d(p)) for p in points]
    n = len(pts)

    def dist(a, b):
        return math.sqrt(sum((x - y) ** 2 for x, y in zip(pts[a], pts[b])))

    def region_query(i):
        return [j for j in range(n) if dist(i, j) <= eps]

    labels = [None] * n
    order = sorted(range(n), key=lambda i: (pts[i], i))
    cluster = -1
    for start in order:
        if labels[start] is not None:
            continue
        seeds = region_query(start)
        if len(seeds) < min_points:
            labels[start] = -1
            continue
        cluster += 1
        labels[start] = cluster
        queue = [j for j in seeds if j != start]
        while queue:
            q = queue.pop(0)
            if labels[q] == -1:
                labels[q] = cluster
            if labels[q] is not None:
                continue
            labels[q] = cluster
            q_neighbors = region_query(q)
            if len(q_neighbors) >= min_points:
                queue.extend(q_neighbors)
        # noise relabeled later if reachable from another cluster
    return labels


def partition_sets(labels):
    """Cluster membership as a set of frozensets (noise kept separate)."""
    clusters = {}
    noise = set()
    for i, lab in enumerate(labels):
        if lab == -1:
            noise.add(i)
        else:
            clusters.setdefault(lab, set()).add(i)
    return {frozenset(v) for v in clusters.values()}, noise


def silhouette_direct(points, labels) -> float:
    """Straight per-point silhouette formula with explicit loops."""
    pts = [np.atleast_1d(np.asarray(p, dtype=float)) for p in points]
    ids = sorted({l for l in labels if l != -1})
    members = {cid: [i for i, l in enumerate(labels) if l == cid] for cid in ids}

    def dist(a, b):
        return float(np.sqrt(((pts[a] - pts[b]) ** 2).sum()))

    scores = []
    for cid in ids:
        for i in members[cid]:
            own = [j for j in members[cid] if j != i]
            if not own:
                scores.append(0.0)
                continue
            a = sum(dist(i, j) for j in own) / len(own)
            b = min(
                sum(dist(i, j) for j in members[other]) / len(members[other])
                for other in ids
                if other != cid
            )
            scores.append((b - a) / max(a, b))
    return sum(scores) / len(scores)


def kdist_elbow(points, k: int) -> float:
    """Hand recomputation of the k-distance max-distance-to-chord rule."""
    pts = [np.atleast_1d(np.asarray(p, dtype=float)) for p in points]
    n = len(pts)
    kds = []
    for i in range(n):
        ds = sorted(
            float(np.sqrt(((pts[i] - pts[j]) ** 2).sum())) for j in range(n) if j != i
        )
        kds.append(ds[k - 1])
    curve = sorted(kds, reverse=True)
    if curve[0] == curve[-1]:
        return curve[0]
    x0, y0, x1, y1 = 0.0, curve[0], float(len(curve) - 1), curve[-1]
    norm = math.hypot(x1 - x0, y1 - y0)
    best_i, best_d = 0, -1.0
    for i, y in enumerate(curve):
        d = abs((y1 - y0) * i - (x1 - x0) * y + x1 * y0 - y1 * x0) / norm
        if d > best_d:
            best_i, best_d = i, d
    return curve[best_i]


def linear_interp_oracle(values, is_gap):
    """Hand linear interpolation of interior gaps; boundary gaps trimmed."""
    present = [i for i, g in enumerate(is_gap) if not g]
    lo, hi = present[0], present[-1]
    out = []
    for i in range(lo, hi + 1):
        if not is_gap[i]:
            out.append(values[i])
            continue
        left = max(j for j in present if j < i)
        right = min(j for j in present if j > i)
        frac = (i - left) / (right - left)
        out.append(values[left] + (values[right] - values[left]) * frac)
    return out


def window_mean_oracle(values, factor):
    """Brute window averaging used to check resample(mean)."""
    n = len(values) // factor
    return [sum(values[i * factor:(i + 1) * factor]) / factor for i in range(n)]


def weekly_slot_oracle(ts: datetime, slots: int, interval_s: int) -> int:
    """Calendar-walking slot index: count intervals from the cycle anchor.

    The anchor is the most recent cycle boundary at or before ts, walking
    back hour by hour from the epoch (1970-01-01 was a Thursday).
    """
    anchor = datetime(1970, 1, 1, tzinfo=timezone.utc)
    walked = anchor
    steps = 0
    cycle = slots * interval_s
    # walk forward in whole cycles first to stay O(1)-ish
    total = int((ts - anchor).total_seconds())
    walked = anchor + timedelta(seconds=(total // cycle) * cycle)
    while walked + timedelta(seconds=interval_s) <= ts:
        walked += timedelta(seconds=interval_s)
        steps += 1
    return steps


class StubThermal:
    """Fixed temperature deltas by state; ignores temperatures."""

    def __init__(self, delta_on=-0.5, delta_off=0.3):
        self.delta_on = delta_on
        self.delta_off = delta_off

    def predict_delta(self, indoor, outdoor, state):
        return self.delta_on if state else self.delta_off


class StubThermostat:
    """Deterministic cooling hysteresis rule."""

    def __init__(self, band=0.5):
        self.band = band

    def predict_state(self, indoor_pred, set_temp, diff, prev_state, outdoor):
        if diff > self.band:
            return 1
        if diff < -self.band:
            return 0
        return prev_state


def hand_rollout(thermal, thermostat, indoor, state, set_temp, horizon,
                 step_s, rated_kw):
    """Hand-stepped alternation of the two stub models."""
    states = []
    t = indoor
    s = state
    for _ in range(horizon):
        t = t + (thermal.delta_on if s else thermal.delta_off)
        diff = t - set_temp
        if diff > thermostat.band:
            s = 1
        elif diff < -thermostat.band:
            s = 0
        states.append(s)
    energy = sum(states) * rated_kw * step_s / 3600.0
    return states, energy


def grid_search_objective(caps, request, resolution):
    """Smallest objective over a feasibility grid.

    Full product grid for up to 3 cells.  Beyond that the objective
    depends on the allocation only through its total, and every total in
    [0, sum(caps)] is feasible (cells are continuous), so scanning totals
    is an exhaustive search over objective values.
    """
    flat = [c for row in caps for c in row]
    if len(flat) <= 3:
        best = float("inf")
        grids = [np.arange(0.0, c + resolution / 2, resolution) for c in flat]
        mesh = np.meshgrid(*grids, indexing="ij") if grids else []
        total = sum(m for m in mesh)
        best = float(((request - total) ** 2).min())
        return best
    capacity = sum(flat)
    totals = np.arange(0.0, capacity + resolution / 2, resolution)
    return float(((request - totals) ** 2).min())
