"""Consumption baselines and flexibility bands via density clustering.

Per detected cycle slot, the month's readings are clustered with DBSCAN;
low-consumption clusters (essential devices) and noise points (spikes)
are excluded, and the survivors bound the min/medium/max baselines that
a flexibility band is derived from.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    EmptyAfterExclusion,
    FractionOutOfRange,
    InsufficientCycles,
    TooFewPoints,
    UndefinedScore,
)
from .spectral import SegmentationRule
from .timeseries import MeterSeries

MAX_ADJUSTMENT_FRACTION = 0.10
NOISE = -1


@dataclass(frozen=True)
class DbscanParams:
    """Neighborhood radius (Wh) and minimum neighborhood size."""

    epsilon_wh: float
    min_points: int

    def __post_init__(self):
        if self.epsilon_wh <= 0:
            raise ValueError("epsilon_wh must be positive")
        if self.min_points < 2:
            raise ValueError("min_points must be >= 2")


@dataclass(frozen=True)
class ClusterStats:
    size: int
    min_wh: float
    mean_wh: float
    max_wh: float


@dataclass(frozen=True)
class ClusterAssignment:
    """Labels per input point; -1 marks noise/outliers.

    Stats are computed over the last coordinate, which is the consumption
    value in both supported layouts (1-D values, 2-D (slot, value)).
    """

    labels: tuple[int, ...]
    cluster_stats: dict[int, ClusterStats]

    def n_clusters(self) -> int:
        return len(self.cluster_stats)

    def noise_count(self) -> int:
        return sum(1 for l in self.labels if l == NOISE)


@dataclass(frozen=True)
class SlotBaseline:
    slot: int
    min_wh: float
    medium_wh: float
    max_wh: float
    fallback: bool = False


@dataclass(frozen=True)
class BaselineSet:
    """Per-slot consumption bounds for one (asset, month)."""

    month: str
    slots_per_cycle: int
    slots: tuple[SlotBaseline, ...]
    excluded_low_clusters: tuple[tuple[int, int], ...]  # (slot, cluster_id)
    outlier_count: int
    medium_method: str = "median"

    def __post_init__(self):
        for s in self.slots:
            if not (0 <= s.min_wh <= s.medium_wh <= s.max_wh):
                raise ValueError(f"slot {s.slot}: baselines must satisfy 0 <= min <= medium <= max")


@dataclass(frozen=True)
class FlexibilityBand:
    direction: str  # upward | downward
    available_flex_wh: tuple[float, ...]
    adjustment_fraction: float


def _as_points(points) -> np.ndarray:
    x = np.asarray(points, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2 or x.size == 0:
        raise ValueError("points must be a non-empty list of equal-length vectors")
    if not np.isfinite(x).all():
        raise ValueError("point coordinates must be finite")
    return x


def _processing_order(x: np.ndarray) -> list[int]:
    # Ascending (coordinates, original index): fixes border-point ties so
    # labels are reproducible and permutation-invariant up to relabeling.
    return sorted(range(len(x)), key=lambda i: (tuple(x[i]), i))


def dbscan(points, params: DbscanParams) -> ClusterAssignment:
    """Textbook DBSCAN over Euclidean distance.

    A point is core when the closed epsilon-ball around it holds at least
    ``min_points`` points (itself included).  Border points join the first
    core cluster that reaches them in the deterministic processing order.
    Degenerate inputs simply come out all-noise.
    """
    x = _as_points(points)
    n = len(x)

    # Pairwise neighborhoods; n is small (points per slot per month).
    diff = x[:, None, :] - x[None, :, :]
    dist = np.sqrt((diff ** 2).sum(axis=2))
    neighbor_sets = [np.flatnonzero(dist[i] <= params.epsilon_wh) for i in range(n)]
    is_core = np.array([len(nb) >= params.min_points for nb in neighbor_sets])

    # Expansion order within a cluster cannot change any label; the outer
    # processing order alone decides which cluster claims a contested
    # border point, and it is fixed by _processing_order.
    order = _processing_order(x)
    labels = np.full(n, NOISE, dtype=int)
    visited = np.zeros(n, dtype=bool)
    next_id = 0
    for start in order:
        if visited[start] or not is_core[start]:
            continue
        cluster = next_id
        next_id += 1
        queue = [start]
        visited[start] = True
        labels[start] = cluster
        while queue:
            p = queue.pop()
            if not is_core[p]:
                continue
            for q in neighbor_sets[p]:
                if labels[q] == NOISE:
                    labels[q] = cluster
                if not visited[q]:
                    visited[q] = True
                    queue.append(q)

    stats: dict[int, ClusterStats] = {}
    values = x[:, -1]
    for cid in range(next_id):
        members = values[labels == cid]
        stats[cid] = ClusterStats(
            size=int(members.size),
            min_wh=float(members.min()),
            mean_wh=float(members.mean()),
            max_wh=float(members.max()),
        )
    return ClusterAssignment(tuple(int(l) for l in labels), stats)


def tune_epsilon(points, k: int) -> float:
    """Pick epsilon from the sorted k-distance curve by the elbow rule.

    Computes every point's distance to its k-th nearest neighbor (self
    excluded), sorts descending, and returns the value at the point of
    maximum distance to the chord between the curve's endpoints.  A flat
    curve degenerates to its common value.
    """
    x = _as_points(points)
    n = len(x)
    if n < k + 1:
        raise TooFewPoints(f"need at least {k + 1} points for k={k}")

    diff = x[:, None, :] - x[None, :, :]
    dist = np.sqrt((diff ** 2).sum(axis=2))
    np.fill_diagonal(dist, np.inf)
    kth = np.sort(dist, axis=1)[:, k - 1]
    curve = np.sort(kth)[::-1]

    m = len(curve)
    if m == 1 or curve[0] == curve[-1]:
        return float(curve[0])

    # Distance from each curve point to the chord (0, y0) -> (m-1, y_last).
    x0, y0 = 0.0, curve[0]
    x1, y1 = float(m - 1), curve[-1]
    norm = np.hypot(x1 - x0, y1 - y0)
    idx = np.arange(m, dtype=float)
    d = np.abs((y1 - y0) * idx - (x1 - x0) * curve + x1 * y0 - y1 * x0) / norm
    return float(curve[int(np.argmax(d))])


def silhouette(points, assignment: ClusterAssignment) -> float:
    """Mean silhouette score over clustered (non-noise) points.

    s(i) = (b - a) / max(a, b) with a the mean intra-cluster distance and
    b the smallest mean distance to another cluster; singleton clusters
    contribute 0.  Needs at least two non-noise clusters.
    """
    x = _as_points(points)
    labels = np.asarray(assignment.labels)
    if len(labels) != len(x):
        raise ValueError("labels length must match point count")

    cluster_ids = sorted(set(labels[labels != NOISE]))
    if len(cluster_ids) < 2:
        raise UndefinedScore("silhouette needs at least 2 clusters")

    diff = x[:, None, :] - x[None, :, :]
    dist = np.sqrt((diff ** 2).sum(axis=2))
    members = {cid: np.flatnonzero(labels == cid) for cid in cluster_ids}

    scores = []
    for cid in cluster_ids:
        own = members[cid]
        for i in own:
            if len(own) == 1:
                scores.append(0.0)
                continue
            a = dist[i, own].sum() / (len(own) - 1)
            b = min(dist[i, members[other]].mean() for other in cluster_ids if other != cid)
            scores.append((b - a) / max(a, b))
    return float(np.mean(scores))


def derive_baselines(
    series: MeterSeries,
    segmentation: SegmentationRule,
    params: DbscanParams,
    low_load_floor_wh: float,
    medium_method: str = "median",
    month: str = "",
) -> BaselineSet:
    """Cluster each slot's readings and bound typical consumption.

    Per slot: DBSCAN over that slot's values across the month, dropping
    noise points (spikes) and clusters whose mean falls below the
    essential-device floor.  Baselines come from the surviving points;
    slots where everything was excluded fall back to the raw
    10th/50th/90th percentiles and are flagged.  Slots with no readings
    at all are flagged with zero baselines; if every slot is that
    degenerate the whole derivation fails.
    """
    if medium_method not in ("median", "mean"):
        raise ValueError(f"unknown medium method {medium_method!r}")
    slots_n = segmentation.slots_per_cycle
    if len(series) < 7 * slots_n:
        raise InsufficientCycles(
            f"{len(series)} samples cover under 7 cycles of {slots_n} slots"
        )

    holes = series.gap_indices()
    per_slot: dict[int, list[float]] = {s: [] for s in range(slots_n)}
    for i, value in enumerate(series.values):
        if i in holes:
            continue
        per_slot[segmentation.slot_of_index(series, i)].append(value)

    slots: list[SlotBaseline] = []
    excluded: list[tuple[int, int]] = []
    outliers = 0
    degenerate = 0
    for slot in range(slots_n):
        raw = np.asarray(per_slot[slot], dtype=float)
        if raw.size == 0:
            slots.append(SlotBaseline(slot, 0.0, 0.0, 0.0, fallback=True))
            degenerate += 1
            continue

        assignment = dbscan(raw, params)
        outliers += assignment.noise_count()
        keep_ids = []
        for cid, st in assignment.cluster_stats.items():
            if st.mean_wh < low_load_floor_wh:
                excluded.append((slot, cid))
            else:
                keep_ids.append(cid)

        labels = np.asarray(assignment.labels)
        surviving = raw[np.isin(labels, keep_ids)] if keep_ids else np.array([])
        if surviving.size == 0:
            lo, mid, hi = np.percentile(raw, [10.0, 50.0, 90.0])
            slots.append(SlotBaseline(slot, float(lo), float(mid), float(hi), fallback=True))
            continue

        mid = np.median(surviving) if medium_method == "median" else surviving.mean()
        slots.append(
            SlotBaseline(slot, float(surviving.min()), float(mid), float(surviving.max()))
        )

    if degenerate == slots_n:
        raise EmptyAfterExclusion("no slot has any readings")

    return BaselineSet(
        month=month,
        slots_per_cycle=slots_n,
        slots=tuple(slots),
        excluded_low_clusters=tuple(excluded),
        outlier_count=outliers,
        medium_method=medium_method,
    )


def flexibility_band(
    baselines: BaselineSet,
    direction: str,
    adjustment_fraction: float,
) -> FlexibilityBand:
    """Convert baselines into per-slot deliverable flexibility.

    Downward flexibility is (medium - min) plus the adjustment, upward is
    (max - medium) plus the adjustment, where the adjustment is the given
    fraction of (max - medium); both are clipped into [0, max - min].
    """
    if direction not in ("upward", "downward"):
        raise ValueError(f"unknown direction {direction!r}")
    if not (0.0 < adjustment_fraction <= MAX_ADJUSTMENT_FRACTION):
        raise FractionOutOfRange(
            f"adjustment fraction must be in (0, {MAX_ADJUSTMENT_FRACTION}]"
        )

    values = []
    for s in baselines.slots:
        adjustment = adjustment_fraction * (s.max_wh - s.medium_wh)
        if direction == "downward":
            flex = (s.medium_wh - s.min_wh) + adjustment
        else:
            flex = (s.max_wh - s.medium_wh) + adjustment
        values.append(float(min(max(flex, 0.0), s.max_wh - s.min_wh)))
    return FlexibilityBand(direction, tuple(values), adjustment_fraction)
