"""Coordinated-view data products: time series, histograms, choropleth counts.

Time buckets align to civil-time boundaries in the dataset zone (midnight,
hour marks, Monday week starts, month starts) because urban rhythms are
wall-clock phenomena; bucket identity is the wall-clock label, so during a
fall-back hour the repeated wall times accumulate into one bucket and a day's
count always equals the sum of its hour counts. The displayed granularity
follows the zoom span: the finest step that keeps the bucket count inside a
readable band.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .civiltime import OffsetTable
from .engine import ResultMask
from .errors import DomainError, NotFoundError
from .geom import EventKind, TimeInterval
from .ingest import NeighborhoodSet
from .snapshot import ATTRIBUTES, DatasetSnapshot

SECONDS_PER_DAY = 86400

# Readability band for bucket counts at any zoom level.
BUCKET_RANGE = (50, 600)

UNASSIGNED = "unassigned"


class TimeGranularity(Enum):
    MINUTE = "minute"
    MIN15 = "15min"
    HOUR = "hour"
    HOUR6 = "6hour"
    DAY = "day"
    WEEK = "week"
    MONTH = "month"

    @property
    def nominal_seconds(self) -> float:
        return _NOMINAL_SECONDS[self]


_NOMINAL_SECONDS = {
    TimeGranularity.MINUTE: 60.0,
    TimeGranularity.MIN15: 900.0,
    TimeGranularity.HOUR: 3600.0,
    TimeGranularity.HOUR6: 21600.0,
    TimeGranularity.DAY: 86400.0,
    TimeGranularity.WEEK: 604800.0,
    TimeGranularity.MONTH: 2629746.0,  # mean Gregorian month
}

_UNIFORM_UNIT = {
    TimeGranularity.MINUTE: 60,
    TimeGranularity.MIN15: 900,
    TimeGranularity.HOUR: 3600,
    TimeGranularity.HOUR6: 21600,
    TimeGranularity.DAY: 86400,
}

# Ordered finest to coarsest.
GRANULARITIES = (
    TimeGranularity.MINUTE,
    TimeGranularity.MIN15,
    TimeGranularity.HOUR,
    TimeGranularity.HOUR6,
    TimeGranularity.DAY,
    TimeGranularity.WEEK,
    TimeGranularity.MONTH,
)


def granularity_for(span: TimeInterval) -> TimeGranularity:
    """Finest granularity whose bucket count over the span is readable.

    Scans fine to coarse and returns the first granularity putting the
    bucket count inside ``BUCKET_RANGE``; if none qualifies, the one whose
    count is closest to that band wins.
    """
    if span.is_empty:
        raise DomainError("granularity undefined for an empty span")
    lo, hi = BUCKET_RANGE
    best = None
    best_distance = None
    for g in GRANULARITIES:
        buckets = span.duration / g.nominal_seconds
        if lo <= buckets <= hi:
            return g
        distance = lo - buckets if buckets < lo else buckets - hi
        if best_distance is None or distance < best_distance:
            best, best_distance = g, distance
    return best


def bucket_ordinal(local: np.ndarray, granularity: TimeGranularity) -> np.ndarray:
    """Wall-clock bucket index for local epochs (vectorized)."""
    if granularity in _UNIFORM_UNIT:
        return local // _UNIFORM_UNIT[granularity]
    days = local // SECONDS_PER_DAY
    if granularity is TimeGranularity.WEEK:
        # 1970-01-05 (day 4) was a Monday; weeks start on Monday.
        return (days - 4) // 7
    return days.astype("datetime64[D]").astype("datetime64[M]").astype(np.int64)


def bucket_start_local(ordinals: np.ndarray, granularity: TimeGranularity) -> np.ndarray:
    """Local epoch of each bucket's wall-clock start."""
    if granularity in _UNIFORM_UNIT:
        return ordinals * _UNIFORM_UNIT[granularity]
    if granularity is TimeGranularity.WEEK:
        return (ordinals * 7 + 4) * SECONDS_PER_DAY
    days = ordinals.astype("datetime64[M]").astype("datetime64[D]").astype(np.int64)
    return days * SECONDS_PER_DAY


@dataclass(frozen=True)
class AggregateSeries:
    """Contiguous civil-time buckets with a count or mean per bucket."""

    granularity: TimeGranularity
    bucket_starts: np.ndarray  # UTC epochs of local bucket starts
    values: np.ndarray  # int64 counts, or float64 means (NaN when empty)
    measure: str

    @property
    def total(self) -> float:
        vals = self.values[np.isfinite(self.values.astype(np.float64))]
        return float(vals.sum())

    def to_json(self) -> dict:
        items = []
        for start, value in zip(self.bucket_starts.tolist(), self.values.tolist()):
            if isinstance(value, float) and not np.isfinite(value):
                value = None
            items.append({"bucket_start": int(start), "value": value})
        return {"granularity": self.granularity.value, "measure": self.measure, "buckets": items}


@dataclass(frozen=True)
class Histogram:
    """Equal-width value bins over the selected rows of one attribute."""

    attribute: str
    edges: np.ndarray  # len(counts) + 1, empty when nothing selected
    counts: np.ndarray

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def to_json(self) -> dict:
        bins = [
            {"lo": float(self.edges[i]), "hi": float(self.edges[i + 1]), "count": int(c)}
            for i, c in enumerate(self.counts.tolist())
        ]
        return {"attribute": self.attribute, "bins": bins}


@dataclass(frozen=True)
class ChoroplethTable:
    """Per-neighborhood counts for one mask and event kind."""

    kind: EventKind
    counts: dict[str, int]
    unassigned: int

    @property
    def total(self) -> int:
        return sum(self.counts.values()) + self.unassigned

    def to_json(self) -> dict:
        return {"kind": self.kind.value, "counts": dict(self.counts), "unassigned": self.unassigned}


def parse_measure(measure: str) -> tuple[str, str | None]:
    """Split a measure string into ("count", None) or ("mean", attribute)."""
    if measure == "count":
        return "count", None
    if measure.startswith("mean:"):
        attr = measure.split(":", 1)[1]
        if attr not in ATTRIBUTES:
            raise DomainError(f"unknown attribute {attr!r} in measure")
        return "mean", attr
    raise DomainError(f"unknown measure {measure!r}; use 'count' or 'mean:<attribute>'")


def _event_times(snapshot: DatasetSnapshot, kind: EventKind) -> np.ndarray:
    # Either buckets each trip exactly once, by its pickup (canonical start).
    return snapshot.dropoff_t if kind is EventKind.DESTINATION else snapshot.pickup_t


def _event_positions(snapshot: DatasetSnapshot, kind: EventKind) -> tuple[np.ndarray, np.ndarray]:
    return snapshot.event_positions(pickup=kind is not EventKind.DESTINATION)


def _ordinal_range(span: TimeInterval, table: OffsetTable, granularity: TimeGranularity) -> tuple[int, int]:
    ords = []
    for seg_start, seg_end, off in table.segments(span):
        edges = np.asarray([seg_start + off, seg_end - 1 + off], dtype=np.int64)
        ords.extend(bucket_ordinal(edges, granularity).tolist())
    return min(ords), max(ords)


def time_series(
    snapshot: DatasetSnapshot,
    mask: ResultMask,
    span: TimeInterval,
    granularity: TimeGranularity,
    measure: str = "count",
    kind: EventKind = EventKind.EITHER,
) -> AggregateSeries:
    """Bucketed counts or attribute means over the selected trips."""
    if len(mask) != snapshot.n:
        raise DomainError(f"mask length {len(mask)} does not match snapshot size {snapshot.n}")
    mode, attr = parse_measure(measure)
    clipped = span.clip(snapshot.interval)
    if clipped != span:
        warnings.warn(f"span [{span.start}, {span.end}) clipped to dataset interval")
        span = clipped
    if span.is_empty:
        empty_vals = np.zeros(0, dtype=np.int64 if mode == "count" else np.float64)
        return AggregateSeries(granularity, np.zeros(0, dtype=np.int64), empty_vals, measure)

    table = OffsetTable.for_range(snapshot.timezone, span.start, span.end)
    times = _event_times(snapshot, kind)
    sel = mask.bits & (times >= span.start) & (times < span.end)

    lo_ord, hi_ord = _ordinal_range(span, table, granularity)
    n_buckets = hi_ord - lo_ord + 1
    local = table.local_epochs(times[sel])
    ords = bucket_ordinal(local, granularity) - lo_ord

    counts = np.bincount(ords, minlength=n_buckets)
    if mode == "count":
        values: np.ndarray = counts.astype(np.int64)
    else:
        sums = np.bincount(ords, weights=snapshot.column(attr)[sel], minlength=n_buckets)
        with np.errstate(invalid="ignore"):
            values = np.where(counts > 0, sums / np.maximum(counts, 1), np.nan)

    ordinals = np.arange(lo_ord, hi_ord + 1, dtype=np.int64)
    local_starts = bucket_start_local(ordinals, granularity)
    starts = np.asarray([table.utc_for_local(int(s)) for s in local_starts], dtype=np.int64)
    return AggregateSeries(granularity, starts, values, measure)


def histogram(snapshot: DatasetSnapshot, mask: ResultMask, attribute: str, bin_count: int) -> Histogram:
    """Equal-width bins over [min, max] of the selected values; last bin closed."""
    if bin_count < 1:
        raise DomainError(f"bin_count must be >= 1, got {bin_count}")
    if attribute not in ATTRIBUTES:
        raise DomainError(f"unknown attribute {attribute!r}")
    values = snapshot.column(attribute)[mask.bits]
    if len(values) == 0:
        return Histogram(attribute, np.zeros(0, dtype=np.float64), np.zeros(0, dtype=np.int64))
    counts, edges = np.histogram(values, bins=bin_count)
    return Histogram(attribute, edges, counts.astype(np.int64))


def region_assignment(
    snapshot: DatasetSnapshot, mask: ResultMask, neighborhoods: NeighborhoodSet, kind: EventKind
) -> np.ndarray:
    """First containing region index per selected trip (-1 when in none)."""
    sel = np.flatnonzero(mask.bits)
    xs, ys = _event_positions(snapshot, kind)
    xs, ys = xs[sel], ys[sel]
    assigned = np.full(snapshot.n, -1, dtype=np.int64)
    open_slots = np.ones(len(sel), dtype=bool)
    for i, (_, poly) in enumerate(neighborhoods.regions):
        if not open_slots.any():
            break
        min_x, min_y, max_x, max_y = poly.bbox
        cand = open_slots & (xs >= min_x) & (xs <= max_x) & (ys >= min_y) & (ys <= max_y)
        idx = np.flatnonzero(cand)
        if len(idx) == 0:
            continue
        inside = poly.contains_points(xs[idx], ys[idx])
        hit = idx[inside]
        assigned[sel[hit]] = i
        open_slots[hit] = False
    return assigned


def choropleth(
    snapshot: DatasetSnapshot, mask: ResultMask, neighborhoods: NeighborhoodSet, kind: EventKind
) -> ChoroplethTable:
    """Selected-trip counts per neighborhood; events in no region are counted
    under "unassigned". Overlapping regions assign to the first match, and
    kind=either assigns each trip once by its pickup position."""
    assigned = region_assignment(snapshot, mask, neighborhoods, kind)
    counts = {}
    for i, (name, _) in enumerate(neighborhoods.regions):
        counts[name] = int(((assigned == i) & mask.bits).sum())
    unassigned = int(((assigned == -1) & mask.bits).sum())
    return ChoroplethTable(kind=kind, counts=counts, unassigned=unassigned)


def choropleth_stack(
    snapshot: DatasetSnapshot,
    neighborhoods: NeighborhoodSet,
    neighborhood: str,
    span: TimeInterval,
    kind: EventKind,
    mask: ResultMask | None = None,
) -> AggregateSeries:
    """Per-bucket counts for one neighborhood at the zoom-appropriate step."""
    names = neighborhoods.names
    if neighborhood not in names:
        raise NotFoundError(f"unknown neighborhood {neighborhood!r}")
    if mask is None:
        mask = ResultMask.full(snapshot.n)
    assigned = region_assignment(snapshot, mask, neighborhoods, kind)
    region_mask = ResultMask(assigned == names.index(neighborhood))
    return time_series(snapshot, region_mask, span, granularity_for(span), "count", kind)
