"""Mask-based query evaluation over a snapshot.

Every filter evaluates to one bit per trip. Prism evaluation pulls candidate
ids from the grid index, then applies the exact interval and even-odd polygon
tests; results are identical with the index disabled. Mask combination is
plain bitwise algebra, and :func:`classify` folds the global filter, query
membership, and the brush into one render status per trip.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum
from typing import Iterable, Sequence

import numpy as np

from .civiltime import OffsetTable, RecurrencePattern, pattern_mask
from .errors import DomainError
from .geom import EventKind, Prism
from .snapshot import ATTRIBUTES, DatasetSnapshot


@dataclass(frozen=True)
class ResultMask:
    """Per-trip membership bits."""

    bits: np.ndarray

    def __post_init__(self) -> None:
        bits = np.asarray(self.bits, dtype=bool)
        bits.setflags(write=False)
        object.__setattr__(self, "bits", bits)

    @classmethod
    def full(cls, n: int) -> "ResultMask":
        return cls(np.ones(n, dtype=bool))

    @classmethod
    def empty(cls, n: int) -> "ResultMask":
        return cls(np.zeros(n, dtype=bool))

    def __len__(self) -> int:
        return len(self.bits)

    def _check(self, other: "ResultMask") -> None:
        if len(other) != len(self):
            raise DomainError(f"mask length mismatch: {len(self)} vs {len(other)}")

    def __and__(self, other: "ResultMask") -> "ResultMask":
        self._check(other)
        return ResultMask(self.bits & other.bits)

    def __or__(self, other: "ResultMask") -> "ResultMask":
        self._check(other)
        return ResultMask(self.bits | other.bits)

    def __invert__(self) -> "ResultMask":
        return ResultMask(~self.bits)

    def and_not(self, other: "ResultMask") -> "ResultMask":
        self._check(other)
        return ResultMask(self.bits & ~other.bits)

    @property
    def count(self) -> int:
        return int(self.bits.sum())

    def equals(self, other: "ResultMask") -> bool:
        return len(self) == len(other) and bool(np.array_equal(self.bits, other.bits))


def combine(op: str, masks: Sequence[ResultMask]) -> ResultMask:
    """Bitwise combination: AND/OR over 1+, NOT over 1, AND_NOT over 2 masks."""
    if not masks:
        raise DomainError("combine needs at least one mask")
    n = len(masks[0])
    for m in masks[1:]:
        if len(m) != n:
            raise DomainError(f"mask length mismatch: {n} vs {len(m)}")
    op = op.upper()
    if op == "NOT":
        if len(masks) != 1:
            raise DomainError("NOT takes exactly one mask")
        return ~masks[0]
    if op == "AND_NOT":
        if len(masks) != 2:
            raise DomainError("AND_NOT takes exactly two masks")
        return masks[0].and_not(masks[1])
    if op == "AND":
        out = masks[0]
        for m in masks[1:]:
            out = out & m
        return out
    if op == "OR":
        out = masks[0]
        for m in masks[1:]:
            out = out | m
        return out
    raise DomainError(f"unknown combine op {op!r}")


@dataclass(frozen=True)
class AttributeConstraint:
    """Inclusive min/max bound on one numeric trip attribute."""

    attribute: str
    min: float | None = None
    max: float | None = None

    def __post_init__(self) -> None:
        if self.attribute not in ATTRIBUTES:
            raise DomainError(f"unknown attribute {self.attribute!r}; must be one of {ATTRIBUTES}")
        if self.min is not None and self.max is not None and self.min > self.max:
            raise DomainError(f"constraint min {self.min} > max {self.max}")

    def to_json(self) -> dict:
        return {"attribute": self.attribute, "min": self.min, "max": self.max}

    @classmethod
    def from_json(cls, obj: dict) -> "AttributeConstraint":
        return cls(attribute=obj["attribute"], min=obj.get("min"), max=obj.get("max"))


@dataclass(frozen=True)
class BrushSpec:
    """Ephemeral filter volumes: origin, destination, or both (conjunction)."""

    origin_volume: Prism | None = None
    destination_volume: Prism | None = None

    def __post_init__(self) -> None:
        if self.origin_volume is None and self.destination_volume is None:
            raise DomainError("brush needs at least one volume")


class PointStatus(IntEnum):
    """Render status; higher value wins when states overlap."""

    FILTERED_OUT = 0
    VISIBLE = 1
    HIGHLIGHTED = 2
    BRUSHED = 3


@dataclass(frozen=True)
class StatusVector:
    """Per-trip render status, materializable as 2n point statuses."""

    trip_status: np.ndarray  # uint8, length n

    @property
    def point_status(self) -> np.ndarray:
        """Status for 2n points: pickups then dropoffs, both equal the trip's."""
        return np.concatenate([self.trip_status, self.trip_status])


def _prism_event_mask(snapshot: DatasetSnapshot, prism: Prism, pickup: bool, use_index: bool) -> np.ndarray:
    """Exact membership of one event column in a prism."""
    times = snapshot.event_times(pickup)
    xs, ys = snapshot.event_positions(pickup)
    bits = np.zeros(snapshot.n, dtype=bool)
    min_x, min_y, max_x, max_y = prism.footprint.bbox
    if use_index:
        grid = snapshot.index.pickup if pickup else snapshot.index.dropoff
        cand = grid.candidates(min_x, min_y, max_x, max_y)
        if len(cand) == 0:
            return bits
        keep = (times[cand] >= prism.interval.start) & (times[cand] < prism.interval.end)
        cand = cand[keep]
        if len(cand) == 0:
            return bits
        cx, cy = xs[cand], ys[cand]
        box = (cx >= min_x) & (cx <= max_x) & (cy >= min_y) & (cy <= max_y)
        cand = cand[box]
        if len(cand) == 0:
            return bits
        inside = prism.footprint.contains_points(xs[cand], ys[cand])
        bits[cand[inside]] = True
        return bits
    keep = prism.interval.contains_array(times)
    keep &= (xs >= min_x) & (xs <= max_x) & (ys >= min_y) & (ys <= max_y)
    idx = np.flatnonzero(keep)
    if len(idx):
        inside = prism.footprint.contains_points(xs[idx], ys[idx])
        bits[idx[inside]] = True
    return bits


def eval_prism(snapshot: DatasetSnapshot, prism: Prism, kind: EventKind, use_index: bool = True) -> ResultMask:
    """Trips whose kind-selected event(s) fall inside the prism."""
    if kind is EventKind.ORIGIN:
        return ResultMask(_prism_event_mask(snapshot, prism, True, use_index))
    if kind is EventKind.DESTINATION:
        return ResultMask(_prism_event_mask(snapshot, prism, False, use_index))
    bits = _prism_event_mask(snapshot, prism, True, use_index) | _prism_event_mask(snapshot, prism, False, use_index)
    return ResultMask(bits)


def eval_recurrence(snapshot: DatasetSnapshot, pattern: RecurrencePattern, kind: EventKind) -> ResultMask:
    """Trips whose kind-selected event time(s) match the civil-time pattern."""
    if pattern.is_universal:
        return ResultMask.full(snapshot.n)
    table = OffsetTable.for_range(pattern.timezone, snapshot.interval.start, snapshot.interval.end)
    if kind is EventKind.ORIGIN:
        return ResultMask(pattern_mask(snapshot.pickup_t, pattern, table))
    if kind is EventKind.DESTINATION:
        return ResultMask(pattern_mask(snapshot.dropoff_t, pattern, table))
    bits = pattern_mask(snapshot.pickup_t, pattern, table) | pattern_mask(snapshot.dropoff_t, pattern, table)
    return ResultMask(bits)


def eval_attributes(snapshot: DatasetSnapshot, constraints: Iterable[AttributeConstraint]) -> ResultMask:
    """Conjunction of inclusive attribute bounds; empty list selects everything."""
    bits = np.ones(snapshot.n, dtype=bool)
    for c in constraints:
        values = snapshot.column(c.attribute)
        if c.min is not None:
            bits &= values >= c.min
        if c.max is not None:
            bits &= values <= c.max
    return ResultMask(bits)


def eval_brush(snapshot: DatasetSnapshot, brush: BrushSpec, use_index: bool = True) -> ResultMask:
    """Brush membership: AND of both volumes, or the single volume's role."""
    if brush.origin_volume is not None and brush.destination_volume is not None:
        origin = eval_prism(snapshot, brush.origin_volume, EventKind.ORIGIN, use_index)
        dest = eval_prism(snapshot, brush.destination_volume, EventKind.DESTINATION, use_index)
        return origin & dest
    if brush.origin_volume is not None:
        return eval_prism(snapshot, brush.origin_volume, EventKind.ORIGIN, use_index)
    return eval_prism(snapshot, brush.destination_volume, EventKind.DESTINATION, use_index)


def classify(
    snapshot: DatasetSnapshot,
    global_mask: ResultMask,
    query_masks: Sequence[ResultMask],
    brush_mask: ResultMask | None = None,
) -> StatusVector:
    """Fold masks into per-trip status with Brushed > Highlighted > Visible."""
    n = snapshot.n
    for m in (global_mask, *query_masks, *((brush_mask,) if brush_mask else ())):
        if len(m) != n:
            raise DomainError(f"mask length {len(m)} does not match snapshot size {n}")
    status = np.full(n, PointStatus.FILTERED_OUT, dtype=np.uint8)
    passing = global_mask.bits
    status[passing] = PointStatus.VISIBLE
    if query_masks:
        in_any = np.zeros(n, dtype=bool)
        for m in query_masks:
            in_any |= m.bits
        status[passing & in_any] = PointStatus.HIGHLIGHTED
    if brush_mask is not None:
        status[passing & brush_mask.bits] = PointStatus.BRUSHED
    return StatusVector(trip_status=status)
