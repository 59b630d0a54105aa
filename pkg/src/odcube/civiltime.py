"""Civil-time machinery: recurrence patterns, timezone offset tables, slicing.

Recurring selections ("every Monday", "6PM to midnight") are civil-time
concepts, so they are evaluated in the dataset's IANA zone. Scalar checks go
through :mod:`datetime` directly; bulk checks use a piecewise-constant UTC
offset table so that converting a whole column to local wall time is three
numpy operations. Both paths must agree exactly; the property tests pin that.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, field
from datetime import datetime, timezone
from zoneinfo import ZoneInfo, ZoneInfoNotFoundError

import numpy as np

from .errors import ConfigError, DomainError
from .geom import TimeInterval

WEEKDAY_NAMES = ("mon", "tue", "wed", "thu", "fri", "sat", "sun")  # Monday == 0

SECONDS_PER_DAY = 86400
SECONDS_PER_MINUTE = 60

# 1970-01-01 was a Thursday; shift so Monday == 0 in day arithmetic.
_EPOCH_WEEKDAY = 3

# Offset probe stride. Real zones never switch regimes faster than this.
_PROBE_STEP = 4 * SECONDS_PER_DAY


def get_zone(name: str) -> ZoneInfo:
    """Resolve an IANA zone name, raising ConfigError for unknown ones."""
    try:
        return ZoneInfo(name)
    except (ZoneInfoNotFoundError, ValueError) as exc:
        raise ConfigError(f"unknown timezone {name!r}") from exc


@dataclass(frozen=True)
class RecurrencePattern:
    """Periodic civil-time filter: weekday subset and/or minute-of-day window.

    An empty weekday set means "all days"; a missing hour range means "all
    hours". The window is half-open in minutes of the local day.
    """

    weekdays: frozenset[int] = frozenset()
    hour_range: tuple[int, int] | None = None
    timezone: str = "UTC"

    def __post_init__(self) -> None:
        object.__setattr__(self, "weekdays", frozenset(int(d) for d in self.weekdays))
        if any(d < 0 or d > 6 for d in self.weekdays):
            raise DomainError("weekdays must be in 0..6 (Monday == 0)")
        if self.hour_range is not None:
            start, end = (int(v) for v in self.hour_range)
            if not 0 <= start < end <= 1440:
                raise DomainError(f"hour_range {self.hour_range} must satisfy 0 <= start < end <= 1440")
            object.__setattr__(self, "hour_range", (start, end))
        get_zone(self.timezone)

    @property
    def is_universal(self) -> bool:
        return not self.weekdays and self.hour_range is None

    def matches(self, t: int) -> bool:
        """Scalar civil-time check via the calendar library."""
        local = datetime.fromtimestamp(t, tz=get_zone(self.timezone))
        if self.weekdays and local.weekday() not in self.weekdays:
            return False
        if self.hour_range is not None:
            minute = local.hour * 60 + local.minute
            if not self.hour_range[0] <= minute < self.hour_range[1]:
                return False
        return True

    def to_json(self) -> dict:
        return {
            "weekdays": sorted(WEEKDAY_NAMES[d] for d in self.weekdays),
            "hour_range": list(self.hour_range) if self.hour_range else None,
            "timezone": self.timezone,
        }

    @classmethod
    def from_json(cls, obj: dict, default_timezone: str = "UTC") -> "RecurrencePattern":
        raw_days = obj.get("weekdays") or []
        days = set()
        for d in raw_days:
            if isinstance(d, str):
                name = d.lower()[:3]
                if name not in WEEKDAY_NAMES:
                    raise DomainError(f"unknown weekday {d!r}")
                days.add(WEEKDAY_NAMES.index(name))
            else:
                days.add(int(d))
        hour_range = obj.get("hour_range")
        return cls(
            weekdays=frozenset(days),
            hour_range=tuple(hour_range) if hour_range else None,
            timezone=obj.get("timezone") or default_timezone,
        )


def _utc_offset_seconds(zone: ZoneInfo, t: int) -> int:
    return int(datetime.fromtimestamp(t, tz=zone).utcoffset().total_seconds())


class OffsetTable:
    """Piecewise-constant UTC offsets of one zone over a closed time range.

    ``starts`` are ascending UTC epochs of offset regimes; ``offsets[i]``
    applies on ``[starts[i], starts[i+1])``. Queries outside the built range
    extend the boundary regimes.
    """

    def __init__(self, zone_name: str, starts: np.ndarray, offsets: np.ndarray):
        self.zone_name = zone_name
        self.starts = starts
        self.offsets = offsets

    @classmethod
    def build(cls, zone_name: str, t0: int, t1: int) -> "OffsetTable":
        """Probe the zone over [t0, t1], bisecting every offset transition."""
        zone = get_zone(zone_name)
        t1 = max(t1, t0)
        probes = list(range(t0, t1 + _PROBE_STEP, _PROBE_STEP))
        starts = [t0]
        offsets = [_utc_offset_seconds(zone, t0)]
        for lo, hi in zip(probes, probes[1:]):
            off_lo = _utc_offset_seconds(zone, lo)
            off_hi = _utc_offset_seconds(zone, hi)
            if off_hi == off_lo:
                continue
            while hi - lo > 1:
                mid = (lo + hi) // 2
                if _utc_offset_seconds(zone, mid) == off_lo:
                    lo = mid
                else:
                    hi = mid
            starts.append(hi)
            offsets.append(off_hi)
        return cls(zone_name, np.asarray(starts, dtype=np.int64), np.asarray(offsets, dtype=np.int64))

    @staticmethod
    @functools.lru_cache(maxsize=64)
    def _cached(zone_name: str, t0: int, t1: int) -> "OffsetTable":
        return OffsetTable.build(zone_name, t0, t1)

    @classmethod
    def for_range(cls, zone_name: str, t0: int, t1: int) -> "OffsetTable":
        """Cached table; the range is widened to year-ish blocks for reuse."""
        block = 366 * SECONDS_PER_DAY
        lo = (t0 // block) * block
        hi = ((max(t1, t0) // block) + 1) * block
        return cls._cached(zone_name, lo, hi)

    def offset_at(self, t: int) -> int:
        idx = int(np.searchsorted(self.starts, t, side="right")) - 1
        return int(self.offsets[max(idx, 0)])

    def local_epochs(self, ts: np.ndarray) -> np.ndarray:
        """Map UTC epochs to local wall-clock epochs (UTC + offset)."""
        idx = np.searchsorted(self.starts, ts, side="right") - 1
        np.clip(idx, 0, len(self.offsets) - 1, out=idx)
        return ts + self.offsets[idx]

    def segments(self, interval: TimeInterval) -> list[tuple[int, int, int]]:
        """Offset regimes (start, end, offset) covering a UTC interval."""
        if interval.is_empty:
            return []
        out = []
        i = max(int(np.searchsorted(self.starts, interval.start, side="right")) - 1, 0)
        cursor = interval.start
        while cursor < interval.end:
            seg_end = int(self.starts[i + 1]) if i + 1 < len(self.starts) else interval.end
            seg_end = min(seg_end, interval.end)
            out.append((cursor, seg_end, int(self.offsets[i])))
            cursor = seg_end
            i += 1
        return out

    def utc_for_local(self, local: int) -> int:
        """Earliest UTC instant whose wall time is >= the given local epoch.

        Ambiguous wall times (fall-back overlap) resolve to their first
        occurrence; nonexistent ones (spring-forward gap) resolve to the
        transition instant.
        """
        best = None
        for i, off in enumerate(self.offsets):
            seg_start = int(self.starts[i])
            seg_end = int(self.starts[i + 1]) if i + 1 < len(self.starts) else None
            u = local - int(off)
            if u < seg_start:
                u = seg_start
            if seg_end is not None and u >= seg_end:
                continue
            if best is None or u < best:
                best = u
        return best if best is not None else local - int(self.offsets[-1])


def local_weekday(local: np.ndarray) -> np.ndarray:
    """Weekday (Monday == 0) from local wall-clock epochs."""
    return (local // SECONDS_PER_DAY + _EPOCH_WEEKDAY) % 7


def local_minute_of_day(local: np.ndarray) -> np.ndarray:
    return (local % SECONDS_PER_DAY) // SECONDS_PER_MINUTE


def pattern_mask(ts: np.ndarray, pattern: RecurrencePattern, table: OffsetTable | None = None) -> np.ndarray:
    """Vectorized recurrence check over an array of UTC epochs."""
    if pattern.is_universal:
        return np.ones(len(ts), dtype=bool)
    if table is None:
        if len(ts) == 0:
            return np.zeros(0, dtype=bool)
        table = OffsetTable.for_range(pattern.timezone, int(ts.min()), int(ts.max()))
    local = table.local_epochs(ts)
    ok = np.ones(len(ts), dtype=bool)
    if pattern.weekdays:
        days = np.fromiter(pattern.weekdays, dtype=np.int64)
        ok &= np.isin(local_weekday(local), days)
    if pattern.hour_range is not None:
        minute = local_minute_of_day(local)
        ok &= (minute >= pattern.hour_range[0]) & (minute < pattern.hour_range[1])
    return ok


def pattern_slices(interval: TimeInterval, pattern: RecurrencePattern) -> list[TimeInterval]:
    """Exact sub-intervals of ``interval`` on which the pattern matches.

    Slices are disjoint, ascending, and their union equals the matching
    subset of the interval, DST transitions included. A universal pattern
    yields the whole interval as a single slice.
    """
    if interval.is_empty:
        return []
    if pattern.is_universal:
        return [interval]

    table = OffsetTable.for_range(pattern.timezone, interval.start, interval.end)
    cuts = {interval.start, interval.end}
    for seg_start, seg_end, off in table.segments(interval):
        cuts.add(seg_start)
        local_lo = seg_start + off
        local_hi = seg_end + off
        day_lo = local_lo // SECONDS_PER_DAY
        day_hi = (local_hi - 1) // SECONDS_PER_DAY
        for day in range(day_lo, day_hi + 1):
            if pattern.hour_range is not None:
                edges = (
                    day * SECONDS_PER_DAY + pattern.hour_range[0] * SECONDS_PER_MINUTE,
                    day * SECONDS_PER_DAY + pattern.hour_range[1] * SECONDS_PER_MINUTE,
                )
            else:
                edges = (day * SECONDS_PER_DAY, (day + 1) * SECONDS_PER_DAY)
            for edge in edges:
                u = edge - off
                if seg_start <= u < seg_end and interval.start < u < interval.end:
                    cuts.add(u)

    bounds = sorted(cuts)
    slices: list[TimeInterval] = []
    for lo, hi in zip(bounds, bounds[1:]):
        if not pattern.matches(lo):
            continue
        if slices and slices[-1].end == lo:
            slices[-1] = TimeInterval(slices[-1].start, hi)
        else:
            slices.append(TimeInterval(lo, hi))
    return slices


def utc_epoch(*args: int) -> int:
    """Epoch seconds of a UTC calendar datetime (year, month, day, ...)."""
    return int(datetime(*args, tzinfo=timezone.utc).timestamp())
