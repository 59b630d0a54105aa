"""Geometric and temporal primitives: Web Mercator projection, polygons, prisms.

Positions are stored in spherical Web Mercator meters (EPSG:3857) so that
screen-drawn footprints and trip events share one plane. Timestamps are plain
integer epoch seconds (UTC); intervals are half-open ``[start, end)`` so that
adjacent slices partition time without double counting. Polygon containment
uses the even-odd crossing rule, which stays total and deterministic for
self-intersecting or degenerate rings.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import DomainError

EARTH_RADIUS_M = 6378137.0
MAX_MERCATOR_LAT = 85.0511

# Valid timestamp range: [1970-01-01, 2100-01-01) UTC.
EPOCH_MIN = 0
EPOCH_MAX = 4102444800


def check_timestamp(t: int) -> int:
    """Validate an epoch-seconds timestamp and return it as an int."""
    t = int(t)
    if not EPOCH_MIN <= t < EPOCH_MAX:
        raise DomainError(f"timestamp {t} outside [{EPOCH_MIN}, {EPOCH_MAX})")
    return t


@dataclass(frozen=True)
class GeoPoint:
    """WGS84 position in degrees, restricted to the Mercator-projectable band."""

    lon: float
    lat: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.lon) and math.isfinite(self.lat)):
            raise DomainError(f"non-finite coordinate ({self.lon}, {self.lat})")
        if not -180.0 <= self.lon <= 180.0:
            raise DomainError(f"longitude {self.lon} outside [-180, 180]")
        if not -MAX_MERCATOR_LAT <= self.lat <= MAX_MERCATOR_LAT:
            raise DomainError(f"latitude {self.lat} outside Mercator band")


@dataclass(frozen=True)
class PlanePoint:
    """Position in Web Mercator meters."""

    x: float
    y: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise DomainError(f"non-finite plane coordinate ({self.x}, {self.y})")


def project(p: GeoPoint) -> PlanePoint:
    """Forward spherical Web Mercator projection."""
    x = EARTH_RADIUS_M * math.radians(p.lon)
    y = EARTH_RADIUS_M * math.log(math.tan(math.pi / 4.0 + math.radians(p.lat) / 2.0))
    return PlanePoint(x, y)


def unproject(p: PlanePoint) -> GeoPoint:
    """Inverse spherical Web Mercator projection."""
    lon = math.degrees(p.x / EARTH_RADIUS_M)
    lat = math.degrees(2.0 * math.atan(math.exp(p.y / EARTH_RADIUS_M)) - math.pi / 2.0)
    # float rounding can overshoot the domain boundary by sub-nanometer amounts
    lon = min(max(lon, -180.0), 180.0)
    lat = min(max(lat, -MAX_MERCATOR_LAT), MAX_MERCATOR_LAT)
    return GeoPoint(lon, lat)


def project_arrays(lon: np.ndarray, lat: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized forward projection. Assumes inputs already validated."""
    x = EARTH_RADIUS_M * np.radians(lon)
    y = EARTH_RADIUS_M * np.log(np.tan(np.pi / 4.0 + np.radians(lat) / 2.0))
    return x, y


def unproject_arrays(x: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized inverse projection."""
    lon = np.degrees(x / EARTH_RADIUS_M)
    lat = np.degrees(2.0 * np.arctan(np.exp(y / EARTH_RADIUS_M)) - np.pi / 2.0)
    return lon, lat


@dataclass(frozen=True)
class TimeInterval:
    """Half-open interval [start, end) of epoch seconds."""

    start: int
    end: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "start", check_timestamp(self.start))
        object.__setattr__(self, "end", check_timestamp(self.end))
        if self.start > self.end:
            raise DomainError(f"interval start {self.start} after end {self.end}")

    def contains(self, t: int) -> bool:
        return self.start <= t < self.end

    def contains_array(self, ts: np.ndarray) -> np.ndarray:
        return (ts >= self.start) & (ts < self.end)

    @property
    def duration(self) -> int:
        return self.end - self.start

    @property
    def is_empty(self) -> bool:
        return self.start == self.end

    def clip(self, other: "TimeInterval") -> "TimeInterval":
        """Intersection with another interval (empty interval when disjoint)."""
        start = max(self.start, other.start)
        end = min(self.end, other.end)
        if start > end:
            start = end
        return TimeInterval(start, end)


@dataclass(frozen=True)
class Polygon:
    """Single exterior ring in Mercator meters, implicitly closed."""

    vertices: tuple[tuple[float, float], ...]

    def __post_init__(self) -> None:
        verts = tuple((float(x), float(y)) for x, y in self.vertices)
        object.__setattr__(self, "vertices", verts)
        if len(set(verts)) < 3:
            raise DomainError("polygon needs at least 3 distinct vertices")
        for x, y in verts:
            if not (math.isfinite(x) and math.isfinite(y)):
                raise DomainError("polygon vertex not finite")

    @property
    def bbox(self) -> tuple[float, float, float, float]:
        xs = [v[0] for v in self.vertices]
        ys = [v[1] for v in self.vertices]
        return min(xs), min(ys), max(xs), max(ys)

    def contains_point(self, x: float, y: float) -> bool:
        """Even-odd crossing test for a single point.

        Points exactly on an edge get whatever the crossing count says; the
        rule is deterministic but not geometrically boundary-exact.
        """
        verts = self.vertices
        inside = False
        j = len(verts) - 1
        for i in range(len(verts)):
            xi, yi = verts[i]
            xj, yj = verts[j]
            if (yi > y) != (yj > y):
                x_cross = (xj - xi) * (y - yi) / (yj - yi) + xi
                if x < x_cross:
                    inside = not inside
            j = i
        return inside

    def contains_points(self, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
        """Vectorized even-odd crossing test; one pass per polygon edge."""
        inside = np.zeros(len(xs), dtype=bool)
        verts = self.vertices
        j = len(verts) - 1
        for i in range(len(verts)):
            xi, yi = verts[i]
            xj, yj = verts[j]
            straddles = (yi > ys) != (yj > ys)
            if straddles.any() and yj != yi:
                x_cross = (xj - xi) * (ys - yi) / (yj - yi) + xi
                inside ^= straddles & (xs < x_cross)
            j = i
        return inside


@dataclass(frozen=True)
class Prism:
    """Extruded polygon: spatial footprint swept over a time interval."""

    footprint: Polygon
    interval: TimeInterval

    def contains(self, x: float, y: float, t: int) -> bool:
        return self.interval.contains(t) and self.footprint.contains_point(x, y)


class EventKind(Enum):
    """Which trip endpoint a constraint applies to."""

    ORIGIN = "origin"
    DESTINATION = "destination"
    EITHER = "either"

    @property
    def display_color(self) -> str:
        return {EventKind.ORIGIN: "blue", EventKind.DESTINATION: "red", EventKind.EITHER: "green"}[self]
