"""Trip CSV and neighborhood GeoJSON ingestion.

Raw files are normalized into a :class:`~odcube.snapshot.DatasetSnapshot`:
timestamps parsed in the source timezone and stored as UTC epochs, positions
projected to Web Mercator, and rows failing validation dropped with a
per-row reason. The NYC exports are notorious for (0,0) coordinate rows, so
a configurable city bounding box rejects out-of-area records by default.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .errors import DomainError, EmptyDatasetError, ParseError, SchemaError
from .geom import EPOCH_MAX, EPOCH_MIN, MAX_MERCATOR_LAT, Polygon, project_arrays
from .snapshot import DEFAULT_TARGET_CELLS, DatasetSnapshot

CANONICAL_FIELDS = (
    "pickup_time",
    "dropoff_time",
    "pickup_lon",
    "pickup_lat",
    "dropoff_lon",
    "dropoff_lat",
    "duration_s",
    "distance",
    "fare",
    "passengers",
)

DEFAULT_TIMESTAMP_FORMAT = "%Y-%m-%d %H:%M:%S"

# Generous NYC-area box; rows outside it are junk for a city-scale dataset.
DEFAULT_CITY_BOUNDS = (-74.5, 40.2, -73.3, 41.3)  # lon_min, lat_min, lon_max, lat_max


@dataclass(frozen=True)
class ColumnMap:
    """Mapping from canonical trip fields to source CSV columns."""

    columns: dict[str, str]
    timestamp_format: str = DEFAULT_TIMESTAMP_FORMAT
    timezone: str = "America/New_York"
    delimiter: str = ","

    def __post_init__(self) -> None:
        missing = [f for f in CANONICAL_FIELDS if f not in self.columns]
        if missing:
            raise SchemaError(f"column map missing canonical fields: {missing}")

    def to_json(self) -> dict:
        return {
            "columns": dict(self.columns),
            "timestamp_format": self.timestamp_format,
            "timezone": self.timezone,
            "delimiter": self.delimiter,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "ColumnMap":
        return cls(
            columns=dict(obj["columns"]),
            timestamp_format=obj.get("timestamp_format", DEFAULT_TIMESTAMP_FORMAT),
            timezone=obj.get("timezone", "America/New_York"),
            delimiter=obj.get("delimiter", ","),
        )


@dataclass
class IngestReport:
    """Accepted/rejected row accounting for one load."""

    accepted: int = 0
    rejected: int = 0
    reasons: list[dict] = field(default_factory=list)

    def to_json(self) -> dict:
        return {"accepted": self.accepted, "rejected": self.rejected, "reasons": self.reasons}


def _parse_times(series: pd.Series, fmt: str, tz: str) -> np.ndarray:
    """Local time strings -> UTC epoch seconds; unparseable rows become -1."""
    parsed = pd.to_datetime(series, format=fmt, errors="coerce")
    bad = parsed.isna()
    # Ambiguous wall times (fall-back hour) take their first occurrence;
    # nonexistent ones (spring-forward gap) shift to the transition instant.
    localized = parsed.dt.tz_localize(tz, ambiguous=np.ones(len(parsed), dtype=bool), nonexistent="shift_forward")
    epochs = localized.astype("int64").to_numpy() // 1_000_000_000
    epochs[bad.to_numpy()] = -1
    return epochs


def load_trips(
    path,
    column_map: ColumnMap,
    reject_policy: str = "drop",
    city_bounds: tuple[float, float, float, float] = DEFAULT_CITY_BOUNDS,
    target_cells: int = DEFAULT_TARGET_CELLS,
) -> tuple[DatasetSnapshot, IngestReport]:
    """Load a trip CSV into a snapshot plus a rejection report.

    ``reject_policy`` is ``"drop"`` (keep going, report rejects) or
    ``"fail"`` (raise on the first bad row).
    """
    if reject_policy not in ("drop", "fail"):
        raise DomainError(f"unknown reject_policy {reject_policy!r}")
    header = pd.read_csv(path, sep=column_map.delimiter, nrows=0)
    missing = [src for src in column_map.columns.values() if src not in header.columns]
    if missing:
        raise SchemaError(f"CSV missing mapped columns: {missing}")

    frame = pd.read_csv(
        path,
        sep=column_map.delimiter,
        usecols=list(column_map.columns.values()),
        dtype=str,
        keep_default_na=False,
    )
    n_raw = len(frame)

    def get(name: str) -> pd.Series:
        return frame[column_map.columns[name]]

    pickup_t = _parse_times(get("pickup_time"), column_map.timestamp_format, column_map.timezone)
    dropoff_t = _parse_times(get("dropoff_time"), column_map.timestamp_format, column_map.timezone)

    numeric = {}
    for field_name in ("pickup_lon", "pickup_lat", "dropoff_lon", "dropoff_lat", "duration_s", "distance", "fare", "passengers"):
        numeric[field_name] = pd.to_numeric(get(field_name), errors="coerce").to_numpy(dtype=np.float64)

    lon_min, lat_min, lon_max, lat_max = city_bounds

    def coords_valid(lon: np.ndarray, lat: np.ndarray) -> np.ndarray:
        return (
            np.isfinite(lon)
            & np.isfinite(lat)
            & (lon >= -180.0)
            & (lon <= 180.0)
            & (np.abs(lat) <= MAX_MERCATOR_LAT)
        )

    def coords_in_city(lon: np.ndarray, lat: np.ndarray) -> np.ndarray:
        return (lon >= lon_min) & (lon <= lon_max) & (lat >= lat_min) & (lat <= lat_max)

    attrs_finite = np.ones(n_raw, dtype=bool)
    attrs_nonneg = np.ones(n_raw, dtype=bool)
    for field_name in ("duration_s", "distance", "fare", "passengers"):
        vals = numeric[field_name]
        attrs_finite &= np.isfinite(vals)
        attrs_nonneg &= ~np.isfinite(vals) | (vals >= 0)

    # First failing check wins as the row's reason; order below is fixed.
    checks = [
        ("unparseable time", (pickup_t >= EPOCH_MIN) & (pickup_t < EPOCH_MAX) & (dropoff_t >= EPOCH_MIN) & (dropoff_t < EPOCH_MAX)),
        (
            "invalid coordinate",
            coords_valid(numeric["pickup_lon"], numeric["pickup_lat"])
            & coords_valid(numeric["dropoff_lon"], numeric["dropoff_lat"]),
        ),
        (
            "coordinate out of city bounds",
            coords_in_city(numeric["pickup_lon"], numeric["pickup_lat"])
            & coords_in_city(numeric["dropoff_lon"], numeric["dropoff_lat"]),
        ),
        ("unparseable attribute", attrs_finite),
        ("negative attribute", attrs_nonneg),
        ("dropoff before pickup", dropoff_t >= pickup_t),
    ]

    ok = np.ones(n_raw, dtype=bool)
    reason_codes = np.full(n_raw, -1, dtype=np.int64)
    for code, (_, passed) in enumerate(checks):
        newly_bad = ok & ~passed
        reason_codes[newly_bad] = code
        ok &= passed

    report = IngestReport()
    for row in np.flatnonzero(~ok):
        reason = checks[reason_codes[row]][0]
        if reject_policy == "fail":
            raise SchemaError(f"row {row}: {reason}")
        report.reasons.append({"row": int(row), "reason": reason})
    report.rejected = int((~ok).sum())
    report.accepted = int(ok.sum())
    if report.accepted == 0:
        raise EmptyDatasetError(f"{path}: no rows passed validation")

    pux, puy = project_arrays(numeric["pickup_lon"][ok], numeric["pickup_lat"][ok])
    dox, doy = project_arrays(numeric["dropoff_lon"][ok], numeric["dropoff_lat"][ok])
    columns = {
        "pickup_t": pickup_t[ok],
        "dropoff_t": dropoff_t[ok],
        "pickup_x": pux,
        "pickup_y": puy,
        "dropoff_x": dox,
        "dropoff_y": doy,
        "duration_s": numeric["duration_s"][ok],
        "distance": numeric["distance"][ok],
        "fare": numeric["fare"][ok],
        "passengers": numeric["passengers"][ok].astype(np.int64),
    }
    snapshot = DatasetSnapshot(columns, timezone=column_map.timezone, target_cells=target_cells)
    return snapshot, report


def sample(snapshot: DatasetSnapshot, k: int, seed: int) -> DatasetSnapshot:
    """Uniform sample of k trips without replacement, reproducible per seed."""
    if not 0 < k <= snapshot.n:
        raise DomainError(f"sample size {k} outside (0, {snapshot.n}]")
    rng = np.random.default_rng(seed)
    idx = rng.choice(snapshot.n, size=k, replace=False)
    return snapshot.take(idx)


@dataclass(frozen=True)
class NeighborhoodSet:
    """Named region polygons in Mercator coordinates."""

    regions: tuple[tuple[str, Polygon], ...]
    warnings: tuple[str, ...] = ()

    @property
    def names(self) -> list[str]:
        return [name for name, _ in self.regions]

    def polygon(self, name: str) -> Polygon:
        for region_name, poly in self.regions:
            if region_name == name:
                return poly
        raise KeyError(name)


def load_neighborhoods(path, name_property: str = "name") -> NeighborhoodSet:
    """Load a GeoJSON FeatureCollection of named polygons (WGS84 -> Mercator).

    Geometry types other than Polygon are skipped with a warning; interior
    rings (holes) are ignored. Duplicate names are a schema error.
    """
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(doc, dict) or doc.get("type") != "FeatureCollection":
        raise SchemaError(f"{path}: expected a GeoJSON FeatureCollection")

    regions: list[tuple[str, Polygon]] = []
    notes: list[str] = []
    seen: set[str] = set()
    for i, feature in enumerate(doc.get("features", [])):
        geometry = feature.get("geometry") or {}
        props = feature.get("properties") or {}
        name = props.get(name_property)
        if name is None:
            raise SchemaError(f"feature {i}: missing {name_property!r} property")
        gtype = geometry.get("type")
        if gtype != "Polygon":
            msg = f"feature {name!r}: unsupported geometry {gtype!r}, skipped"
            notes.append(msg)
            warnings.warn(msg)
            continue
        if name in seen:
            raise SchemaError(f"duplicate neighborhood name {name!r}")
        seen.add(name)
        rings = geometry.get("coordinates") or []
        if not rings:
            raise SchemaError(f"feature {name!r}: empty polygon")
        if len(rings) > 1:
            notes.append(f"feature {name!r}: interior rings ignored")
        exterior = rings[0]
        if len(exterior) >= 2 and exterior[0] == exterior[-1]:
            exterior = exterior[:-1]
        lon = np.asarray([v[0] for v in exterior], dtype=np.float64)
        lat = np.asarray([v[1] for v in exterior], dtype=np.float64)
        xs, ys = project_arrays(lon, lat)
        regions.append((str(name), Polygon(tuple(zip(xs.tolist(), ys.tolist())))))
    return NeighborhoodSet(regions=tuple(regions), warnings=tuple(notes))
