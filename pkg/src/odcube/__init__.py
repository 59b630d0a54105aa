"""Spatio-temporal query engine for origin-destination trip data.

Trips are stored column-wise with pickup and dropoff events; queries are
extruded polygons (prisms), recurrence patterns, attribute bounds, and
brushes that all evaluate to per-trip bitmasks. A FastAPI service and a CLI
expose the same JSON schema for scripted and interactive sessions.
"""

from .civiltime import OffsetTable, RecurrencePattern, pattern_slices
from .engine import (
    AttributeConstraint,
    BrushSpec,
    PointStatus,
    ResultMask,
    StatusVector,
    classify,
    combine,
    eval_attributes,
    eval_brush,
    eval_prism,
    eval_recurrence,
)
from .errors import (
    ConfigError,
    DomainError,
    EmptyDatasetError,
    NotFoundError,
    OdcubeError,
    ParseError,
    SchemaError,
)
from .geom import EventKind, GeoPoint, PlanePoint, Polygon, Prism, TimeInterval, project, unproject
from .ingest import ColumnMap, IngestReport, NeighborhoodSet, load_neighborhoods, load_trips, sample
from .manager import (
    AtomicQuery,
    DirectionalQuery,
    MergedQuery,
    QueryRegistry,
    SlicedPrismSet,
    TripStats,
    compute_stats,
)
from .snapshot import DatasetSnapshot, build_grid_index

__all__ = [
    "AtomicQuery",
    "AttributeConstraint",
    "BrushSpec",
    "ColumnMap",
    "ConfigError",
    "DatasetSnapshot",
    "DirectionalQuery",
    "DomainError",
    "EmptyDatasetError",
    "EventKind",
    "GeoPoint",
    "IngestReport",
    "MergedQuery",
    "NeighborhoodSet",
    "NotFoundError",
    "OdcubeError",
    "OffsetTable",
    "ParseError",
    "PlanePoint",
    "PointStatus",
    "Polygon",
    "Prism",
    "QueryRegistry",
    "RecurrencePattern",
    "ResultMask",
    "SchemaError",
    "SlicedPrismSet",
    "StatusVector",
    "TimeInterval",
    "TripStats",
    "build_grid_index",
    "classify",
    "combine",
    "compute_stats",
    "eval_attributes",
    "eval_brush",
    "eval_prism",
    "eval_recurrence",
    "load_neighborhoods",
    "load_trips",
    "pattern_slices",
    "project",
    "sample",
    "unproject",
]

__version__ = "0.1.0"
