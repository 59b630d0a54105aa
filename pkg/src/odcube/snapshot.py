"""Immutable columnar trip store with a uniform spatial grid index.

A snapshot holds one parallel array per trip field plus two grid indexes
(pickup and dropoff positions). The grid gives candidate trip ids for any
footprint bounding box; exact polygon and interval tests then run only on
candidates. Snapshots serialize to a deterministic little-endian container so
repeated ingests of the same file are byte-identical.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, ParseError
from .geom import TimeInterval

MAGIC = b"ODCSNAP1"

TIME_COLUMNS = ("pickup_t", "dropoff_t")
POSITION_COLUMNS = ("pickup_x", "pickup_y", "dropoff_x", "dropoff_y")
ATTRIBUTES = ("duration_s", "distance", "fare", "passengers")
COLUMN_ORDER = TIME_COLUMNS + POSITION_COLUMNS + ATTRIBUTES

_DTYPES = {
    "pickup_t": np.int64,
    "dropoff_t": np.int64,
    "pickup_x": np.float64,
    "pickup_y": np.float64,
    "dropoff_x": np.float64,
    "dropoff_y": np.float64,
    "duration_s": np.float64,
    "distance": np.float64,
    "fare": np.float64,
    "passengers": np.int64,
}

DEFAULT_TARGET_CELLS = 4096


@dataclass(frozen=True)
class BoundingBox:
    min_x: float
    min_y: float
    max_x: float
    max_y: float

    @property
    def width(self) -> float:
        return self.max_x - self.min_x

    @property
    def height(self) -> float:
        return self.max_y - self.min_y


class GridIndex:
    """CSR-style buckets mapping uniform grid cells to trip ids."""

    def __init__(self, bbox: BoundingBox, nx: int, ny: int, starts: np.ndarray, ids: np.ndarray):
        self.bbox = bbox
        self.nx = nx
        self.ny = ny
        self.starts = starts  # (nx*ny + 1,) bucket offsets into ids
        self.ids = ids  # trip ids grouped by cell, row-major

    @classmethod
    def build(cls, xs: np.ndarray, ys: np.ndarray, bbox: BoundingBox, target_cells: int) -> "GridIndex":
        n = len(xs)
        aspect = bbox.width / bbox.height if bbox.height > 0 else 1.0
        nx = max(1, int(round(np.sqrt(target_cells * max(aspect, 1e-9)))))
        ny = max(1, int(round(target_cells / nx)))
        cells = cls._cell_ids(xs, ys, bbox, nx, ny)
        order = np.argsort(cells, kind="stable").astype(np.int32)
        counts = np.bincount(cells, minlength=nx * ny)
        starts = np.zeros(nx * ny + 1, dtype=np.int64)
        np.cumsum(counts, out=starts[1:])
        assert starts[-1] == n
        return cls(bbox, nx, ny, starts, order)

    @staticmethod
    def _cell_ids(xs: np.ndarray, ys: np.ndarray, bbox: BoundingBox, nx: int, ny: int) -> np.ndarray:
        cw = bbox.width / nx if bbox.width > 0 else 1.0
        ch = bbox.height / ny if bbox.height > 0 else 1.0
        cx = np.clip(((xs - bbox.min_x) / cw).astype(np.int64), 0, nx - 1)
        cy = np.clip(((ys - bbox.min_y) / ch).astype(np.int64), 0, ny - 1)
        return cy * nx + cx

    def candidates(self, min_x: float, min_y: float, max_x: float, max_y: float) -> np.ndarray:
        """Trip ids in all cells intersecting a bounding box (superset of exact)."""
        if max_x < self.bbox.min_x or min_x > self.bbox.max_x or max_y < self.bbox.min_y or min_y > self.bbox.max_y:
            return np.empty(0, dtype=np.int32)
        cw = self.bbox.width / self.nx if self.bbox.width > 0 else 1.0
        ch = self.bbox.height / self.ny if self.bbox.height > 0 else 1.0
        cx0 = int(np.clip((min_x - self.bbox.min_x) // cw, 0, self.nx - 1))
        cx1 = int(np.clip((max_x - self.bbox.min_x) // cw, 0, self.nx - 1))
        cy0 = int(np.clip((min_y - self.bbox.min_y) // ch, 0, self.ny - 1))
        cy1 = int(np.clip((max_y - self.bbox.min_y) // ch, 0, self.ny - 1))
        rows = []
        for cy in range(cy0, cy1 + 1):
            lo = self.starts[cy * self.nx + cx0]
            hi = self.starts[cy * self.nx + cx1 + 1]
            if hi > lo:
                rows.append(self.ids[lo:hi])
        if not rows:
            return np.empty(0, dtype=np.int32)
        return np.concatenate(rows)

    @property
    def occupied_cells(self) -> int:
        return int((np.diff(self.starts) > 0).sum())


@dataclass(frozen=True)
class SpatialIndex:
    """Paired grid indexes over pickup and dropoff positions."""

    pickup: GridIndex
    dropoff: GridIndex
    target_cells: int


class DatasetSnapshot:
    """Columnar, read-only view of an ingested trip set."""

    def __init__(self, columns: dict[str, np.ndarray], timezone: str, target_cells: int = DEFAULT_TARGET_CELLS):
        missing = [c for c in COLUMN_ORDER if c not in columns]
        if missing:
            raise DomainError(f"missing columns: {missing}")
        n = len(columns[COLUMN_ORDER[0]])
        if n == 0:
            raise DomainError("snapshot must contain at least one trip")
        cols: dict[str, np.ndarray] = {}
        for name in COLUMN_ORDER:
            arr = np.ascontiguousarray(columns[name], dtype=_DTYPES[name])
            if len(arr) != n:
                raise DomainError(f"column {name} has length {len(arr)}, expected {n}")
            arr.setflags(write=False)
            cols[name] = arr
        self.columns = cols
        self.n = n
        self.timezone = timezone
        self.interval = TimeInterval(int(cols["pickup_t"].min()), int(cols["dropoff_t"].max()) + 1)
        xs = np.concatenate([cols["pickup_x"], cols["dropoff_x"]])
        ys = np.concatenate([cols["pickup_y"], cols["dropoff_y"]])
        self.bbox = BoundingBox(float(xs.min()), float(ys.min()), float(xs.max()), float(ys.max()))
        self.index = build_grid_index(self, target_cells)

    def __getattr__(self, name: str) -> np.ndarray:
        try:
            return self.__dict__["columns"][name]
        except KeyError:
            raise AttributeError(name) from None

    def column(self, name: str) -> np.ndarray:
        if name not in self.columns:
            raise DomainError(f"unknown column {name!r}")
        return self.columns[name]

    def event_times(self, pickup: bool) -> np.ndarray:
        return self.columns["pickup_t" if pickup else "dropoff_t"]

    def event_positions(self, pickup: bool) -> tuple[np.ndarray, np.ndarray]:
        prefix = "pickup" if pickup else "dropoff"
        return self.columns[f"{prefix}_x"], self.columns[f"{prefix}_y"]

    # --- persistence ---

    def save(self, path) -> None:
        """Write the deterministic binary container (columns only)."""
        entries = []
        offset = 0
        for name in COLUMN_ORDER:
            arr = self.columns[name]
            entries.append({"name": name, "dtype": arr.dtype.str, "nbytes": arr.nbytes, "offset": offset})
            offset += arr.nbytes
        header = {
            "n": self.n,
            "timezone": self.timezone,
            "target_cells": self.index.target_cells,
            "columns": entries,
        }
        blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
        with open(path, "wb") as fh:
            fh.write(MAGIC)
            fh.write(struct.pack("<I", len(blob)))
            fh.write(blob)
            for name in COLUMN_ORDER:
                fh.write(self.columns[name].astype(self.columns[name].dtype.newbyteorder("<")).tobytes())

    @classmethod
    def load(cls, path) -> "DatasetSnapshot":
        with open(path, "rb") as fh:
            magic = fh.read(len(MAGIC))
            if magic != MAGIC:
                raise ParseError(f"{path}: not a snapshot file")
            (hlen,) = struct.unpack("<I", fh.read(4))
            header = json.loads(fh.read(hlen).decode("utf-8"))
            data = fh.read()
        columns = {}
        for entry in header["columns"]:
            raw = data[entry["offset"] : entry["offset"] + entry["nbytes"]]
            columns[entry["name"]] = np.frombuffer(raw, dtype=np.dtype(entry["dtype"]))
        return cls(columns, timezone=header["timezone"], target_cells=header.get("target_cells", DEFAULT_TARGET_CELLS))

    def take(self, indices: np.ndarray) -> "DatasetSnapshot":
        """New snapshot containing the given trips, original order preserved."""
        idx = np.sort(np.asarray(indices))
        cols = {name: arr[idx] for name, arr in self.columns.items()}
        return DatasetSnapshot(cols, timezone=self.timezone, target_cells=self.index.target_cells)


def build_grid_index(snapshot: DatasetSnapshot, target_cells: int = DEFAULT_TARGET_CELLS) -> SpatialIndex:
    """Uniform grid over pickup and dropoff positions sized for ~n/target occupancy."""
    return SpatialIndex(
        pickup=GridIndex.build(snapshot.columns["pickup_x"], snapshot.columns["pickup_y"], snapshot.bbox, target_cells),
        dropoff=GridIndex.build(snapshot.columns["dropoff_x"], snapshot.columns["dropoff_y"], snapshot.bbox, target_cells),
        target_cells=target_cells,
    )
