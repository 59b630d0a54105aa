"""Binary point-stream frames for rendering clients.

A frame carries every event of the dataset, pickups first, then dropoffs:
a 12-byte little-endian header (revision, n, flags as uint32) followed by
2n packed 14-byte entries (x, y, t as float32; status and query color as
uint8). Positions are normalized to the dataset bounding box and times to
the dataset interval, so float32 precision holds ~1e-7 of the range and the
client needs no projection math.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .engine import StatusVector
from .errors import ParseError
from .snapshot import DatasetSnapshot

HEADER_STRUCT = struct.Struct("<III")

POINT_DTYPE = np.dtype(
    [("x", "<f4"), ("y", "<f4"), ("t", "<f4"), ("status", "u1"), ("color", "u1")],
    align=False,
)

NO_COLOR = 255


@dataclass(frozen=True)
class PointFrame:
    """Decoded frame, mostly for tests and non-browser clients."""

    revision: int
    n: int
    flags: int
    points: np.ndarray  # structured POINT_DTYPE, length 2n


def encode(
    snapshot: DatasetSnapshot,
    status: StatusVector,
    colors: np.ndarray,
    revision: int,
    flags: int = 0,
) -> bytes:
    """Pack the full point set into one frame.

    ``colors`` holds one palette index per trip (NO_COLOR when the trip is in
    no query); both endpoints of a trip share its status and color.
    """
    n = snapshot.n
    bbox = snapshot.bbox
    interval = snapshot.interval
    span_x = bbox.width or 1.0
    span_y = bbox.height or 1.0
    span_t = float(interval.duration or 1)

    points = np.empty(2 * n, dtype=POINT_DTYPE)
    for half, pickup in ((slice(0, n), True), (slice(n, 2 * n), False)):
        xs, ys = snapshot.event_positions(pickup)
        ts = snapshot.event_times(pickup)
        points["x"][half] = (xs - bbox.min_x) / span_x
        points["y"][half] = (ys - bbox.min_y) / span_y
        points["t"][half] = (ts - interval.start) / span_t
    points["status"] = status.point_status
    points["color"] = np.concatenate([colors, colors]).astype(np.uint8)
    return HEADER_STRUCT.pack(revision, n, flags) + points.tobytes()


def decode(buf: bytes) -> PointFrame:
    """Unpack a frame; raises ParseError when the size does not line up."""
    if len(buf) < HEADER_STRUCT.size:
        raise ParseError(f"frame too short: {len(buf)} bytes")
    revision, n, flags = HEADER_STRUCT.unpack_from(buf)
    expected = HEADER_STRUCT.size + 2 * n * POINT_DTYPE.itemsize
    if len(buf) != expected:
        raise ParseError(f"frame size {len(buf)} != expected {expected} for n={n}")
    points = np.frombuffer(buf, dtype=POINT_DTYPE, offset=HEADER_STRUCT.size)
    return PointFrame(revision=revision, n=n, flags=flags, points=points)


def frame_size(n: int) -> int:
    return HEADER_STRUCT.size + 2 * n * POINT_DTYPE.itemsize
