import numpy as np
import pytest

import synth
from odcube.engine import PointStatus, ResultMask, classify
from odcube.errors import ParseError
from odcube.pointbuffer import NO_COLOR, decode, encode, frame_size


def make_frame(snapshot, rng, revision=7):
    n = snapshot.n
    status = classify(
        snapshot,
        ResultMask(rng.integers(0, 2, n).astype(bool)),
        [ResultMask(rng.integers(0, 2, n).astype(bool))],
        ResultMask(rng.integers(0, 2, n).astype(bool)),
    )
    colors = rng.integers(0, 12, n).astype(np.uint8)
    colors[rng.integers(0, 2, n).astype(bool)] = NO_COLOR
    return status, colors, encode(snapshot, status, colors, revision=revision)


class TestFrameLayout:
    def test_frame_size(self, small_snapshot, rng):
        _, _, buf = make_frame(small_snapshot, rng)
        assert len(buf) == frame_size(small_snapshot.n)
        assert len(buf) == 12 + 2 * small_snapshot.n * 14

    def test_header_fields(self, small_snapshot, rng):
        _, _, buf = make_frame(small_snapshot, rng, revision=42)
        frame = decode(buf)
        assert frame.revision == 42
        assert frame.n == small_snapshot.n
        assert frame.flags == 0

    def test_little_endian_layout(self, small_snapshot, rng):
        _, _, buf = make_frame(small_snapshot, rng, revision=1)
        assert buf[0:4] == b"\x01\x00\x00\x00"


class TestRoundTrip:
    def test_status_and_color_lossless(self, small_snapshot, rng):
        status, colors, buf = make_frame(small_snapshot, rng)
        frame = decode(buf)
        n = small_snapshot.n
        assert np.array_equal(frame.points["status"], status.point_status)
        assert np.array_equal(frame.points["color"][:n], colors)
        assert np.array_equal(frame.points["color"][n:], colors)

    def test_positions_within_tolerance(self, small_snapshot, rng):
        _, _, buf = make_frame(small_snapshot, rng)
        frame = decode(buf)
        n = small_snapshot.n
        bbox = small_snapshot.bbox
        iv = small_snapshot.interval
        expected_x = (small_snapshot.pickup_x - bbox.min_x) / bbox.width
        expected_t = (small_snapshot.pickup_t - iv.start) / iv.duration
        assert np.abs(frame.points["x"][:n] - expected_x).max() < 1e-6
        assert np.abs(frame.points["t"][:n] - expected_t).max() < 1e-6
        expected_dx = (small_snapshot.dropoff_x - bbox.min_x) / bbox.width
        assert np.abs(frame.points["x"][n:] - expected_dx).max() < 1e-6

    def test_pickups_before_dropoffs(self, small_snapshot, rng):
        _, _, buf = make_frame(small_snapshot, rng)
        frame = decode(buf)
        n = small_snapshot.n
        # pickup times precede dropoff times for the same trip
        assert (frame.points["t"][:n] <= frame.points["t"][n:] + 1e-6).all()


class TestDecodeErrors:
    def test_truncated_frame(self, small_snapshot, rng):
        _, _, buf = make_frame(small_snapshot, rng)
        with pytest.raises(ParseError):
            decode(buf[:-1])

    def test_too_short_for_header(self):
        with pytest.raises(ParseError):
            decode(b"\x00\x01")


def test_status_codes_fit_uint8():
    assert max(PointStatus) <= 255
