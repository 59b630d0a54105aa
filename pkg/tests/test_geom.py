import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracle
from odcube.errors import DomainError
from odcube.geom import (
    EARTH_RADIUS_M,
    EventKind,
    GeoPoint,
    PlanePoint,
    Polygon,
    Prism,
    TimeInterval,
    project,
    project_arrays,
    unproject,
)

UNIT_SQUARE = Polygon(((0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)))


class TestProjection:
    def test_origin_maps_to_origin(self):
        p = project(GeoPoint(0.0, 0.0))
        assert p.x == 0.0
        assert p.y == pytest.approx(0.0, abs=1e-9)

    def test_antimeridian_equals_pi_r(self):
        p = project(GeoPoint(180.0, 0.0))
        assert p.x == pytest.approx(math.pi * EARTH_RADIUS_M, abs=0.01)
        assert p.x == pytest.approx(20037508.34, abs=0.01)
        assert p.y == pytest.approx(0.0, abs=1e-6)

    def test_nyc_round_trip(self):
        src = GeoPoint(-73.97, 40.78)
        back = unproject(project(src))
        assert back.lon == pytest.approx(src.lon, abs=1e-9)
        assert back.lat == pytest.approx(src.lat, abs=1e-9)

    @given(
        st.floats(min_value=-180.0, max_value=180.0),
        st.floats(min_value=-85.0511, max_value=85.0511),
    )
    def test_round_trip_property(self, lon, lat):
        src = GeoPoint(lon, lat)
        back = unproject(project(src))
        assert back.lon == pytest.approx(lon, abs=1e-9)
        assert back.lat == pytest.approx(lat, abs=1e-9)

    def test_out_of_range_latitude_rejected(self):
        with pytest.raises(DomainError):
            GeoPoint(0.0, 86.0)
        with pytest.raises(DomainError):
            GeoPoint(0.0, float("nan"))
        with pytest.raises(DomainError):
            GeoPoint(181.0, 0.0)

    def test_array_projection_matches_scalar(self):
        lon = np.asarray([-73.97, 0.0, 12.5])
        lat = np.asarray([40.78, 0.0, -33.3])
        xs, ys = project_arrays(lon, lat)
        for i in range(3):
            p = project(GeoPoint(lon[i], lat[i]))
            assert xs[i] == pytest.approx(p.x, abs=1e-9)
            assert ys[i] == pytest.approx(p.y, abs=1e-9)


class TestPolygon:
    def test_unit_square_center_inside(self):
        assert UNIT_SQUARE.contains_point(0.5, 0.5) is True

    def test_point_outside(self):
        assert UNIT_SQUARE.contains_point(2.0, 2.0) is False

    def test_needs_three_distinct_vertices(self):
        with pytest.raises(DomainError):
            Polygon(((0.0, 0.0), (1.0, 1.0)))
        with pytest.raises(DomainError):
            Polygon(((0.0, 0.0), (0.0, 0.0), (1.0, 1.0)))

    def test_random_points_match_reference(self, rng):
        angles = np.sort(rng.uniform(0, 2 * np.pi, 12))
        radii = rng.uniform(0.3, 1.0, 12)
        poly = Polygon(tuple(zip((radii * np.cos(angles)).tolist(), (radii * np.sin(angles)).tolist())))
        xs = rng.uniform(-1.2, 1.2, 1000)
        ys = rng.uniform(-1.2, 1.2, 1000)
        got = poly.contains_points(xs, ys)
        for i in range(1000):
            assert got[i] == oracle.point_in_polygon(xs[i], ys[i], poly.vertices), i

    def test_self_intersecting_even_odd(self, rng):
        bowtie = Polygon(((0.0, 0.0), (2.0, 2.0), (2.0, 0.0), (0.0, 2.0)))
        xs = rng.uniform(-0.5, 2.5, 400)
        ys = rng.uniform(-0.5, 2.5, 400)
        got = bowtie.contains_points(xs, ys)
        for i in range(400):
            assert got[i] == oracle.point_in_polygon(xs[i], ys[i], bowtie.vertices)

    @given(st.data())
    def test_vectorized_matches_scalar(self, data):
        n_verts = data.draw(st.integers(3, 9))
        coords = data.draw(
            st.lists(
                st.tuples(
                    st.floats(-100, 100, allow_nan=False),
                    st.floats(-100, 100, allow_nan=False),
                ),
                min_size=n_verts,
                max_size=n_verts,
                unique=True,
            )
        )
        poly = Polygon(tuple(coords))
        xs = np.asarray(data.draw(st.lists(st.floats(-120, 120), min_size=5, max_size=5)))
        ys = np.asarray(data.draw(st.lists(st.floats(-120, 120), min_size=5, max_size=5)))
        vec = poly.contains_points(xs, ys)
        for i in range(5):
            assert vec[i] == poly.contains_point(xs[i], ys[i])


class TestTimeInterval:
    def test_half_open_membership(self):
        iv = TimeInterval(100, 200)
        assert iv.contains(100)
        assert iv.contains(199)
        assert not iv.contains(200)
        assert not iv.contains(99)

    def test_start_after_end_rejected(self):
        with pytest.raises(DomainError):
            TimeInterval(200, 100)

    def test_out_of_epoch_range_rejected(self):
        with pytest.raises(DomainError):
            TimeInterval(-1, 100)

    def test_clip(self):
        a = TimeInterval(100, 200)
        assert a.clip(TimeInterval(150, 400)) == TimeInterval(150, 200)
        assert a.clip(TimeInterval(300, 400)).is_empty


class TestPrism:
    def test_lower_bound_inclusive(self):
        prism = Prism(UNIT_SQUARE, TimeInterval(1000, 2000))
        assert prism.contains(0.5, 0.5, 1000) is True

    def test_upper_bound_exclusive(self):
        prism = Prism(UNIT_SQUARE, TimeInterval(1000, 2000))
        assert prism.contains(0.5, 0.5, 2000) is False

    def test_decomposition_against_oracle(self, rng):
        angles = np.sort(rng.uniform(0, 2 * np.pi, 7))
        poly = Polygon(tuple(zip(np.cos(angles).tolist(), np.sin(angles).tolist())))
        prism = Prism(poly, TimeInterval(5000, 9000))
        for _ in range(500):
            x = float(rng.uniform(-1.5, 1.5))
            y = float(rng.uniform(-1.5, 1.5))
            t = int(rng.integers(4000, 10000))
            expected = oracle.point_in_polygon(x, y, poly.vertices) and 5000 <= t < 9000
            assert prism.contains(x, y, t) == expected


def test_event_kind_colors():
    assert EventKind.ORIGIN.display_color == "blue"
    assert EventKind.DESTINATION.display_color == "red"
    assert EventKind.EITHER.display_color == "green"


def test_plane_point_rejects_non_finite():
    with pytest.raises(DomainError):
        PlanePoint(float("inf"), 0.0)
