import numpy as np
import pytest

import oracle
import synth
from odcube.civiltime import RecurrencePattern
from odcube.engine import ResultMask, eval_prism
from odcube.errors import DomainError, NotFoundError
from odcube.geom import EventKind, Prism, TimeInterval
from odcube.manager import (
    PALETTE_SIZE,
    QueryRegistry,
    compute_stats,
    evaluate_spec,
    spec_from_json,
    spec_to_json,
)
from odcube.snapshot import DatasetSnapshot

NYC = synth.NYC_TZ


def snapshot_with_planted(inside: int, outside: int, seed=0) -> DatasetSnapshot:
    """`inside` trips have both events in LOWER_MANHATTAN; the rest are in JFK."""
    rng = np.random.default_rng(seed)
    n = inside + outside
    t0 = synth.local(2012, 10, 1)
    lm = synth.LOWER_MANHATTAN
    far = synth.JFK
    from odcube.geom import project_arrays

    lons, lats = [], []
    for i in range(n):
        box = lm if i < inside else far
        lon, lat = synth.box_point(rng, box)
        lons.append(lon)
        lats.append(lat)
    xs, ys = project_arrays(np.asarray(lons), np.asarray(lats))
    pickup_t = t0 + rng.integers(0, 86400, size=n).astype(np.int64)
    columns = {
        "pickup_t": pickup_t,
        "dropoff_t": pickup_t + 600,
        "pickup_x": xs,
        "pickup_y": ys,
        "dropoff_x": xs,
        "dropoff_y": ys,
        "duration_s": np.full(n, 600.0),
        "distance": np.ones(n),
        "fare": np.full(n, 10.0),
        "passengers": np.ones(n, dtype=np.int64),
    }
    return DatasetSnapshot(columns, timezone=NYC)


@pytest.fixture()
def registry(medium_snapshot):
    return QueryRegistry(medium_snapshot)


def lm_polygon():
    return synth.mercator_box(synth.LOWER_MANHATTAN)


class TestCreateAtomic:
    def test_footprint_only_gets_full_interval(self, registry, medium_snapshot):
        result = registry.create_atomic(footprint=lm_polygon())
        spec = registry.get(result.query_id)
        assert spec.prism.interval == medium_snapshot.interval
        assert spec.kind is EventKind.EITHER  # default

    def test_interval_only_gets_full_footprint(self, registry, medium_snapshot):
        iv = TimeInterval(medium_snapshot.interval.start, medium_snapshot.interval.start + 3600)
        result = registry.create_atomic(interval=iv)
        spec = registry.get(result.query_id)
        # every event position is inside the default footprint
        mask = eval_prism(medium_snapshot, Prism(spec.prism.footprint, medium_snapshot.interval), EventKind.EITHER)
        assert mask.count == medium_snapshot.n

    def test_needs_some_input(self, registry):
        with pytest.raises(DomainError):
            registry.create_atomic()

    def test_distinct_ids_and_colors(self, registry):
        a = registry.create_atomic(footprint=lm_polygon())
        b = registry.create_atomic(footprint=lm_polygon())
        assert a.query_id != b.query_id
        assert registry.get(a.query_id).color != registry.get(b.query_id).color

    def test_planted_count(self):
        snapshot = snapshot_with_planted(7, 20)
        registry = QueryRegistry(snapshot)
        result = registry.create_atomic(footprint=lm_polygon())
        assert result.stats.count == 7


class TestEdits:
    def test_set_kind_is_subset_of_either(self, registry, rng):
        prism = synth.random_prism(rng, registry.snapshot)
        created = registry.create_atomic(footprint=prism.footprint, interval=prism.interval)
        either_mask = created.mask
        origin = registry.set_kind(created.query_id, EventKind.ORIGIN)
        assert not (origin.mask.bits & ~either_mask.bits).any()
        assert registry.get(created.query_id).color == registry.get(origin.query_id).color

    def test_move_to_empty_region_gives_zero(self, registry):
        created = registry.create_atomic(footprint=lm_polygon())
        bbox = registry.snapshot.bbox
        far = Prism(
            synth.mercator_box((0.0, 0.0, 0.01, 0.01)),  # null island, nothing there
            registry.snapshot.interval,
        )
        moved = registry.move_prism(created.query_id, far)
        assert moved.stats.count == 0

    def test_identity_edit_keeps_mask(self, registry):
        created = registry.create_atomic(footprint=lm_polygon())
        spec = registry.get(created.query_id)
        moved = registry.move_prism(created.query_id, spec.prism)
        assert moved.mask.equals(created.mask)

    def test_edit_stability_round_trip(self, registry, rng):
        prism_a = synth.random_prism(rng, registry.snapshot)
        created = registry.create_atomic(footprint=prism_a.footprint, interval=prism_a.interval)
        original_mask = created.mask
        original_spec = registry.get(created.query_id)
        prism_b = synth.random_prism(rng, registry.snapshot)
        registry.move_prism(created.query_id, prism_b)
        registry.set_kind(created.query_id, EventKind.DESTINATION)
        registry.set_kind(created.query_id, original_spec.kind)
        back = registry.move_prism(created.query_id, original_spec.prism)
        assert back.mask.equals(original_mask)

    def test_unknown_id(self, registry):
        with pytest.raises(NotFoundError):
            registry.set_kind(999, EventKind.ORIGIN)


class TestDirectional:
    def test_mask_is_and_of_members(self, registry, rng):
        pa = synth.random_prism(rng, registry.snapshot)
        pb = synth.random_prism(rng, registry.snapshot)
        a = registry.create_atomic(footprint=pa.footprint, interval=pa.interval)
        b = registry.create_atomic(footprint=pb.footprint, interval=pb.interval)
        origin_mask = eval_prism(registry.snapshot, pa, EventKind.ORIGIN)
        dest_mask = eval_prism(registry.snapshot, pb, EventKind.DESTINATION)
        linked = registry.link_directional(a.query_id, b.query_id)
        assert linked.mask.equals(origin_mask & dest_mask)
        # the two atomics are gone
        assert registry.ids() == [linked.query_id]

    def test_airport_fixture_counts(self, tmp_path):
        rows, info = synth.airport_flow_rows()
        path = tmp_path / "flows.csv"
        synth.write_csv(path, rows)
        from odcube.ingest import ColumnMap, load_trips

        snapshot, _ = load_trips(path, ColumnMap.from_json(synth.COLUMN_MAP_JSON))
        registry = QueryRegistry(snapshot)
        lm = registry.create_atomic(footprint=synth.mercator_box(synth.LOWER_MANHATTAN))
        jfk = registry.create_atomic(footprint=synth.mercator_box(synth.JFK))
        linked = registry.link_directional(lm.query_id, jfk.query_id)
        assert linked.stats.count == info["jfk_count"]
        assert linked.stats.attributes["fare"].mean == pytest.approx(info["jfk_fare"])
        assert linked.stats.attributes["fare"].min == pytest.approx(info["jfk_fare"])

    def test_revert_restores_bit_exact(self, registry, rng):
        pa = synth.random_prism(rng, registry.snapshot)
        pb = synth.random_prism(rng, registry.snapshot)
        a = registry.create_atomic(footprint=pa.footprint, interval=pa.interval, kind=EventKind.ORIGIN)
        b = registry.create_atomic(footprint=pb.footprint, interval=pb.interval)
        mask_a, mask_b = a.mask, b.mask
        linked = registry.link_directional(a.query_id, b.query_id)
        restored = registry.revert_directional(linked.query_id)
        assert restored[0].mask.equals(mask_a)
        assert restored[1].mask.equals(mask_b)
        assert {r.query_id for r in restored} == {a.query_id, b.query_id}

    def test_linking_composites_rejected(self, registry, rng):
        p = synth.random_prism(rng, registry.snapshot)
        a = registry.create_atomic(footprint=p.footprint)
        b = registry.create_atomic(footprint=p.footprint)
        c = registry.create_atomic(footprint=p.footprint)
        merged = registry.merge(a.query_id, b.query_id)
        with pytest.raises(DomainError):
            registry.link_directional(merged.query_id, c.query_id)


class TestMerge:
    def test_merge_with_self_is_noop(self, registry):
        a = registry.create_atomic(footprint=lm_polygon())
        with pytest.warns(UserWarning):
            result = registry.merge(a.query_id, a.query_id)
        assert result.query_id == a.query_id
        assert result.mask.equals(a.mask)

    def test_union_bounds(self, registry, rng):
        pa = synth.random_prism(rng, registry.snapshot)
        pb = synth.random_prism(rng, registry.snapshot)
        a = registry.create_atomic(footprint=pa.footprint, interval=pa.interval)
        b = registry.create_atomic(footprint=pb.footprint, interval=pb.interval)
        ca, cb = a.stats.count, b.stats.count
        merged = registry.merge(a.query_id, b.query_id)
        assert merged.stats.count <= ca + cb
        assert merged.stats.count >= max(ca, cb)

    def test_disjoint_counts_add(self):
        snapshot = snapshot_with_planted(7, 5)
        registry = QueryRegistry(snapshot)
        a = registry.create_atomic(footprint=synth.mercator_box(synth.LOWER_MANHATTAN))
        b = registry.create_atomic(footprint=synth.mercator_box(synth.JFK))
        merged = registry.merge(a.query_id, b.query_id)
        assert merged.stats.count == 12

    def test_merge_flattens(self, registry):
        a = registry.create_atomic(footprint=lm_polygon())
        b = registry.create_atomic(footprint=lm_polygon())
        c = registry.create_atomic(footprint=lm_polygon())
        ab = registry.merge(a.query_id, b.query_id)
        abc = registry.merge(ab.query_id, c.query_id)
        spec = registry.get(abc.query_id)
        assert spec.variant == "merged"
        assert len(spec.members) == 3
        assert all(m.variant == "atomic" for m in spec.members)

    def test_merged_associativity(self, rng, medium_snapshot):
        prisms = [synth.random_prism(rng, medium_snapshot) for _ in range(3)]

        def merged_mask(order):
            registry = QueryRegistry(medium_snapshot)
            results = [registry.create_atomic(footprint=p.footprint, interval=p.interval) for p in prisms]
            ids = [r.query_id for r in results]
            first = registry.merge(ids[order[0]], ids[order[1]])
            final = registry.merge(first.query_id, ids[order[2]])
            return final.mask

        assert merged_mask((0, 1, 2)).equals(merged_mask((1, 2, 0)))

    def test_demerge_restores_members(self, registry, rng):
        pa = synth.random_prism(rng, registry.snapshot)
        pb = synth.random_prism(rng, registry.snapshot)
        a = registry.create_atomic(footprint=pa.footprint, interval=pa.interval)
        b = registry.create_atomic(footprint=pb.footprint, interval=pb.interval)
        mask_a, mask_b = a.mask, b.mask
        merged = registry.merge(a.query_id, b.query_id)
        restored = registry.demerge(merged.query_id)
        assert restored[0].mask.equals(mask_a)
        assert restored[1].mask.equals(mask_b)


class TestRecurrence:
    def test_empty_pattern_changes_nothing(self, registry):
        created = registry.create_atomic(footprint=lm_polygon())
        slices = registry.apply_recurrence(created.query_id, RecurrencePattern(timezone=NYC))
        after = registry.result(created.query_id)
        assert after.mask.equals(created.mask)
        s = slices[created.query_id]
        assert len(s.slices) == 1
        assert s.slices[0] == registry.get(created.query_id).prism.interval

    def test_mondays_two_week_interval(self, medium_snapshot):
        registry = QueryRegistry(medium_snapshot)
        iv = TimeInterval(synth.local(2012, 10, 1), synth.local(2012, 10, 15))
        created = registry.create_atomic(footprint=lm_polygon(), interval=iv)
        slices = registry.apply_recurrence(created.query_id, RecurrencePattern(weekdays=frozenset({0}), timezone=NYC))
        parts = slices[created.query_id].slices
        assert len(parts) <= 2
        assert all(p.duration == 86400 for p in parts)

    def test_evening_slices_over_week(self, medium_snapshot):
        registry = QueryRegistry(medium_snapshot)
        iv = TimeInterval(synth.local(2012, 10, 1), synth.local(2012, 10, 8))
        created = registry.create_atomic(footprint=lm_polygon(), interval=iv)
        slices = registry.apply_recurrence(
            created.query_id, RecurrencePattern(hour_range=(18 * 60, 24 * 60), timezone=NYC)
        )
        assert len(slices[created.query_id].slices) == 7

    def test_recurrence_intersects_mask(self, registry, rng):
        prism = synth.random_prism(rng, registry.snapshot)
        created = registry.create_atomic(footprint=prism.footprint, interval=prism.interval, kind=EventKind.ORIGIN)
        base_mask = created.mask
        pattern = RecurrencePattern(hour_range=(6 * 60, 18 * 60), timezone=NYC)
        registry.apply_recurrence(created.query_id, pattern)
        from odcube.engine import eval_recurrence

        expected = base_mask & eval_recurrence(registry.snapshot, pattern, EventKind.ORIGIN)
        assert registry.result(created.query_id).mask.equals(expected)

    def test_apply_to_all(self, registry):
        a = registry.create_atomic(footprint=lm_polygon())
        b = registry.create_atomic(footprint=lm_polygon(), kind=EventKind.ORIGIN)
        slices = registry.apply_recurrence("all", RecurrencePattern(weekdays=frozenset({2}), timezone=NYC))
        assert set(slices) == {a.query_id, b.query_id}
        assert registry.get(a.query_id).recurrence is not None
        assert registry.get(b.query_id).recurrence is not None


class TestStats:
    def test_empty_mask(self, medium_snapshot):
        stats = compute_stats(medium_snapshot, ResultMask.empty(medium_snapshot.n))
        assert stats.count == 0
        assert stats.attributes == {}

    def test_three_fare_fixture(self):
        t0 = synth.local(2012, 10, 1)
        n = 3
        columns = {
            "pickup_t": np.asarray([t0, t0 + 60, t0 + 120], dtype=np.int64),
            "dropoff_t": np.asarray([t0 + 600, t0 + 660, t0 + 720], dtype=np.int64),
            "pickup_x": np.zeros(n),
            "pickup_y": np.zeros(n),
            "dropoff_x": np.ones(n),
            "dropoff_y": np.ones(n),
            "duration_s": np.full(n, 600.0),
            "distance": np.ones(n),
            "fare": np.asarray([5.0, 10.0, 15.0]),
            "passengers": np.ones(n, dtype=np.int64),
        }
        snapshot = DatasetSnapshot(columns, timezone=NYC)
        stats = compute_stats(snapshot, ResultMask.full(3))
        fare = stats.attributes["fare"]
        assert (fare.mean, fare.min, fare.max) == (10.0, 5.0, 15.0)

    def test_matches_naive_recomputation(self, medium_snapshot, rng):
        trips = oracle.trips_of(medium_snapshot)
        for _ in range(10):
            bits = rng.integers(0, 2, medium_snapshot.n).astype(bool)
            stats = compute_stats(medium_snapshot, ResultMask(bits))
            selected = [t for t, b in zip(trips, bits) if b]
            assert stats.count == len(selected)
            if selected:
                fares = [t["fare"] for t in selected]
                assert stats.attributes["fare"].mean == pytest.approx(float(np.mean(fares)))
                assert stats.attributes["fare"].min == pytest.approx(min(fares))
                assert stats.attributes["fare"].max == pytest.approx(max(fares))


class TestColors:
    def test_unique_until_palette_exhausted(self, registry):
        ids = [registry.create_atomic(footprint=lm_polygon()).query_id for _ in range(PALETTE_SIZE)]
        colors = [registry.get(qid).color for qid in ids]
        assert sorted(colors) == list(range(PALETTE_SIZE))
        extra = registry.create_atomic(footprint=lm_polygon())
        assert 0 <= registry.get(extra.query_id).color < PALETTE_SIZE

    def test_deleted_colors_are_reused(self, registry):
        a = registry.create_atomic(footprint=lm_polygon())
        color = registry.get(a.query_id).color
        registry.delete(a.query_id)
        b = registry.create_atomic(footprint=lm_polygon())
        assert registry.get(b.query_id).color == color


class TestSpecJson:
    def test_round_trip_all_variants(self, registry, rng):
        pa = synth.random_prism(rng, registry.snapshot)
        pb = synth.random_prism(rng, registry.snapshot)
        a = registry.create_atomic(footprint=pa.footprint, interval=pa.interval, kind=EventKind.ORIGIN)
        b = registry.create_atomic(footprint=pb.footprint, interval=pb.interval)
        linked = registry.link_directional(a.query_id, b.query_id)
        c = registry.create_atomic(footprint=pa.footprint)
        merged = registry.merge(linked.query_id, c.query_id)
        registry.apply_recurrence(merged.query_id, RecurrencePattern(weekdays=frozenset({0, 4}), timezone=NYC))
        spec = registry.get(merged.query_id)
        again = spec_from_json(spec_to_json(spec), default_timezone=NYC)
        assert again == spec
        assert evaluate_spec(registry.snapshot, again).equals(registry.result(merged.query_id).mask)

    def test_composite_specs_match_oracle(self, medium_snapshot, rng):
        trips = oracle.trips_of(medium_snapshot)
        registry = QueryRegistry(medium_snapshot)
        pa = synth.random_prism(rng, medium_snapshot)
        pb = synth.random_prism(rng, medium_snapshot)
        pc = synth.random_prism(rng, medium_snapshot)
        a = registry.create_atomic(footprint=pa.footprint, interval=pa.interval)
        b = registry.create_atomic(footprint=pb.footprint, interval=pb.interval)
        linked = registry.link_directional(a.query_id, b.query_id)
        c = registry.create_atomic(footprint=pc.footprint, interval=pc.interval, kind=EventKind.DESTINATION)
        merged = registry.merge(linked.query_id, c.query_id)
        registry.apply_recurrence(merged.query_id, RecurrencePattern(hour_range=(7 * 60, 20 * 60), timezone=NYC))
        spec = registry.get(merged.query_id)
        expected = oracle.evaluate_spec_naive(trips, spec)
        assert registry.result(merged.query_id).mask.bits.tolist() == expected
