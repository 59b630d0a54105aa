"""Query lifecycle: atomic, directional, and merged queries over one snapshot.

The registry is the single writer for query state. Every mutation re-evaluates
the affected queries so stats always match masks. Directional queries test
pickups against the origin prism and dropoffs against the destination prism,
each with its own interval; merged queries are a flat disjunction of atomic
or directional members. A recurrence intersects a query's mask with the
pattern mask of its primary event: an atomic query's own kind, the origin
event for directional queries, and either event for merged ones.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace

from .civiltime import RecurrencePattern, pattern_slices
from .engine import ResultMask, eval_prism, eval_recurrence
from .errors import DomainError, NotFoundError
from .geom import EventKind, Polygon, Prism, TimeInterval
from .snapshot import ATTRIBUTES, DatasetSnapshot

PALETTE_SIZE = 12

# Categorical display palette, index == color id.
PALETTE = (
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b",
    "#e377c2", "#7f7f7f", "#bcbd22", "#17becf", "#aec7e8", "#ffbb78",
)


@dataclass(frozen=True)
class AtomicQuery:
    id: int
    prism: Prism
    kind: EventKind
    recurrence: RecurrencePattern | None
    color: int
    visible: bool = True

    variant = "atomic"


@dataclass(frozen=True)
class DirectionalQuery:
    id: int
    origin_prism: Prism
    destination_prism: Prism
    members: tuple[AtomicQuery, AtomicQuery]  # originals, restored on revert
    recurrence: RecurrencePattern | None
    color: int
    visible: bool = True

    variant = "directional"


@dataclass(frozen=True)
class MergedQuery:
    id: int
    members: tuple["AtomicQuery | DirectionalQuery", ...]
    recurrence: RecurrencePattern | None
    color: int
    visible: bool = True

    variant = "merged"

    def __post_init__(self) -> None:
        if not self.members:
            raise DomainError("merged query needs at least one member")
        if any(isinstance(m, MergedQuery) for m in self.members):
            raise DomainError("merged queries cannot nest")


QuerySpec = AtomicQuery | DirectionalQuery | MergedQuery


@dataclass(frozen=True)
class AttributeSummary:
    mean: float
    min: float
    max: float


@dataclass(frozen=True)
class TripStats:
    """Count plus per-attribute summary; attributes absent when count is 0."""

    count: int
    attributes: dict[str, AttributeSummary]

    def to_json(self) -> dict:
        return {
            "count": self.count,
            "attributes": {
                name: {"mean": s.mean, "min": s.min, "max": s.max} for name, s in self.attributes.items()
            },
        }


@dataclass(frozen=True)
class QueryResult:
    query_id: int
    mask: ResultMask
    stats: TripStats


@dataclass(frozen=True)
class SlicedPrismSet:
    """Concrete recurrence slices of a query's prism interval, for display."""

    query_id: int
    interval: TimeInterval
    slices: tuple[TimeInterval, ...]

    def to_json(self) -> dict:
        return {
            "query_id": self.query_id,
            "interval": [self.interval.start, self.interval.end],
            "slices": [[s.start, s.end] for s in self.slices],
        }


def compute_stats(snapshot: DatasetSnapshot, mask: ResultMask) -> TripStats:
    """Single-pass count/mean/min/max over the selected trips."""
    sel = mask.bits
    count = int(sel.sum())
    if count == 0:
        return TripStats(0, {})
    attrs = {}
    for name in ATTRIBUTES:
        vals = snapshot.column(name)[sel]
        attrs[name] = AttributeSummary(float(vals.mean()), float(vals.min()), float(vals.max()))
    return TripStats(count, attrs)


def effective_kind(spec: QuerySpec) -> EventKind:
    """Event a query's recurrence applies to."""
    if isinstance(spec, AtomicQuery):
        return spec.kind
    if isinstance(spec, DirectionalQuery):
        return EventKind.ORIGIN
    return EventKind.EITHER


def primary_interval(spec: QuerySpec) -> TimeInterval:
    """Interval sliced for display: own, origin's, or the members' envelope."""
    if isinstance(spec, AtomicQuery):
        return spec.prism.interval
    if isinstance(spec, DirectionalQuery):
        return spec.origin_prism.interval
    intervals = [primary_interval(m) for m in spec.members]
    return TimeInterval(min(i.start for i in intervals), max(i.end for i in intervals))


def evaluate_spec(snapshot: DatasetSnapshot, spec: QuerySpec, use_index: bool = True) -> ResultMask:
    """Full evaluation of one query spec, recurrence included."""
    if isinstance(spec, AtomicQuery):
        mask = eval_prism(snapshot, spec.prism, spec.kind, use_index)
    elif isinstance(spec, DirectionalQuery):
        origin = eval_prism(snapshot, spec.origin_prism, EventKind.ORIGIN, use_index)
        dest = eval_prism(snapshot, spec.destination_prism, EventKind.DESTINATION, use_index)
        mask = origin & dest
    else:
        mask = ResultMask.empty(snapshot.n)
        for member in spec.members:
            mask = mask | evaluate_spec(snapshot, member, use_index)
    if spec.recurrence is not None and not spec.recurrence.is_universal:
        mask = mask & eval_recurrence(snapshot, spec.recurrence, effective_kind(spec))
    return mask


def full_footprint(snapshot: DatasetSnapshot) -> Polygon:
    """Rectangle strictly containing every event position."""
    bbox = snapshot.bbox
    pad_x = max(1.0, bbox.width * 1e-6)
    pad_y = max(1.0, bbox.height * 1e-6)
    x0, x1 = bbox.min_x - pad_x, bbox.max_x + pad_x
    y0, y1 = bbox.min_y - pad_y, bbox.max_y + pad_y
    return Polygon(((x0, y0), (x1, y0), (x1, y1), (x0, y1)))


class QueryRegistry:
    """Ordered, single-writer collection of live queries for one snapshot."""

    def __init__(self, snapshot: DatasetSnapshot):
        self.snapshot = snapshot
        self._queries: dict[int, QuerySpec] = {}
        self._results: dict[int, QueryResult] = {}
        self._next_id = 1
        self._color_cycle = 0

    # --- introspection ---

    def ids(self) -> list[int]:
        return list(self._queries)

    def get(self, query_id: int) -> QuerySpec:
        try:
            return self._queries[query_id]
        except KeyError:
            raise NotFoundError(f"no query with id {query_id}") from None

    def result(self, query_id: int) -> QueryResult:
        self.get(query_id)
        return self._results[query_id]

    def specs(self) -> list[QuerySpec]:
        return list(self._queries.values())

    def results(self) -> dict[int, QueryResult]:
        return dict(self._results)

    def visible_results(self) -> list[QueryResult]:
        return [self._results[qid] for qid, spec in self._queries.items() if spec.visible]

    # --- internals ---

    def _allocate_color(self) -> int:
        used = {spec.color for spec in self._queries.values()}
        for i in range(PALETTE_SIZE):
            if i not in used:
                return i
        color = self._color_cycle % PALETTE_SIZE
        self._color_cycle += 1
        return color

    def _allocate_id(self) -> int:
        qid = self._next_id
        self._next_id += 1
        return qid

    def _commit(self, spec: QuerySpec) -> QueryResult:
        mask = evaluate_spec(self.snapshot, spec)
        result = QueryResult(spec.id, mask, compute_stats(self.snapshot, mask))
        self._queries[spec.id] = spec
        self._results[spec.id] = result
        return result

    # --- lifecycle operations ---

    def create_atomic(
        self,
        footprint: Polygon | None = None,
        interval: TimeInterval | None = None,
        kind: EventKind = EventKind.EITHER,
        recurrence: RecurrencePattern | None = None,
    ) -> QueryResult:
        """New atomic query; missing dimensions default to the full dataset."""
        if footprint is None and interval is None:
            raise DomainError("atomic query needs a footprint, an interval, or both")
        if footprint is None:
            footprint = full_footprint(self.snapshot)
        if interval is None:
            interval = self.snapshot.interval
        spec = AtomicQuery(
            id=self._allocate_id(),
            prism=Prism(footprint, interval),
            kind=kind,
            recurrence=recurrence,
            color=self._allocate_color(),
        )
        return self._commit(spec)

    def set_kind(self, query_id: int, kind: EventKind) -> QueryResult:
        spec = self.get(query_id)
        if not isinstance(spec, AtomicQuery):
            raise DomainError(f"query {query_id} is {spec.variant}; only atomic queries have a kind")
        return self._commit(replace(spec, kind=kind))

    def move_prism(self, query_id: int, prism: Prism, which: str = "origin") -> QueryResult:
        """Replace a query's prism; id and color stay stable."""
        spec = self.get(query_id)
        if isinstance(spec, AtomicQuery):
            return self._commit(replace(spec, prism=prism))
        if isinstance(spec, DirectionalQuery):
            if which == "origin":
                return self._commit(replace(spec, origin_prism=prism))
            if which == "destination":
                return self._commit(replace(spec, destination_prism=prism))
            raise DomainError(f"which must be 'origin' or 'destination', got {which!r}")
        raise DomainError("cannot move the prism of a merged query; edit its members")

    def set_visible(self, query_id: int, visible: bool) -> QueryResult:
        spec = self.get(query_id)
        return self._commit(replace(spec, visible=visible))

    def delete(self, query_id: int) -> None:
        self.get(query_id)
        del self._queries[query_id]
        del self._results[query_id]

    def link_directional(self, origin_id: int, destination_id: int) -> QueryResult:
        """Consume two atomic queries into one directional query."""
        origin = self.get(origin_id)
        destination = self.get(destination_id)
        if origin_id == destination_id:
            raise DomainError("cannot link a query to itself")
        if not isinstance(origin, AtomicQuery) or not isinstance(destination, AtomicQuery):
            raise DomainError("only atomic queries can be linked directionally")
        spec = DirectionalQuery(
            id=self._allocate_id(),
            origin_prism=origin.prism,
            destination_prism=destination.prism,
            members=(origin, destination),
            recurrence=None,
            color=self._allocate_color(),
        )
        self.delete(origin_id)
        self.delete(destination_id)
        return self._commit(spec)

    def revert_directional(self, query_id: int) -> tuple[QueryResult, QueryResult]:
        """Undo a link: restore the two original atomic queries."""
        spec = self.get(query_id)
        if not isinstance(spec, DirectionalQuery):
            raise DomainError(f"query {query_id} is {spec.variant}, not directional")
        self.delete(query_id)
        return tuple(self._commit(member) for member in spec.members)

    def merge(self, id_a: int, id_b: int) -> QueryResult:
        """Disjunction of two queries into one flat merged query."""
        if id_a == id_b:
            warnings.warn(f"merging query {id_a} with itself is a no-op")
            return self.result(id_a)
        a = self.get(id_a)
        b = self.get(id_b)

        def members_of(spec: QuerySpec) -> tuple:
            return spec.members if isinstance(spec, MergedQuery) else (spec,)

        if isinstance(a, MergedQuery):
            spec = replace(a, members=members_of(a) + members_of(b))
            self.delete(id_b)
            del self._queries[id_a], self._results[id_a]
        elif isinstance(b, MergedQuery):
            spec = replace(b, members=members_of(a) + members_of(b))
            self.delete(id_a)
            del self._queries[id_b], self._results[id_b]
        else:
            spec = MergedQuery(
                id=self._allocate_id(),
                members=(a, b),
                recurrence=None,
                color=self._allocate_color(),
            )
            self.delete(id_a)
            self.delete(id_b)
        return self._commit(spec)

    def demerge(self, query_id: int) -> list[QueryResult]:
        """Undo a merge: restore all members as independent queries."""
        spec = self.get(query_id)
        if not isinstance(spec, MergedQuery):
            raise DomainError(f"query {query_id} is {spec.variant}, not merged")
        self.delete(query_id)
        return [self._commit(member) for member in spec.members]

    def apply_recurrence(
        self, target: int | str, pattern: RecurrencePattern | None
    ) -> dict[int, SlicedPrismSet]:
        """Attach (or clear, with None) a recurrence on one query or all."""
        if target == "all":
            ids = self.ids()
        else:
            self.get(int(target))
            ids = [int(target)]
        slices: dict[int, SlicedPrismSet] = {}
        for qid in ids:
            spec = replace(self.get(qid), recurrence=pattern)
            self._commit(spec)
            slices[qid] = self.slices_for(qid)
        return slices

    def slices_for(self, query_id: int) -> SlicedPrismSet:
        """Display slices of a query's primary interval under its recurrence."""
        spec = self.get(query_id)
        interval = primary_interval(spec)
        if spec.recurrence is None or spec.recurrence.is_universal:
            parts: tuple[TimeInterval, ...] = (interval,)
        else:
            parts = tuple(pattern_slices(interval, spec.recurrence))
        return SlicedPrismSet(query_id=query_id, interval=interval, slices=parts)


# --- JSON wire schema ---


def prism_to_json(prism: Prism) -> dict:
    return {
        "polygon": [[x, y] for x, y in prism.footprint.vertices],
        "interval": [prism.interval.start, prism.interval.end],
    }


def prism_from_json(obj: dict) -> Prism:
    poly = Polygon(tuple((float(x), float(y)) for x, y in obj["polygon"]))
    start, end = obj["interval"]
    return Prism(poly, TimeInterval(int(start), int(end)))


def spec_to_json(spec: QuerySpec) -> dict:
    base = {
        "id": spec.id,
        "variant": spec.variant,
        "recurrence": spec.recurrence.to_json() if spec.recurrence else None,
        "color": spec.color,
        "visible": spec.visible,
    }
    if isinstance(spec, AtomicQuery):
        base["prism"] = prism_to_json(spec.prism)
        base["kind"] = spec.kind.value
    elif isinstance(spec, DirectionalQuery):
        base["origin_prism"] = prism_to_json(spec.origin_prism)
        base["destination_prism"] = prism_to_json(spec.destination_prism)
        base["members"] = [spec_to_json(m) for m in spec.members]
    else:
        base["members"] = [spec_to_json(m) for m in spec.members]
    return base


def spec_from_json(obj: dict, default_timezone: str = "UTC") -> QuerySpec:
    recurrence = obj.get("recurrence")
    pattern = RecurrencePattern.from_json(recurrence, default_timezone) if recurrence else None
    common = {
        "id": int(obj["id"]),
        "recurrence": pattern,
        "color": int(obj.get("color", 0)),
        "visible": bool(obj.get("visible", True)),
    }
    variant = obj.get("variant", "atomic")
    if variant == "atomic":
        return AtomicQuery(
            prism=prism_from_json(obj["prism"]),
            kind=EventKind(obj.get("kind", "either")),
            **common,
        )
    if variant == "directional":
        members = tuple(spec_from_json(m, default_timezone) for m in obj.get("members", []))
        if len(members) != 2 or not all(isinstance(m, AtomicQuery) for m in members):
            raise DomainError("directional query needs exactly two atomic members")
        return DirectionalQuery(
            origin_prism=prism_from_json(obj["origin_prism"]),
            destination_prism=prism_from_json(obj["destination_prism"]),
            members=members,  # type: ignore[arg-type]
            **common,
        )
    if variant == "merged":
        members = tuple(spec_from_json(m, default_timezone) for m in obj.get("members", []))
        if any(isinstance(m, MergedQuery) for m in members):
            raise DomainError("merged queries cannot nest")
        return MergedQuery(members=members, **common)
    raise DomainError(f"unknown query variant {variant!r}")
