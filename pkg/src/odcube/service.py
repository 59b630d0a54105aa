"""HTTP + WebSocket service over one active dataset session.

All committed state (dataset, queries, global attribute constraints) lives in
a single-writer session hub; every mutation bumps a revision. The brush is
ephemeral: WebSocket clients send sequence-numbered brush updates, the newest
pending update wins, and each pushed frame reflects one consistent
(revision, brush_seq) pair. Point data travels as binary frames (see
:mod:`odcube.pointbuffer`); everything else is JSON.
"""

from __future__ import annotations

import asyncio
import json
import os
from pathlib import Path

import numpy as np
from fastapi import FastAPI, Request, WebSocket, WebSocketDisconnect
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from . import aggregate, pointbuffer
from .engine import (
    AttributeConstraint,
    BrushSpec,
    ResultMask,
    classify,
    eval_attributes,
    eval_brush,
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
from .geom import EventKind, Polygon, Prism, TimeInterval
from .ingest import ColumnMap, NeighborhoodSet, load_neighborhoods, load_trips
from .manager import QueryRegistry, QueryResult, prism_from_json, spec_to_json
from .civiltime import RecurrencePattern
from .snapshot import DatasetSnapshot

DATA_DIR_ENV = "ODCUBE_DATA_DIR"


# --- request bodies ---


class ColumnMapBody(BaseModel):
    columns: dict[str, str]
    timestamp_format: str | None = None
    timezone: str | None = None
    delimiter: str | None = None


class DatasetBody(BaseModel):
    path: str
    column_map: ColumnMapBody | None = None
    reject_policy: str = "drop"


class PrismBody(BaseModel):
    polygon: list[tuple[float, float]]
    interval: tuple[int, int]


class CreateQueryBody(BaseModel):
    footprint: list[tuple[float, float]] | None = None
    interval: tuple[int, int] | None = None
    prism: PrismBody | None = None
    kind: str = "either"


class RecurrenceBody(BaseModel):
    weekdays: list[str | int] = []
    hour_range: tuple[int, int] | None = None
    timezone: str | None = None


class PatchQueryBody(BaseModel):
    kind: str | None = None
    prism: PrismBody | None = None
    footprint: list[tuple[float, float]] | None = None
    interval: tuple[int, int] | None = None
    which: str = "origin"
    recurrence: RecurrenceBody | None = None
    clear_recurrence: bool = False
    visible: bool | None = None


class RecurrenceRequestBody(BaseModel):
    target: int | str
    pattern: RecurrenceBody | None = None


class ConstraintBody(BaseModel):
    attribute: str
    min: float | None = None
    max: float | None = None


class ConstraintsBody(BaseModel):
    constraints: list[ConstraintBody]


class NeighborhoodsBody(BaseModel):
    path: str
    name_property: str = "name"


# --- session state ---


class SessionHub:
    """Single-writer session: active snapshot, queries, constraints, brush."""

    def __init__(self) -> None:
        self.datasets: dict[str, DatasetSnapshot] = {}
        self.active_id: str | None = None
        self.registry: QueryRegistry | None = None
        self.neighborhoods: NeighborhoodSet | None = None
        self.constraints: list[AttributeConstraint] = []
        self.brush: BrushSpec | None = None
        self.brush_seq: int = 0
        self.revision: int = 0
        self.subscribers: set[asyncio.Event] = set()
        self._dataset_counter = 0

    @property
    def snapshot(self) -> DatasetSnapshot:
        if self.active_id is None:
            raise DomainError("no dataset loaded")
        return self.datasets[self.active_id]

    def activate(self, snapshot: DatasetSnapshot) -> str:
        self._dataset_counter += 1
        dataset_id = f"ds-{self._dataset_counter}"
        self.datasets[dataset_id] = snapshot
        self.active_id = dataset_id
        self.registry = QueryRegistry(snapshot)
        self.constraints = []
        self.brush = None
        self.brush_seq = 0
        self.commit()
        return dataset_id

    def commit(self) -> int:
        """Bump the revision after a committed mutation and wake push loops."""
        self.revision += 1
        self.notify()
        return self.revision

    def notify(self) -> None:
        for event in self.subscribers:
            event.set()

    def require_registry(self) -> QueryRegistry:
        if self.registry is None:
            raise DomainError("no dataset loaded")
        return self.registry

    def global_mask(self) -> ResultMask:
        return eval_attributes(self.snapshot, self.constraints)

    def update_brush(self, seq: int, brush: BrushSpec | None) -> bool:
        """Latest-wins brush update; stale sequence numbers are dropped."""
        if seq <= self.brush_seq:
            return False
        self.brush_seq = seq
        self.brush = brush
        self.notify()
        return True

    def capture(self) -> dict:
        """Consistent view of the state one frame should reflect."""
        registry = self.require_registry()
        specs = [s for s in registry.specs() if s.visible]
        results = registry.results()
        return {
            "revision": self.revision,
            "brush_seq": self.brush_seq,
            "brush": self.brush,
            "specs": specs,
            "masks": [results[s.id].mask for s in specs],
            "constraints": list(self.constraints),
        }


def build_frame(snapshot: DatasetSnapshot, state: dict) -> tuple[dict, bytes]:
    """Evaluate one captured state into a control message plus binary frame."""
    global_mask = eval_attributes(snapshot, state["constraints"])
    brush_mask = eval_brush(snapshot, state["brush"]) if state["brush"] is not None else None
    status = classify(snapshot, global_mask, state["masks"], brush_mask)

    colors = np.full(snapshot.n, pointbuffer.NO_COLOR, dtype=np.uint8)
    for spec, mask in zip(reversed(state["specs"]), reversed(state["masks"])):
        colors[mask.bits] = spec.color

    frame = pointbuffer.encode(snapshot, status, colors, revision=state["revision"])
    control = {
        "type": "state",
        "revision": state["revision"],
        "brush_seq": state["brush_seq"],
        "stats": {
            "global_count": int(global_mask.count),
            "queries": {str(spec.id): int((mask & global_mask).count) for spec, mask in zip(state["specs"], state["masks"])},
            "brush_count": int((brush_mask & global_mask).count) if brush_mask is not None else None,
        },
    }
    return control, frame


def _query_payload(hub: SessionHub, result: QueryResult) -> dict:
    registry = hub.require_registry()
    return {
        "revision": hub.revision,
        "query": spec_to_json(registry.get(result.query_id)),
        "stats": result.stats.to_json(),
        "slices": registry.slices_for(result.query_id).to_json(),
    }


def _resolve_path(app_data_dir: Path | None, raw: str) -> Path:
    path = Path(raw)
    if not path.is_absolute() and app_data_dir is not None:
        path = app_data_dir / path
    return path


def _parse_span(raw: str | None, snapshot: DatasetSnapshot) -> TimeInterval:
    if not raw:
        return snapshot.interval
    try:
        start, end = (int(v) for v in raw.split(","))
    except ValueError as exc:
        raise DomainError(f"bad span {raw!r}; expected 'start,end'") from exc
    return TimeInterval(start, end)


def _mask_for_query(hub: SessionHub, query: str | None) -> ResultMask:
    snapshot = hub.snapshot
    if query in (None, "", "all"):
        base = ResultMask.full(snapshot.n)
    else:
        base = hub.require_registry().result(int(query)).mask
    return base & hub.global_mask()


def _pattern_from_body(body: RecurrenceBody | None, hub: SessionHub) -> RecurrencePattern | None:
    if body is None:
        return None
    return RecurrencePattern.from_json(body.model_dump(), default_timezone=hub.snapshot.timezone)


def create_app(snapshot: DatasetSnapshot | None = None, data_dir: str | Path | None = None) -> FastAPI:
    """Build the service; optionally preload one snapshot as the session."""
    app = FastAPI(title="odcube", version="0.1.0")
    hub = SessionHub()
    app.state.hub = hub
    env_dir = os.environ.get(DATA_DIR_ENV)
    app.state.data_dir = Path(data_dir) if data_dir else (Path(env_dir) if env_dir else None)
    if snapshot is not None:
        hub.activate(snapshot)

    @app.exception_handler(OdcubeError)
    async def _odcube_error(request: Request, exc: OdcubeError):
        status = 500
        if isinstance(exc, NotFoundError):
            status = 404
        elif isinstance(exc, (SchemaError, ParseError, ConfigError, EmptyDatasetError)):
            status = 422
        elif isinstance(exc, DomainError):
            status = 409
        return JSONResponse(status_code=status, content={"error": type(exc).__name__, "detail": str(exc)})

    @app.get("/health")
    async def health():
        return {"status": "ok"}

    # --- datasets ---

    @app.post("/datasets", status_code=201)
    async def create_dataset(body: DatasetBody):
        path = _resolve_path(app.state.data_dir, body.path)
        if not path.exists():
            raise NotFoundError(f"no such file: {path}")
        report = None
        if path.suffix == ".ods":
            snap = DatasetSnapshot.load(path)
        else:
            if body.column_map is None:
                raise SchemaError("column_map is required for CSV ingestion")
            cm = ColumnMap.from_json({k: v for k, v in body.column_map.model_dump().items() if v is not None})
            snap, ingest_report = load_trips(path, cm, reject_policy=body.reject_policy)
            report = ingest_report.to_json()
        dataset_id = hub.activate(snap)
        return {
            "id": dataset_id,
            "revision": hub.revision,
            "n": snap.n,
            "interval": [snap.interval.start, snap.interval.end],
            "bbox": [snap.bbox.min_x, snap.bbox.min_y, snap.bbox.max_x, snap.bbox.max_y],
            "timezone": snap.timezone,
            "report": report,
        }

    @app.get("/datasets/{dataset_id}")
    async def get_dataset(dataset_id: str):
        if dataset_id not in hub.datasets:
            raise NotFoundError(f"no dataset {dataset_id}")
        snap = hub.datasets[dataset_id]
        return {
            "id": dataset_id,
            "n": snap.n,
            "interval": [snap.interval.start, snap.interval.end],
            "bbox": [snap.bbox.min_x, snap.bbox.min_y, snap.bbox.max_x, snap.bbox.max_y],
            "timezone": snap.timezone,
            "active": dataset_id == hub.active_id,
        }

    @app.post("/neighborhoods")
    async def set_neighborhoods(body: NeighborhoodsBody):
        path = _resolve_path(app.state.data_dir, body.path)
        hub.neighborhoods = load_neighborhoods(path, name_property=body.name_property)
        hub.commit()
        return {"revision": hub.revision, "names": hub.neighborhoods.names, "warnings": list(hub.neighborhoods.warnings)}

    # --- session state ---

    @app.get("/session/state")
    async def session_state():
        registry = hub.require_registry()
        return {
            "revision": hub.revision,
            "dataset": hub.active_id,
            "brush_seq": hub.brush_seq,
            "constraints": [c.to_json() for c in hub.constraints],
            "queries": [_query_payload(hub, registry.result(qid)) for qid in registry.ids()],
        }

    # --- queries ---

    @app.post("/queries", status_code=201)
    async def create_query(body: CreateQueryBody):
        registry = hub.require_registry()
        footprint = None
        interval = None
        if body.prism is not None:
            prism = prism_from_json(body.prism.model_dump())
            footprint, interval = prism.footprint, prism.interval
        if body.footprint is not None:
            footprint = Polygon(tuple((float(x), float(y)) for x, y in body.footprint))
        if body.interval is not None:
            interval = TimeInterval(int(body.interval[0]), int(body.interval[1]))
        result = registry.create_atomic(footprint=footprint, interval=interval, kind=EventKind(body.kind))
        hub.commit()
        return _query_payload(hub, result)

    @app.get("/queries")
    async def list_queries():
        registry = hub.require_registry()
        return {
            "revision": hub.revision,
            "queries": [_query_payload(hub, registry.result(qid)) for qid in registry.ids()],
        }

    @app.get("/queries/{query_id}")
    async def get_query(query_id: int):
        registry = hub.require_registry()
        return _query_payload(hub, registry.result(query_id))

    @app.patch("/queries/{query_id}")
    async def patch_query(query_id: int, body: PatchQueryBody):
        registry = hub.require_registry()
        result = registry.result(query_id)
        if body.kind is not None:
            result = registry.set_kind(query_id, EventKind(body.kind))
        if body.prism is not None:
            result = registry.move_prism(query_id, prism_from_json(body.prism.model_dump()), which=body.which)
        elif body.footprint is not None or body.interval is not None:
            spec = registry.get(query_id)
            current = getattr(spec, "prism", None) or getattr(spec, f"{body.which}_prism", None)
            if current is None:
                raise DomainError(f"query {query_id} has no editable prism")
            footprint = Polygon(tuple(map(tuple, body.footprint))) if body.footprint else current.footprint
            interval = TimeInterval(*body.interval) if body.interval else current.interval
            result = registry.move_prism(query_id, Prism(footprint, interval), which=body.which)
        if body.recurrence is not None or body.clear_recurrence:
            pattern = None if body.clear_recurrence else _pattern_from_body(body.recurrence, hub)
            registry.apply_recurrence(query_id, pattern)
            result = registry.result(query_id)
        if body.visible is not None:
            result = registry.set_visible(query_id, body.visible)
        hub.commit()
        return _query_payload(hub, result)

    @app.delete("/queries/{query_id}")
    async def delete_query(query_id: int):
        registry = hub.require_registry()
        registry.delete(query_id)
        hub.commit()
        return {"revision": hub.revision, "deleted": query_id}

    @app.post("/queries/{origin_id}/link/{destination_id}", status_code=201)
    async def link_queries(origin_id: int, destination_id: int):
        registry = hub.require_registry()
        result = registry.link_directional(origin_id, destination_id)
        hub.commit()
        return _query_payload(hub, result)

    @app.post("/queries/{query_id}/revert")
    async def revert_query(query_id: int):
        registry = hub.require_registry()
        results = registry.revert_directional(query_id)
        hub.commit()
        return {"revision": hub.revision, "queries": [_query_payload(hub, r) for r in results]}

    @app.post("/queries/{id_a}/merge/{id_b}", status_code=201)
    async def merge_queries(id_a: int, id_b: int):
        registry = hub.require_registry()
        result = registry.merge(id_a, id_b)
        hub.commit()
        return _query_payload(hub, result)

    @app.post("/queries/{query_id}/demerge")
    async def demerge_query(query_id: int):
        registry = hub.require_registry()
        results = registry.demerge(query_id)
        hub.commit()
        return {"revision": hub.revision, "queries": [_query_payload(hub, r) for r in results]}

    @app.post("/recurrence")
    async def apply_recurrence(body: RecurrenceRequestBody):
        registry = hub.require_registry()
        pattern = _pattern_from_body(body.pattern, hub)
        target = body.target if body.target == "all" else int(body.target)
        slices = registry.apply_recurrence(target, pattern)
        hub.commit()
        return {
            "revision": hub.revision,
            "slices": {str(qid): s.to_json() for qid, s in slices.items()},
        }

    @app.put("/constraints")
    async def put_constraints(body: ConstraintsBody):
        hub.snapshot  # requires an active dataset
        hub.constraints = [AttributeConstraint(c.attribute, c.min, c.max) for c in body.constraints]
        hub.commit()
        return {"revision": hub.revision, "constraints": [c.to_json() for c in hub.constraints], "global_count": hub.global_mask().count}

    # --- aggregates ---

    @app.get("/aggregates/timeseries")
    async def aggregates_timeseries(
        query: str = "all",
        span: str | None = None,
        measure: str = "count",
        kind: str = "either",
        granularity: str = "auto",
    ):
        snapshot = hub.snapshot
        mask = _mask_for_query(hub, query)
        interval = _parse_span(span, snapshot)
        gran = aggregate.granularity_for(interval) if granularity == "auto" else aggregate.TimeGranularity(granularity)
        series = aggregate.time_series(snapshot, mask, interval, gran, measure, EventKind(kind))
        return {"revision": hub.revision, **series.to_json()}

    @app.get("/aggregates/histogram")
    async def aggregates_histogram(query: str = "all", attribute: str = "fare", bins: int = 20):
        snapshot = hub.snapshot
        mask = _mask_for_query(hub, query)
        hist = aggregate.histogram(snapshot, mask, attribute, bins)
        return {"revision": hub.revision, **hist.to_json()}

    @app.get("/aggregates/choropleth")
    async def aggregates_choropleth(query: str = "all", kind: str = "either"):
        snapshot = hub.snapshot
        if hub.neighborhoods is None:
            raise SchemaError("no neighborhoods loaded; POST /neighborhoods first")
        mask = _mask_for_query(hub, query)
        table = aggregate.choropleth(snapshot, mask, hub.neighborhoods, EventKind(kind))
        return {"revision": hub.revision, **table.to_json()}

    @app.get("/aggregates/stack")
    async def aggregates_stack(
        neighborhood: str,
        query: str = "all",
        span: str | None = None,
        kind: str = "either",
    ):
        snapshot = hub.snapshot
        if hub.neighborhoods is None:
            raise SchemaError("no neighborhoods loaded; POST /neighborhoods first")
        mask = _mask_for_query(hub, query)
        interval = _parse_span(span, snapshot)
        series = aggregate.choropleth_stack(snapshot, hub.neighborhoods, neighborhood, interval, EventKind(kind), mask)
        return {"revision": hub.revision, "neighborhood": neighborhood, **series.to_json()}

    # --- session stream ---

    async def _push_loop(ws: WebSocket, event: asyncio.Event) -> None:
        last_pushed: tuple[int, int] | None = None
        while True:
            await event.wait()
            event.clear()
            if hub.active_id is None:
                continue
            state = hub.capture()
            tag = (state["revision"], state["brush_seq"])
            if tag == last_pushed:
                continue
            control, frame = await asyncio.to_thread(build_frame, hub.snapshot, state)
            await ws.send_json(control)
            await ws.send_bytes(frame)
            last_pushed = tag

    @app.websocket("/session")
    async def session_ws(ws: WebSocket):
        await ws.accept()
        event = asyncio.Event()
        hub.subscribers.add(event)
        pusher = asyncio.create_task(_push_loop(ws, event))
        try:
            while True:
                raw = await ws.receive_text()
                try:
                    msg = json.loads(raw)
                    msg_type = msg.get("type")
                    if msg_type == "brush":
                        brush = None
                        if msg.get("brush") is not None:
                            spec = msg["brush"]
                            brush = BrushSpec(
                                origin_volume=prism_from_json(spec["origin_volume"]) if spec.get("origin_volume") else None,
                                destination_volume=prism_from_json(spec["destination_volume"]) if spec.get("destination_volume") else None,
                            )
                        hub.update_brush(int(msg["seq"]), brush)
                    elif msg_type == "ping":
                        await ws.send_json({"type": "pong", "revision": hub.revision, "brush_seq": hub.brush_seq})
                    else:
                        await ws.send_json({"type": "error", "message": f"unknown message type {msg_type!r}"})
                except (KeyError, ValueError, TypeError, OdcubeError) as exc:
                    await ws.send_json({"type": "error", "message": str(exc)})
        except WebSocketDisconnect:
            pass
        finally:
            hub.subscribers.discard(event)
            pusher.cancel()

    return app
