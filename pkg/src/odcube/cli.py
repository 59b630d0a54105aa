"""Command-line interface: ingest, scripted query sessions, bench, serve.

Script files mirror the service JSON schema so an interactive session can be
exported and replayed headlessly; replays are deterministic, so the exported
directory doubles as a regression fixture. Exit codes: 0 ok, 1 runtime error,
2 usage or schema error.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import aggregate
from .civiltime import RecurrencePattern
from .engine import AttributeConstraint, ResultMask, eval_prism, eval_recurrence
from .errors import ConfigError, DomainError, NotFoundError, OdcubeError, ParseError, SchemaError
from .geom import EventKind, Polygon, Prism, TimeInterval
from .ingest import DEFAULT_CITY_BOUNDS, ColumnMap, load_neighborhoods, load_trips
from .manager import QueryRegistry, compute_stats, prism_from_json, spec_to_json
from .snapshot import DatasetSnapshot

USAGE_ERROR_TYPES = (SchemaError, ParseError, ConfigError, json.JSONDecodeError)


def _load_json(path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def _write_json(path: Path, payload) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True, indent=2)
        fh.write("\n")


def _write_csv(path: Path, header: list[str], rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


# --- ingest ---


def cmd_ingest(args: argparse.Namespace) -> int:
    column_map = ColumnMap.from_json(_load_json(args.map))
    bounds = DEFAULT_CITY_BOUNDS
    if args.bounds:
        parts = [float(v) for v in args.bounds.split(",")]
        if len(parts) != 4:
            raise SchemaError("--bounds needs lon_min,lat_min,lon_max,lat_max")
        bounds = tuple(parts)
    snapshot, report = load_trips(args.csv, column_map, reject_policy=args.reject_policy, city_bounds=bounds)
    snapshot.save(args.out)
    if args.report:
        _write_json(Path(args.report), report.to_json())
    print(f"ingested {report.accepted} trips ({report.rejected} rejected) -> {args.out}")
    return 0


# --- scripted query sessions ---


class ScriptRunner:
    """Replays a command list against a registry, exporting data products."""

    def __init__(self, snapshot: DatasetSnapshot, export_dir: Path):
        self.snapshot = snapshot
        self.export_dir = export_dir
        self.registry = QueryRegistry(snapshot)
        self.constraints: list[AttributeConstraint] = []
        self.aliases: dict[str, int] = {}
        self.neighborhoods = None
        self.executed = 0

    def resolve(self, ref) -> int:
        if isinstance(ref, int):
            return ref
        if ref in self.aliases:
            return self.aliases[ref]
        try:
            return int(ref)
        except (TypeError, ValueError):
            raise NotFoundError(f"unknown query reference {ref!r}") from None

    def _register(self, alias, query_id: int) -> None:
        if alias:
            self.aliases[str(alias)] = query_id

    def effective_mask(self, query_id: int) -> ResultMask:
        from .engine import eval_attributes

        return self.registry.result(query_id).mask & eval_attributes(self.snapshot, self.constraints)

    def run(self, commands: list[dict]) -> None:
        for command in commands:
            self.step(command)
            self.executed += 1
        if self.executed:
            self.export_counts("counts")

    def step(self, command: dict) -> None:
        op = command.get("op")
        handler = getattr(self, f"op_{op}", None)
        if handler is None:
            raise SchemaError(f"unknown script op {op!r}")
        handler(command)

    def op_create(self, command: dict) -> None:
        footprint = None
        interval = None
        if command.get("prism"):
            prism = prism_from_json(command["prism"])
            footprint, interval = prism.footprint, prism.interval
        if command.get("footprint"):
            footprint = Polygon(tuple((float(x), float(y)) for x, y in command["footprint"]))
        if command.get("interval"):
            interval = TimeInterval(int(command["interval"][0]), int(command["interval"][1]))
        kind = EventKind(command.get("kind", "either"))
        result = self.registry.create_atomic(footprint=footprint, interval=interval, kind=kind)
        self._register(command.get("as"), result.query_id)

    def op_set_kind(self, command: dict) -> None:
        self.registry.set_kind(self.resolve(command["query"]), EventKind(command["kind"]))

    def op_move(self, command: dict) -> None:
        qid = self.resolve(command["query"])
        spec = self.registry.get(qid)
        which = command.get("which", "origin")
        current = getattr(spec, "prism", None) or getattr(spec, f"{which}_prism", None)
        if current is None:
            raise DomainError(f"query {qid} has no editable prism")
        footprint = (
            Polygon(tuple((float(x), float(y)) for x, y in command["footprint"]))
            if command.get("footprint")
            else current.footprint
        )
        interval = (
            TimeInterval(int(command["interval"][0]), int(command["interval"][1]))
            if command.get("interval")
            else current.interval
        )
        self.registry.move_prism(qid, Prism(footprint, interval), which=which)

    def op_link(self, command: dict) -> None:
        result = self.registry.link_directional(self.resolve(command["origin"]), self.resolve(command["destination"]))
        self._register(command.get("as"), result.query_id)

    def op_merge(self, command: dict) -> None:
        result = self.registry.merge(self.resolve(command["a"]), self.resolve(command["b"]))
        self._register(command.get("as"), result.query_id)

    def op_recur(self, command: dict) -> None:
        pattern = None
        if command.get("pattern"):
            pattern = RecurrencePattern.from_json(command["pattern"], default_timezone=self.snapshot.timezone)
        target = command.get("target", "all")
        self.registry.apply_recurrence(target if target == "all" else self.resolve(target), pattern)

    def op_constrain(self, command: dict) -> None:
        self.constraints = [AttributeConstraint.from_json(c) for c in command.get("constraints", [])]

    def op_neighborhoods(self, command: dict) -> None:
        self.neighborhoods = load_neighborhoods(command["path"], name_property=command.get("name_property", "name"))

    def op_delete(self, command: dict) -> None:
        self.registry.delete(self.resolve(command["query"]))

    def op_export(self, command: dict) -> None:
        what = command.get("what")
        name = command.get("name") or what
        if what == "stats":
            qid = self.resolve(command["query"])
            stats = compute_stats(self.snapshot, self.effective_mask(qid))
            payload = {"query": str(command["query"]), "id": qid, **stats.to_json()}
            _write_json(self.export_dir / f"{name}.json", payload)
        elif what == "spec":
            qid = self.resolve(command["query"])
            _write_json(self.export_dir / f"{name}.json", spec_to_json(self.registry.get(qid)))
        elif what == "counts":
            self.export_counts(name)
        elif what == "timeseries":
            self.export_timeseries(command, name)
        elif what == "histogram":
            self.export_histogram(command, name)
        elif what == "choropleth":
            self.export_choropleth(command, name)
        else:
            raise SchemaError(f"unknown export kind {what!r}")

    def _mask_for(self, command: dict) -> ResultMask:
        from .engine import eval_attributes

        ref = command.get("query", "all")
        if ref == "all":
            return ResultMask.full(self.snapshot.n) & eval_attributes(self.snapshot, self.constraints)
        return self.effective_mask(self.resolve(ref))

    def _span_for(self, command: dict) -> TimeInterval:
        if command.get("span"):
            return TimeInterval(int(command["span"][0]), int(command["span"][1]))
        return self.snapshot.interval

    def export_counts(self, name: str) -> None:
        payload = {}
        reverse = {qid: alias for alias, qid in self.aliases.items()}
        for qid in self.registry.ids():
            key = reverse.get(qid, str(qid))
            payload[key] = self.effective_mask(qid).count
        _write_json(self.export_dir / f"{name}.json", payload)

    def export_timeseries(self, command: dict, name: str) -> None:
        span = self._span_for(command)
        gran = (
            aggregate.TimeGranularity(command["granularity"])
            if command.get("granularity")
            else aggregate.granularity_for(span)
        )
        series = aggregate.time_series(
            self.snapshot,
            self._mask_for(command),
            span,
            gran,
            command.get("measure", "count"),
            EventKind(command.get("kind", "either")),
        )
        rows = [
            [int(s), "" if isinstance(v, float) and not np.isfinite(v) else v]
            for s, v in zip(series.bucket_starts.tolist(), series.values.tolist())
        ]
        _write_csv(self.export_dir / f"{name}.csv", ["bucket_start", "value"], rows)

    def export_histogram(self, command: dict, name: str) -> None:
        hist = aggregate.histogram(
            self.snapshot, self._mask_for(command), command.get("attribute", "fare"), int(command.get("bins", 10))
        )
        rows = [
            [float(hist.edges[i]), float(hist.edges[i + 1]), int(c)]
            for i, c in enumerate(hist.counts.tolist())
        ]
        _write_csv(self.export_dir / f"{name}.csv", ["lo", "hi", "count"], rows)

    def export_choropleth(self, command: dict, name: str) -> None:
        if command.get("neighborhoods"):
            self.neighborhoods = load_neighborhoods(command["neighborhoods"])
        if self.neighborhoods is None:
            raise SchemaError("choropleth export needs neighborhoods")
        table = aggregate.choropleth(
            self.snapshot, self._mask_for(command), self.neighborhoods, EventKind(command.get("kind", "either"))
        )
        rows = [[region, count] for region, count in table.counts.items()]
        rows.append(["unassigned", table.unassigned])
        _write_csv(self.export_dir / f"{name}.csv", ["region", "count"], rows)


def cmd_query(args: argparse.Namespace) -> int:
    snapshot = DatasetSnapshot.load(args.snapshot)
    script = _load_json(args.script)
    commands = script.get("commands", [])
    runner = ScriptRunner(snapshot, Path(args.export))
    runner.run(commands)
    print(f"executed {runner.executed} commands -> {args.export}")
    return 0


# --- bench ---


def _random_polygon(rng: np.random.Generator, cx: float, cy: float, radius: float, vertices: int) -> Polygon:
    angles = np.sort(rng.uniform(0, 2 * np.pi, vertices))
    radii = radius * rng.uniform(0.5, 1.0, vertices)
    xs = cx + radii * np.cos(angles)
    ys = cy + radii * np.sin(angles)
    return Polygon(tuple(zip(xs.tolist(), ys.tolist())))


def _random_prism(rng: np.random.Generator, snapshot: DatasetSnapshot, vertices: int) -> Prism:
    i = int(rng.integers(snapshot.n))
    cx = float(snapshot.pickup_x[i])
    cy = float(snapshot.pickup_y[i])
    radius = max(snapshot.bbox.width, snapshot.bbox.height, 1.0) * rng.uniform(0.02, 0.2)
    span = snapshot.interval.duration
    start = snapshot.interval.start + int(rng.integers(0, max(span // 2, 1)))
    end = min(start + int(span * rng.uniform(0.1, 0.8)) + 1, snapshot.interval.end)
    return Prism(_random_polygon(rng, cx, cy, radius, vertices), TimeInterval(start, end))


def _random_pattern(rng: np.random.Generator, timezone: str) -> RecurrencePattern:
    weekdays = frozenset(int(d) for d in rng.choice(7, size=int(rng.integers(1, 4)), replace=False))
    lo = int(rng.integers(0, 1380))
    hi = int(rng.integers(lo + 1, 1441))
    return RecurrencePattern(weekdays=weekdays, hour_range=(lo, hi), timezone=timezone)


def run_bench(snapshot: DatasetSnapshot, workload: dict, repeat: int, warmup: int) -> dict:
    """Latency table (p50/p95 ms) per operation class, steady-state only."""
    rng = np.random.default_rng(int(workload.get("seed", 42)))
    cases = int(workload.get("cases", 20))
    vertices = int(workload.get("vertices", 8))
    kinds = (EventKind.ORIGIN, EventKind.DESTINATION, EventKind.EITHER)
    operations = workload.get("operations", ["prism", "directional", "recurrence", "stats", "timeseries"])

    prisms = [_random_prism(rng, snapshot, vertices) for _ in range(cases)]
    patterns = [_random_pattern(rng, snapshot.timezone) for _ in range(cases)]
    masks = [eval_prism(snapshot, p, EventKind.EITHER) for p in prisms]
    span = snapshot.interval
    gran = aggregate.granularity_for(span)

    def make_runner(op: str, i: int):
        prism = prisms[i]
        pattern = patterns[i]
        mask = masks[i]
        kind = kinds[i % 3]
        if op == "prism":
            return lambda: eval_prism(snapshot, prism, kind)
        if op == "directional":
            other = prisms[(i + 1) % cases]
            return lambda: eval_prism(snapshot, prism, EventKind.ORIGIN) & eval_prism(snapshot, other, EventKind.DESTINATION)
        if op == "recurrence":
            return lambda: eval_recurrence(snapshot, pattern, kind)
        if op == "stats":
            return lambda: compute_stats(snapshot, mask)
        if op == "timeseries":
            return lambda: aggregate.time_series(snapshot, mask, span, gran, "count", EventKind.EITHER)
        raise SchemaError(f"unknown bench operation {op!r}")

    report_ops = {}
    for op in operations:
        samples = []
        for i in range(cases):
            runner = make_runner(op, i)
            for _ in range(warmup):
                runner()
            for _ in range(repeat):
                t0 = time.perf_counter()
                runner()
                samples.append((time.perf_counter() - t0) * 1000.0)
        arr = np.asarray(samples)
        report_ops[op] = {
            "cases": cases,
            "samples": len(samples),
            "p50_ms": float(np.percentile(arr, 50)),
            "p95_ms": float(np.percentile(arr, 95)),
            "max_ms": float(arr.max()),
        }
    return {
        "n": snapshot.n,
        "repeat": repeat,
        "warmup": warmup,
        "seed": int(workload.get("seed", 42)),
        "operations": report_ops,
    }


def cmd_bench(args: argparse.Namespace) -> int:
    snapshot = DatasetSnapshot.load(args.snapshot)
    workload = _load_json(args.workload) if args.workload else {}
    report = run_bench(snapshot, workload, repeat=args.repeat, warmup=args.warmup)
    print(f"{'operation':<14} {'p50 ms':>10} {'p95 ms':>10} {'max ms':>10}")
    for op, row in report["operations"].items():
        print(f"{op:<14} {row['p50_ms']:>10.3f} {row['p95_ms']:>10.3f} {row['max_ms']:>10.3f}")
    if args.out:
        _write_json(Path(args.out), report)
    return 0


# --- serve ---


def cmd_serve(args: argparse.Namespace) -> int:
    import signal

    import uvicorn

    from .service import create_app

    # uvicorn re-raises SIGTERM after draining; swallow it so an orchestrated
    # stop reports a clean exit instead of death-by-signal.
    try:
        signal.signal(signal.SIGTERM, lambda signum, frame: None)
    except ValueError:
        pass  # not in the main thread
    snapshot = DatasetSnapshot.load(args.snapshot) if args.snapshot else None
    app = create_app(snapshot=snapshot)
    uvicorn.run(app, host=args.host, port=args.port, log_level=args.log_level)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="odcube", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="load a trip CSV into a snapshot file")
    p.add_argument("csv")
    p.add_argument("--map", required=True, help="column map JSON")
    p.add_argument("--out", required=True, help="snapshot output path")
    p.add_argument("--report", help="write the ingest report JSON here")
    p.add_argument("--reject-policy", default="drop", choices=["drop", "fail"])
    p.add_argument("--bounds", help="lon_min,lat_min,lon_max,lat_max city filter")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("query", help="replay a scripted query session")
    p.add_argument("snapshot")
    p.add_argument("--script", required=True)
    p.add_argument("--export", required=True, help="export directory")
    p.set_defaults(func=cmd_query)

    p = sub.add_parser("bench", help="latency benchmark over a snapshot")
    p.add_argument("snapshot")
    p.add_argument("--workload", help="workload spec JSON")
    p.add_argument("--repeat", type=int, default=5)
    p.add_argument("--warmup", type=int, default=2)
    p.add_argument("--out", help="write the report JSON here")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("serve", help="launch the HTTP/WebSocket service")
    p.add_argument("snapshot", nargs="?")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--log-level", default="warning")
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except USAGE_ERROR_TYPES as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OdcubeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
