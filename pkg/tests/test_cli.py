import hashlib
import json
import signal
import socket
import subprocess
import sys
import time
from pathlib import Path

import pytest

import synth
from odcube.cli import main
from odcube.snapshot import DatasetSnapshot


def run_cli(*args) -> int:
    return main([str(a) for a in args])


def dir_digest(root: Path) -> str:
    digest = hashlib.sha256()
    for path in sorted(root.rglob("*")):
        if path.is_file():
            digest.update(str(path.relative_to(root)).encode())
            digest.update(path.read_bytes())
    return digest.hexdigest()


@pytest.fixture()
def colmap_file(tmp_path):
    path = tmp_path / "colmap.json"
    path.write_text(json.dumps(synth.COLUMN_MAP_JSON))
    return path


@pytest.fixture()
def trips_csv(tmp_path):
    path = tmp_path / "trips.csv"
    synth.write_csv(path, synth.random_rows(60, seed=91))
    return path


class TestIngestCommand:
    def test_writes_snapshot_and_report(self, tmp_path, colmap_file, trips_csv):
        out = tmp_path / "snap.ods"
        report = tmp_path / "report.json"
        assert run_cli("ingest", trips_csv, "--map", colmap_file, "--out", out, "--report", report) == 0
        assert DatasetSnapshot.load(out).n == 60
        payload = json.loads(report.read_text())
        assert payload["accepted"] == 60

    def test_bad_column_map_exits_2(self, tmp_path, trips_csv):
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps({"columns": {"pickup_time": "x"}}))
        out = tmp_path / "snap.ods"
        assert run_cli("ingest", trips_csv, "--map", bad, "--out", out) == 2

    def test_rerun_byte_identical(self, tmp_path, colmap_file, trips_csv):
        out_a = tmp_path / "a.ods"
        out_b = tmp_path / "b.ods"
        assert run_cli("ingest", trips_csv, "--map", colmap_file, "--out", out_a) == 0
        assert run_cli("ingest", trips_csv, "--map", colmap_file, "--out", out_b) == 0
        assert out_a.read_bytes() == out_b.read_bytes()


def polygon_json(box):
    return [[x, y] for x, y in synth.mercator_box(box).vertices]


@pytest.fixture()
def airport_snapshot_file(tmp_path, colmap_file):
    rows, info = synth.airport_flow_rows()
    csv_path = tmp_path / "flows.csv"
    synth.write_csv(csv_path, rows)
    snap_path = tmp_path / "flows.ods"
    assert run_cli("ingest", csv_path, "--map", colmap_file, "--out", snap_path) == 0
    return snap_path, info


class TestQueryCommand:
    def test_empty_script_no_outputs(self, tmp_path, airport_snapshot_file):
        snap_path, _ = airport_snapshot_file
        script = tmp_path / "empty.json"
        script.write_text(json.dumps({"commands": []}))
        export = tmp_path / "out"
        assert run_cli("query", snap_path, "--script", script, "--export", export) == 0
        assert not export.exists() or list(export.iterdir()) == []

    def test_airport_directional_script(self, tmp_path, airport_snapshot_file):
        snap_path, info = airport_snapshot_file
        script = {
            "commands": [
                {"op": "create", "as": "lm", "footprint": polygon_json(synth.LOWER_MANHATTAN)},
                {"op": "create", "as": "jfk", "footprint": polygon_json(synth.JFK)},
                {"op": "link", "as": "lm_to_jfk", "origin": "lm", "destination": "jfk"},
                {"op": "create", "as": "lm2", "footprint": polygon_json(synth.LOWER_MANHATTAN)},
                {"op": "create", "as": "lga", "footprint": polygon_json(synth.LAGUARDIA)},
                {"op": "link", "as": "lm_to_lga", "origin": "lm2", "destination": "lga"},
                {"op": "export", "what": "stats", "query": "lm_to_jfk", "name": "jfk_stats"},
                {"op": "export", "what": "stats", "query": "lm_to_lga", "name": "lga_stats"},
                {"op": "export", "what": "timeseries", "query": "lm_to_jfk", "name": "jfk_series"},
            ]
        }
        script_path = tmp_path / "airports.json"
        script_path.write_text(json.dumps(script))
        export = tmp_path / "exports"
        assert run_cli("query", snap_path, "--script", script_path, "--export", export) == 0

        counts = json.loads((export / "counts.json").read_text())
        assert counts["lm_to_jfk"] == info["jfk_count"]
        assert counts["lm_to_lga"] == info["lga_count"]

        jfk_stats = json.loads((export / "jfk_stats.json").read_text())
        assert jfk_stats["count"] == info["jfk_count"]
        assert jfk_stats["attributes"]["fare"]["mean"] == pytest.approx(info["jfk_fare"])
        assert jfk_stats["attributes"]["fare"]["min"] == jfk_stats["attributes"]["fare"]["max"]

        series_rows = (export / "jfk_series.csv").read_text().strip().splitlines()
        assert series_rows[0] == "bucket_start,value"
        total = sum(int(r.split(",")[1]) for r in series_rows[1:])
        assert total == info["jfk_count"]

    def test_replay_deterministic(self, tmp_path, airport_snapshot_file):
        snap_path, _ = airport_snapshot_file
        script = {
            "commands": [
                {"op": "create", "as": "lm", "footprint": polygon_json(synth.LOWER_MANHATTAN)},
                {"op": "constrain", "constraints": [{"attribute": "fare", "min": 1.0}]},
                {"op": "export", "what": "stats", "query": "lm", "name": "lm_stats"},
                {"op": "export", "what": "histogram", "query": "lm", "attribute": "fare", "bins": 5, "name": "lm_hist"},
            ]
        }
        script_path = tmp_path / "script.json"
        script_path.write_text(json.dumps(script))
        out_a = tmp_path / "a"
        out_b = tmp_path / "b"
        assert run_cli("query", snap_path, "--script", script_path, "--export", out_a) == 0
        assert run_cli("query", snap_path, "--script", script_path, "--export", out_b) == 0
        assert dir_digest(out_a) == dir_digest(out_b)

    def test_unknown_op_exits_2(self, tmp_path, airport_snapshot_file):
        snap_path, _ = airport_snapshot_file
        script_path = tmp_path / "script.json"
        script_path.write_text(json.dumps({"commands": [{"op": "explode"}]}))
        assert run_cli("query", snap_path, "--script", script_path, "--export", tmp_path / "x") == 2


@pytest.fixture(scope="module")
def bench_snapshot(tmp_path_factory):
    path = tmp_path_factory.mktemp("bench") / "bench.ods"
    synth.make_snapshot(10_000, seed=93).save(path)
    return path


class TestBenchCommand:
    def test_ten_k_budget(self, tmp_path, bench_snapshot):
        out = tmp_path / "report.json"
        assert run_cli("bench", bench_snapshot, "--repeat", 5, "--warmup", 2, "--out", out) == 0
        report = json.loads(out.read_text())
        assert report["n"] == 10_000
        for op, row in report["operations"].items():
            assert row["p95_ms"] < 10.0, (op, row)

    def test_report_schema_stable(self, tmp_path, bench_snapshot):
        out_a = tmp_path / "a.json"
        out_b = tmp_path / "b.json"
        assert run_cli("bench", bench_snapshot, "--repeat", 2, "--warmup", 1, "--out", out_a) == 0
        assert run_cli("bench", bench_snapshot, "--repeat", 2, "--warmup", 1, "--out", out_b) == 0
        a = json.loads(out_a.read_text())
        b = json.loads(out_b.read_text())

        def shape(payload):
            return {
                "keys": sorted(payload),
                "ops": {op: sorted(row) for op, row in payload["operations"].items()},
            }

        assert shape(a) == shape(b)


def free_port() -> int:
    with socket.socket() as sock:
        sock.bind(("127.0.0.1", 0))
        return sock.getsockname()[1]


class TestServeCommand:
    def test_serve_health_metadata_and_sigterm(self, tmp_path):
        import httpx

        snap_path = tmp_path / "serve.ods"
        snapshot = synth.make_snapshot(25, seed=94)
        snapshot.save(snap_path)
        port = free_port()
        proc = subprocess.Popen(
            [sys.executable, "-m", "odcube", "serve", str(snap_path), "--port", str(port)],
            stdout=subprocess.PIPE,
            stderr=subprocess.STDOUT,
        )
        try:
            base = f"http://127.0.0.1:{port}"
            deadline = time.time() + 15
            last_error = None
            while time.time() < deadline:
                try:
                    response = httpx.get(f"{base}/health", timeout=1.0)
                    if response.status_code == 200:
                        break
                except Exception as exc:  # not up yet
                    last_error = exc
                    time.sleep(0.2)
            else:
                raise AssertionError(f"server never came up: {last_error}")
            meta = httpx.get(f"{base}/datasets/ds-1", timeout=2.0).json()
            assert meta["n"] == snapshot.n
            assert meta["interval"] == [snapshot.interval.start, snapshot.interval.end]
            proc.send_signal(signal.SIGTERM)
            assert proc.wait(timeout=10) == 0
        finally:
            if proc.poll() is None:
                proc.kill()
