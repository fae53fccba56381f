import json
import socket
import threading
import time

import httpx
import pytest
import uvicorn

from penscribe.config import load_settings
from penscribe.service import create_app
from penscribe.session import run_job


def free_port() -> int:
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        return s.getsockname()[1]


def start_server(settings, speed):
    port = free_port()
    app = create_app(settings, speed=speed)
    config = uvicorn.Config(app, host="127.0.0.1", port=port, log_level="warning")
    server = uvicorn.Server(config)
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    base = f"http://127.0.0.1:{port}"
    deadline = time.time() + 10
    while time.time() < deadline:
        try:
            httpx.get(base + "/config", timeout=1.0)
            break
        except httpx.HTTPError:
            time.sleep(0.05)
    else:
        raise RuntimeError("server did not come up")
    return server, thread, base


TEST_SETTINGS = {"flex_gain_mm_per_mm": "0.005"}


@pytest.fixture(scope="module")
def fast_server():
    settings = load_settings(None, TEST_SETTINGS)
    server, thread, base = start_server(settings, speed=0.0)
    yield base, settings
    server.should_exit = True
    thread.join(timeout=5)


@pytest.fixture()
def paced_server():
    settings = load_settings(None, TEST_SETTINGS)
    server, thread, base = start_server(settings, speed=30.0)
    yield base, settings
    server.should_exit = True
    thread.join(timeout=5)


def iter_sse(lines):
    event, data = None, []
    for line in lines:
        if line == "":
            if event or data:
                payload = json.loads("\n".join(data)) if data else None
                yield event or "message", payload
            event, data = None, []
        elif line.startswith("event: "):
            event = line[len("event: "):]
        elif line.startswith("data: "):
            data.append(line[len("data: "):])


def wait_for_job(base, job_id, timeout=60.0):
    deadline = time.time() + timeout
    while time.time() < deadline:
        state = httpx.get(f"{base}/jobs/{job_id}", timeout=5.0).json()
        if state["phase"] in ("done", "failed"):
            return state
        time.sleep(0.05)
    raise TimeoutError(f"job {job_id} did not finish")


def wait_until_idle(base, timeout=30.0):
    deadline = time.time() + timeout
    while time.time() < deadline:
        with httpx.stream("GET", base + "/events", timeout=10.0) as r:
            for kind, payload in iter_sse(r.iter_lines()):
                assert kind == "snapshot"
                if payload["phase"] in ("idle",) or payload["machine_mode"] == "idle":
                    return payload
                break
        time.sleep(0.1)
    raise TimeoutError("machine never settled")


class TestEndpoints:
    def test_config_reports_settings(self, fast_server):
        base, settings = fast_server
        cfg = httpx.get(base + "/config").json()
        assert cfg["x_steps_per_rev"] == settings.machine.x.steps_per_rev
        assert cfg["buffer_capacity"] == settings.machine.buffer_capacity
        assert "speed" in cfg

    def test_home_then_snapshot_shows_origin(self, fast_server):
        base, _ = fast_server
        r = httpx.post(base + "/home")
        assert r.status_code == 200
        deadline = time.time() + 20
        while time.time() < deadline:
            snap = wait_until_idle(base)
            if snap["homed"]:
                break
        assert snap["homed"] is True
        assert snap["position"][0] == pytest.approx(0.0, abs=1e-6)
        assert snap["position"][1] == pytest.approx(0.0, abs=1e-6)

    def test_job_runs_and_trace_matches_cli_output(self, fast_server):
        base, settings = fast_server
        r = httpx.post(base + "/jobs", json={"text": "hi"})
        assert r.status_code == 202
        job_id = r.json()["id"]
        state = wait_for_job(base, job_id)
        assert state["phase"] == "done"
        assert state["report"]["status"] == "ok"
        assert state["points_done"] == state["points_total"] > 0
        svg = httpx.get(f"{base}/trace/{job_id}.svg")
        assert svg.status_code == 200
        local = run_job("hi", settings)
        assert svg.content == local.svg
        assert state["report"]["max_deviation_mm"] == local.max_deviation_mm
        # speed is time-based; the server machine's clock is offset by its
        # earlier homing, which perturbs float sums in the last bits
        assert state["report"]["writing_speed_mm_min"] == pytest.approx(
            local.writing_speed_mm_min, rel=1e-9
        )

    def test_unknown_job_404(self, fast_server):
        base, _ = fast_server
        assert httpx.get(base + "/jobs/nope").status_code == 404
        assert httpx.delete(base + "/jobs/nope").status_code == 404
        assert httpx.get(base + "/trace/nope.svg").status_code == 404

    def test_malformed_body_400(self, fast_server):
        base, _ = fast_server
        assert httpx.post(base + "/jobs", content=b"not json").status_code == 400
        assert httpx.post(base + "/jobs", json={"nope": 1}).status_code == 400
        assert httpx.post(base + "/jobs", json={"text": "  "}).status_code == 400

    def test_delete_finished_job_409(self, fast_server):
        base, _ = fast_server
        job_id = httpx.post(base + "/jobs", json={"text": "a"}).json()["id"]
        wait_for_job(base, job_id)
        assert httpx.delete(f"{base}/jobs/{job_id}").status_code == 409


class TestConsoleMount:
    def test_static_console_served_at_ui(self, tmp_path):
        (tmp_path / "index.html").write_text("<html><body>console</body></html>")
        settings = load_settings(None, TEST_SETTINGS)
        from penscribe.service import create_app

        app = create_app(settings, speed=0.0, console_dir=str(tmp_path))
        port = free_port()
        config = uvicorn.Config(app, host="127.0.0.1", port=port, log_level="warning")
        server = uvicorn.Server(config)
        thread = threading.Thread(target=server.run, daemon=True)
        thread.start()
        try:
            base = f"http://127.0.0.1:{port}"
            deadline = time.time() + 10
            while time.time() < deadline:
                try:
                    r = httpx.get(base + "/ui/", timeout=1.0)
                    break
                except httpx.HTTPError:
                    time.sleep(0.05)
            assert r.status_code == 200 and b"console" in r.content
        finally:
            server.should_exit = True
            thread.join(timeout=5)


class TestBusyAndAbort:
    def test_second_job_409_then_abort_returns_idle(self, paced_server):
        base, _ = paced_server
        job_id = httpx.post(base + "/jobs", json={"text": "hello hello hello"}).json()["id"]
        r = httpx.post(base + "/jobs", json={"text": "again"})
        assert r.status_code == 409
        r = httpx.post(base + "/home")
        assert r.status_code == 409
        time.sleep(0.3)
        assert httpx.delete(f"{base}/jobs/{job_id}").json()["status"] == "aborting"
        state = wait_for_job(base, job_id, timeout=30)
        assert state["phase"] == "failed"
        assert state["points_done"] < state["points_total"]
        snap = wait_until_idle(base)
        assert snap["machine_mode"] == "idle"
        assert snap["pen_down"] is False


class TestEventStream:
    def test_snapshot_first_then_live_sequence(self, paced_server):
        base, _ = paced_server
        collected = []
        stop = threading.Event()

        def reader():
            with httpx.stream("GET", base + "/events", timeout=30.0) as r:
                for kind, payload in iter_sse(r.iter_lines()):
                    collected.append((kind, payload))
                    if kind == "done" or stop.is_set():
                        return

        t = threading.Thread(target=reader, daemon=True)
        t.start()
        time.sleep(0.3)
        job_id = httpx.post(base + "/jobs", json={"text": "hi"}).json()["id"]
        t.join(timeout=60)
        stop.set()
        assert collected, "no events received"
        assert collected[0][0] == "snapshot"
        kinds = [k for k, _ in collected]
        assert "phase" in kinds and "position" in kinds and "done" in kinds
        phases = [p["phase"] for k, p in collected if k == "phase"]
        assert "homing" in phases and "writing" in phases
        positions = [p for k, p in collected if k == "position"]
        ts = [p["t"] for p in positions]
        assert ts == sorted(ts)
        # sampling cadence: at least 20 Hz of simulated time while active
        moving = [p["t"] for p in positions if p["queue_depth"] > 0 or p["pen_down"]]
        diffs = [b - a for a, b in zip(moving, moving[1:]) if b - a > 1e-9]
        if diffs:
            assert sorted(diffs)[len(diffs) // 2] <= 0.05
        done = [p for k, p in collected if k == "done"][0]
        assert done["id"] == job_id
        assert done["report"]["status"] == "ok"
