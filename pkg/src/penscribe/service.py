"""HTTP service exposing the live virtual machine to operator consoles.

One engine thread owns the machine and serializes every mutation; HTTP
handlers only enqueue commands and read snapshots. Events fan out over
server-sent events without ever blocking the machine loop (slow
subscribers lose old events, and a late subscriber always gets a snapshot
first).

Endpoints:
    POST   /home                 start homing (409 while busy)
    POST   /jobs {"text": ...}   queue a writing job (409 while busy)
    GET    /jobs/{id}            job state, report included once done
    DELETE /jobs/{id}            abort the active job
    GET    /trace/{id}.svg       overlay SVG of a finished job
    GET    /events               text/event-stream of machine activity
    GET    /config               effective configuration

The simulation is paced to wall clock by `speed` (1.0 = live, 0 = as fast
as possible).
"""

from __future__ import annotations

import itertools
import json
import logging
import queue
import threading
import time
from collections import OrderedDict
from contextlib import asynccontextmanager
from dataclasses import dataclass

from fastapi import FastAPI, Request, Response
from fastapi.responses import JSONResponse, StreamingResponse

from .config import Settings
from .protocol import MoveDone
from .session import JobResult, MachineFault, VirtualMachine, home_machine, run_job

logger = logging.getLogger(__name__)

MAX_JOB_HISTORY = 100


@dataclass
class JobRecord:
    id: str
    text: str
    phase: str = "queued"
    points_total: int = 0
    points_done: int = 0
    last_error: str | None = None
    result: JobResult | None = None
    abort: bool = False

    def state_dict(self, position_mm: tuple[float, float, float]) -> dict:
        report = None
        if self.result is not None:
            report = self.result.report_dict()
        return {
            "id": self.id,
            "phase": self.phase,
            "points_total": self.points_total,
            "points_done": self.points_done,
            "current_position_mm": list(position_mm),
            "last_error": self.last_error,
            "report": report,
        }


class MachineEngine(threading.Thread):
    """Exclusive owner of the virtual machine; one command at a time."""

    def __init__(self, settings: Settings, speed: float = 1.0) -> None:
        super().__init__(name="machine-engine", daemon=True)
        self.settings = settings
        self.speed = speed
        self.vm = VirtualMachine(settings)
        self.vm.on_tick = self._on_tick
        self.interval = settings.host.event_interval_s
        self._commands: queue.Queue = queue.Queue()
        self._lock = threading.Lock()
        self._subscribers: list[queue.Queue] = []
        self._shutdown = threading.Event()
        self._busy = False
        self._phase = "idle"
        self._jobs: OrderedDict[str, JobRecord] = OrderedDict()
        self._active: JobRecord | None = None
        self._job_ids = itertools.count(1)
        self._trace_start = 0
        self._next_emit = 0.0
        self._sim0 = 0.0
        self._wall0 = 0.0

    # -- public API (called from HTTP handlers) ----------------------------

    def request_home(self) -> bool:
        with self._lock:
            if self._busy:
                return False
            self._busy = True
        self._commands.put(("home", None))
        return True

    def submit_job(self, text: str) -> JobRecord | None:
        with self._lock:
            if self._busy:
                return None
            self._busy = True
            record = JobRecord(id=f"j{next(self._job_ids)}", text=text)
            self._jobs[record.id] = record
            while len(self._jobs) > MAX_JOB_HISTORY:
                self._jobs.popitem(last=False)
        self._commands.put(("job", record))
        return record

    def job(self, job_id: str) -> JobRecord | None:
        with self._lock:
            return self._jobs.get(job_id)

    def abort_job(self, job_id: str) -> str:
        with self._lock:
            record = self._jobs.get(job_id)
            if record is None:
                return "unknown"
            if self._active is not record or record.phase in ("done", "failed"):
                return "not-active"
            record.abort = True
            return "aborting"

    def subscribe(self) -> queue.Queue:
        q: queue.Queue = queue.Queue(maxsize=1024)
        q.put_nowait(("snapshot", self.snapshot()))
        with self._lock:
            self._subscribers.append(q)
        return q

    def unsubscribe(self, q: queue.Queue) -> None:
        with self._lock:
            if q in self._subscribers:
                self._subscribers.remove(q)

    def snapshot(self) -> dict:
        x, y, z = self.vm.tip_mm()
        fw = self.vm.firmware.snapshot()
        with self._lock:
            active = self._active
            job = active.state_dict((x, y, z)) if active else None
            phase = self._phase
        path = self._recent_path()
        m = self.settings.machine
        return {
            "t": self.vm.time,
            "phase": phase,
            "machine_mode": fw["mode"],
            "homed": fw["homed"],
            "position": [x, y, z],
            "pen_down": self.vm.machine.pen_down(),
            "queue_depth": fw["queue_depth"],
            "job": job,
            "travel_mm": [m.x.travel_mm, m.y.travel_mm, m.z.travel_mm],
            "path": path,
        }

    def stop(self) -> None:
        self._shutdown.set()
        self._commands.put(("stop", None))

    def position_state(self) -> tuple[float, float, float]:
        return self.vm.tip_mm()

    # -- engine loop --------------------------------------------------------

    def run(self) -> None:
        while not self._shutdown.is_set():
            try:
                kind, payload = self._commands.get(timeout=0.05)
            except queue.Empty:
                self._publish_position()
                continue
            if kind == "stop":
                break
            try:
                if kind == "home":
                    self._do_home()
                elif kind == "job":
                    self._do_job(payload)
            except Exception:  # pragma: no cover - engine must not die
                logger.exception("engine command %s failed", kind)
            finally:
                with self._lock:
                    self._busy = False
                    self._active = None

    def _do_home(self) -> None:
        self._set_phase("homing")
        self._pace_reset()
        try:
            home_machine(self.vm)
            self._set_phase("idle")
        except MachineFault as e:
            logger.warning("homing failed: %s", e)
            self._set_phase("fault")

    def _do_job(self, record: JobRecord) -> None:
        with self._lock:
            self._active = record
        self._trace_start = self.vm.machine.trace.mark()
        self._pace_reset()

        def on_phase(name: str) -> None:
            record.phase = name
            self._set_phase(name, job_id=record.id)

        def on_plan(plan) -> None:
            record.points_total = len(plan.points)
            self._publish(
                "job",
                {
                    "id": record.id,
                    "phase": record.phase,
                    "points_done": 0,
                    "points_total": record.points_total,
                },
            )

        def on_feedback(fb, t) -> None:
            if isinstance(fb, MoveDone):
                record.points_done += 1
                self._publish_position()
                self._publish(
                    "job",
                    {
                        "id": record.id,
                        "phase": record.phase,
                        "points_done": record.points_done,
                        "points_total": record.points_total,
                    },
                )

        try:
            result = run_job(
                record.text,
                self.settings,
                vm=self.vm,
                on_feedback=on_feedback,
                should_abort=lambda: record.abort,
                on_phase=on_phase,
                on_plan=on_plan,
            )
            record.points_total = result.stream.points_total
            record.result = result
            record.last_error = result.stream.error
            record.phase = "done" if result.stream.ok else "failed"
        except MachineFault as e:
            record.last_error = str(e)
            record.phase = "failed"
        self._set_phase(record.phase, job_id=record.id)
        self._publish(
            "done",
            {
                "id": record.id,
                "phase": record.phase,
                "error": record.last_error,
                "report": record.result.report_dict() if record.result else None,
            },
        )
        self._set_phase("idle")

    # -- events & pacing ------------------------------------------------------

    def _set_phase(self, phase: str, job_id: str | None = None) -> None:
        with self._lock:
            self._phase = phase
        payload = {"phase": phase}
        if job_id is not None:
            payload["job_id"] = job_id
        self._publish("phase", payload)

    def _publish(self, kind: str, payload: dict) -> None:
        with self._lock:
            subs = list(self._subscribers)
        for q in subs:
            try:
                q.put_nowait((kind, payload))
            except queue.Full:
                try:  # drop the oldest so fresh state eventually lands
                    q.get_nowait()
                    q.put_nowait((kind, payload))
                except (queue.Empty, queue.Full):
                    pass

    def _publish_position(self) -> None:
        x, y, z = self.vm.tip_mm()
        fw = self.vm.firmware
        self._publish(
            "position",
            {
                "t": self.vm.time,
                "x": x,
                "y": y,
                "z": z,
                "pen_down": self.vm.machine.pen_down(),
                "queue_depth": len(fw.queue),
                "homed": fw.homed,
                "mode": fw.mode.value,
            },
        )

    def _recent_path(self, max_points: int = 4000) -> list[list[float]]:
        trace = self.vm.machine.trace.window(self._trace_start)
        pts: list[list[float]] = []
        runs = trace.pen_down_runs()
        total = sum(len(r) for r in runs)
        stride = max(1, total // max_points)
        for run in runs:
            for i in range(0, len(run), stride):
                pts.append([run[i][0], run[i][1]])
            if (len(run) - 1) % stride != 0:
                pts.append([run[-1][0], run[-1][1]])
            pts.append([])  # run separator
        return pts

    def _pace_reset(self) -> None:
        self._sim0 = self.vm.time
        self._wall0 = time.monotonic()
        self._next_emit = self.vm.time

    def _on_tick(self, vm: VirtualMachine) -> None:
        t = vm.time
        if t >= self._next_emit:
            self._next_emit = t + self.interval
            self._publish_position()
        if self.speed > 0:
            target = self._wall0 + (t - self._sim0) / self.speed
            now = time.monotonic()
            if target > now:
                time.sleep(min(target - now, 0.25))


def create_app(
    settings: Settings | None = None,
    speed: float = 1.0,
    console_dir: str | None = None,
) -> FastAPI:
    settings = settings or Settings()

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        engine = MachineEngine(settings, speed=speed)
        engine.start()
        app.state.engine = engine
        try:
            yield
        finally:
            engine.stop()
            engine.join(timeout=5.0)

    app = FastAPI(title="penscribe control service", lifespan=lifespan)

    if console_dir is not None:
        from fastapi.staticfiles import StaticFiles

        app.mount("/ui", StaticFiles(directory=console_dir, html=True), name="console")

    @app.post("/home")
    def post_home(request: Request):
        engine: MachineEngine = request.app.state.engine
        if not engine.request_home():
            return JSONResponse({"detail": "machine is busy"}, status_code=409)
        return {"status": "homing"}

    @app.post("/jobs")
    async def post_jobs(request: Request):
        try:
            body = await request.json()
        except Exception:
            return JSONResponse({"detail": "body must be JSON"}, status_code=400)
        if not isinstance(body, dict) or not isinstance(body.get("text"), str) or not body["text"].strip():
            return JSONResponse({"detail": 'body must be {"text": "..."}'}, status_code=400)
        engine: MachineEngine = request.app.state.engine
        record = engine.submit_job(body["text"])
        if record is None:
            return JSONResponse({"detail": "a job is already active"}, status_code=409)
        return JSONResponse({"id": record.id}, status_code=202)

    @app.get("/jobs/{job_id}")
    def get_job(job_id: str, request: Request):
        engine: MachineEngine = request.app.state.engine
        record = engine.job(job_id)
        if record is None:
            return JSONResponse({"detail": "unknown job"}, status_code=404)
        return record.state_dict(engine.position_state())

    @app.delete("/jobs/{job_id}")
    def delete_job(job_id: str, request: Request):
        engine: MachineEngine = request.app.state.engine
        outcome = engine.abort_job(job_id)
        if outcome == "unknown":
            return JSONResponse({"detail": "unknown job"}, status_code=404)
        if outcome == "not-active":
            return JSONResponse({"detail": "job is not active"}, status_code=409)
        return {"status": "aborting"}

    @app.get("/trace/{job_id}.svg")
    def get_trace(job_id: str, request: Request):
        engine: MachineEngine = request.app.state.engine
        record = engine.job(job_id)
        if record is None or record.result is None:
            return JSONResponse({"detail": "no trace for that job"}, status_code=404)
        return Response(content=record.result.svg, media_type="image/svg+xml")

    @app.get("/config")
    def get_config(request: Request):
        engine: MachineEngine = request.app.state.engine
        cfg = settings.as_dict()
        cfg["speed"] = engine.speed
        return cfg

    @app.get("/events")
    def get_events(request: Request):
        engine: MachineEngine = request.app.state.engine

        def gen():
            q = engine.subscribe()
            try:
                while True:
                    try:
                        kind, payload = q.get(timeout=15.0)
                    except queue.Empty:
                        yield ": keepalive\n\n"
                        continue
                    data = json.dumps(payload, sort_keys=True)
                    yield f"event: {kind}\ndata: {data}\n\n"
            finally:
                engine.unsubscribe(q)

        return StreamingResponse(gen(), media_type="text/event-stream")

    return app
