"""End-to-end job execution on the virtual machine.

A VirtualMachine bundles the physical axis simulation with the emulated
controller and exchanges bytes with it exactly as a USB serial link
would: host writes go into the controller's inbox, each poll advances the
simulation one tick and returns whatever feedback the controller wrote.

run_job() is the one pipeline both the CLI and the service use: plan the
text, home, stream the points under flow control, then measure deviation,
speed, and depth from the recorded trace and render the overlay SVG.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Callable

from .config import Settings
from .evaluation import (
    EmptyInput,
    NoDrawSegments,
    draw_depth_error,
    max_deviation,
    render_svg,
    writing_speed,
)
from .firmware import Firmware, Mode
from .font import StrokeGenerator
from .machine import MachineSim, mm_to_steps
from .pipeline import JobPlan, TargetPoint, plan_job
from .protocol import (
    Error,
    FrameSplitter,
    Home,
    Homed,
    MalformedFeedback,
    encode_command,
    parse_feedback,
)
from .streaming import StreamReport, stream_job
from .trace import PenTrace


class MachineFault(RuntimeError):
    pass


class VirtualMachine:
    """The simulated machine plus its controller, owned by one session."""

    def __init__(
        self,
        settings: Settings | None = None,
        start_mm: tuple[float, float, float] = (5.0, 5.0, 5.0),
        switch_connected: tuple[bool, bool, bool] = (True, True, True),
    ) -> None:
        self.settings = settings or Settings()
        self.machine = MachineSim(
            self.settings.machine,
            paper_surface_z_mm=self.settings.host.paper_surface_z_mm,
            start_mm=start_mm,
            switch_connected=switch_connected,
        )
        self.firmware = Firmware(
            self.machine, self.settings.machine, tick_s=self.settings.host.tick_s
        )
        self._inbox = bytearray()
        # Called after every tick; the service hooks events and pacing here.
        self.on_tick: Callable[[VirtualMachine], None] | None = None

    @property
    def time(self) -> float:
        return self.firmware.t

    def send(self, data: bytes) -> None:
        self._inbox += data

    def poll(self) -> bytes:
        if self._inbox:
            inbox = bytes(self._inbox)
            self._inbox.clear()
        else:
            inbox = b""
        out = self.firmware.tick(inbox)
        if self.on_tick is not None:
            self.on_tick(self)
        return out

    def tip_mm(self) -> tuple[float, float, float]:
        return self.machine.tip_mm()


def home_machine(vm: VirtualMachine, timeout_s: float = 900.0) -> float:
    """Home all axes; returns simulated seconds taken. Raises MachineFault."""
    t0 = vm.time
    vm.send(encode_command(Home()))
    framer = FrameSplitter()
    while True:
        for frame in framer.feed(vm.poll()):
            if not isinstance(frame, bytes):
                continue
            try:
                fb = parse_feedback(frame)
            except MalformedFeedback as e:
                raise MachineFault(f"garbled feedback during homing: {e}") from None
            if isinstance(fb, Homed):
                return vm.time - t0
            if isinstance(fb, Error):
                raise MachineFault(f"{fb.code}: {fb.message}")
        if vm.time - t0 > timeout_s:
            raise MachineFault(f"homing did not finish within {timeout_s} s")


@dataclass
class JobResult:
    plan: JobPlan
    stream: StreamReport
    trace: PenTrace
    homing_s: float
    max_deviation_mm: float | None
    writing_speed_mm_min: float | None
    max_depth_error_mm: float | None
    svg: bytes

    @property
    def status(self) -> str:
        return self.stream.status

    def report_dict(self) -> dict:
        return {
            "text": self.plan.text,
            "lines": list(self.plan.lines),
            "points_total": self.stream.points_total,
            "points_sent": self.stream.points_sent,
            "points_done": self.stream.points_done,
            "status": self.stream.status,
            "error": self.stream.error,
            "homing_s": self.homing_s,
            "duration_s": self.stream.duration_s,
            "max_deviation_mm": self.max_deviation_mm,
            "writing_speed_mm_min": self.writing_speed_mm_min,
            "max_depth_error_mm": self.max_depth_error_mm,
        }

    def report_json(self) -> bytes:
        return json.dumps(self.report_dict(), sort_keys=True, indent=2).encode("utf-8")


class _VMTransport:
    """Adapts a VirtualMachine to the streaming Transport protocol."""

    def __init__(self, vm: VirtualMachine) -> None:
        self._vm = vm

    def send(self, data: bytes) -> None:
        self._vm.send(data)

    def poll(self) -> bytes:
        return self._vm.poll()

    @property
    def time(self) -> float:
        return self._vm.time


def run_job(
    text: str,
    settings: Settings | None = None,
    vm: VirtualMachine | None = None,
    generator: StrokeGenerator | None = None,
    on_feedback: Callable[[object, float], None] | None = None,
    should_abort: Callable[[], bool] | None = None,
    on_phase: Callable[[str], None] | None = None,
    on_plan: Callable[[JobPlan], None] | None = None,
) -> JobResult:
    """Write `text` on the virtual machine and measure the result."""
    settings = settings or (vm.settings if vm is not None else Settings())
    if vm is None:
        vm = VirtualMachine(settings)
    machine_cfg, host = settings.machine, settings.host

    plan = plan_job(text, machine_cfg, host, generator)
    if on_plan is not None:
        on_plan(plan)
    trace_start = vm.machine.trace.mark()

    def phase(name: str) -> None:
        if on_phase is not None:
            on_phase(name)

    phase("homing")
    homing_s = home_machine(vm)

    phase("writing")
    transport = _VMTransport(vm)
    report = stream_job(
        plan.points,
        transport,
        machine_cfg.buffer_capacity,
        on_feedback=on_feedback,
        should_abort=should_abort,
    )

    if report.status == "aborted" and vm.firmware.mode is not Mode.FAULT:
        _lift_pen(vm, settings)

    trace = vm.machine.trace.window(trace_start)
    deviation = None
    speed = None
    depth = None
    if plan.reference_mm:
        try:
            deviation = max_deviation(plan.reference_mm, trace)
        except EmptyInput:
            deviation = None
        try:
            speed = writing_speed(trace)
        except NoDrawSegments:
            speed = None
        depth = draw_depth_error(
            trace,
            report.done_times,
            plan.draw_indices,
            host.paper_surface_z_mm,
            host.writing_depth_mm,
        )
    svg = render_svg(
        plan.reference_mm,
        trace,
        width_mm=machine_cfg.x.travel_mm,
        height_mm=machine_cfg.y.travel_mm,
    )
    phase("done" if report.ok else "failed")
    return JobResult(
        plan=plan,
        stream=report,
        trace=trace,
        homing_s=homing_s,
        max_deviation_mm=deviation,
        writing_speed_mm_min=speed,
        max_depth_error_mm=depth,
        svg=svg,
    )


def _lift_pen(vm: VirtualMachine, settings: Settings) -> None:
    host = settings.host
    z_lift = mm_to_steps(host.paper_surface_z_mm - host.pen_lift_mm, "z", settings.machine)
    pos = vm.firmware.position
    lift = TargetPoint(pos.x, pos.y, z_lift, "travel")
    stream_job([lift], _VMTransport(vm), settings.machine.buffer_capacity)
