"""Emulated motion-controller firmware.

A single-owner state machine advanced one deterministic tick at a time:
each tick ingests any buffered serial input, dispatches complete commands
through the mode FSM (idle / homing / moving / fault), advances the active
motion by one time slice, and returns the feedback bytes produced.

Motion follows the proportional-speed rule: the axis with the largest step
delta runs at its maximum step rate and every other axis's cruise speed is
scaled by the exact ratio of its distance to the dominant distance, so a
move traces a straight line in step space. Each axis ramps with a
trapezoidal velocity profile (triangular when the distance is too short to
reach cruise) and always lands exactly on its target step count.

Queue accounting: an accepted move occupies a buffer slot until it
finishes; READY/DONE feedback reports capacity minus queue length at the
moment of emission.
"""

from __future__ import annotations

import enum
import math
from collections import deque
from dataclasses import dataclass

from .machine import (
    AXES,
    LimitViolation,
    MachineConfig,
    MachineSim,
    StepPosition,
)
from .protocol import (
    Command,
    Error,
    Feedback,
    FrameOverflow,
    FrameSplitter,
    Home,
    Homed,
    MalformedCommand,
    Move,
    MoveDone,
    Ready,
    encode_feedback,
    parse_command,
)

# Pen lifts first: home Z, then X, then Y.
HOMING_ORDER = (2, 0, 1)


class Mode(enum.Enum):
    IDLE = "idle"
    HOMING = "homing"
    MOVING = "moving"
    FAULT = "fault"


@dataclass(frozen=True)
class MotionPlan:
    """Per-axis deltas and cruise speeds for one straight-line move."""

    deltas: tuple[int, int, int]
    speeds: tuple[float, float, float]
    accels: tuple[float, float, float]
    dominant: int | None


def plan_move(current: StepPosition, target: StepPosition, config: MachineConfig) -> MotionPlan:
    """Plan a move: dominant axis at max rate, others ratio-scaled.

    Dominant axis = argmax |delta| with ties broken X over Y over Z. The
    dominant cruise speed is capped so no axis exceeds its own max rate
    (with uniform per-axis rates this is exactly the dominant axis's
    max_step_rate). Zero-delta axes get speed 0. A null move has
    dominant=None and completes immediately.
    """
    deltas = (target.x - current.x, target.y - current.y, target.z - current.z)
    accels = tuple(ax.accel_steps_s2 for ax in config.axes)
    if deltas == (0, 0, 0):
        return MotionPlan(deltas, (0.0, 0.0, 0.0), accels, None)
    dom = 0
    for i in (1, 2):
        if abs(deltas[i]) > abs(deltas[dom]):
            dom = i
    dmax = abs(deltas[dom])
    v_dom = min(
        config.axes[i].max_step_rate * dmax / abs(deltas[i])
        for i in range(3)
        if deltas[i] != 0
    )
    speeds = tuple(
        v_dom * abs(deltas[i]) / dmax if deltas[i] != 0 else 0.0 for i in range(3)
    )
    return MotionPlan(deltas, speeds, accels, dom)


class _AxisRun:
    """Discrete-time integrator for one axis of one move.

    Tracks a continuous position against the target distance, ramping at
    the axis acceleration up to the cruise speed and back down so the
    stopping distance never exceeds what remains; emits whole steps as the
    continuous position crosses step boundaries and clamps exactly onto
    the target.
    """

    __slots__ = ("axis", "sign", "target", "cruise", "accel", "v", "pos_f", "emitted", "v_floor")

    def __init__(self, axis: int, delta: int, cruise: float, accel: float) -> None:
        self.axis = axis
        self.sign = 1 if delta >= 0 else -1
        self.target = abs(delta)
        self.cruise = cruise
        self.accel = accel
        self.v = 0.0
        self.pos_f = 0.0
        self.emitted = 0
        # Never crawl below the one-step ramp speed or the move would only
        # finish asymptotically.
        self.v_floor = min(cruise, math.sqrt(2.0 * accel))

    @property
    def done(self) -> bool:
        return self.emitted >= self.target

    def advance(self, dt: float) -> int:
        """Advance one time slice; return signed steps to apply."""
        if self.emitted >= self.target:
            return 0
        rem = self.target - self.pos_f
        v = self.v + self.accel * dt
        if v > self.cruise:
            v = self.cruise
        v_stop = math.sqrt(2.0 * self.accel * rem)
        cap = v_stop if v_stop > self.v_floor else self.v_floor
        if v > cap:
            v = cap
        self.v = v
        pos = self.pos_f + v * dt
        if pos >= self.target - 1e-9:
            pos = float(self.target)
        self.pos_f = pos
        n = int(pos) - self.emitted
        if n:
            self.emitted += n
        return n * self.sign


class _HomingRun:
    __slots__ = ("stage", "phase", "acc", "steps_taken", "backoff_left")

    def __init__(self) -> None:
        self.stage = 0          # index into HOMING_ORDER
        self.phase = "seek"
        self.acc = 0.0          # fractional step budget carried between ticks
        self.steps_taken = 0    # commanded seek steps on the current axis
        self.backoff_left = 0


class Firmware:
    """The emulated controller. Advance only via tick()/run_homing().

    Safe to hand off between threads but never share mutably; all host
    interaction happens through the byte in/out buffers of tick().
    """

    def __init__(self, machine: MachineSim, config: MachineConfig | None = None,
                 tick_s: float = 0.001) -> None:
        self.machine = machine
        self.config = config or machine.config
        self.tick_s = tick_s
        self.mode = Mode.IDLE
        self.homed = False
        self.queue: deque[StepPosition] = deque()
        self.fault_reason: str | None = None
        self.t = 0.0
        self._pos = [0, 0, 0]
        self._framer = FrameSplitter()
        self._runs: list[_AxisRun] | None = None
        self._homing: _HomingRun | None = None

    # -- observable state -------------------------------------------------

    @property
    def position(self) -> StepPosition:
        return StepPosition(*self._pos)

    @property
    def free_slots(self) -> int:
        return self.config.buffer_capacity - len(self.queue)

    def snapshot(self) -> dict:
        return {
            "mode": self.mode.value,
            "homed": self.homed,
            "position": list(self._pos),
            "queue_depth": len(self.queue),
            "free_slots": self.free_slots,
            "fault": self.fault_reason,
        }

    # -- command dispatch --------------------------------------------------

    def handle_command(self, cmd: Command) -> Feedback | None:
        if isinstance(cmd, Home):
            if self.mode in (Mode.MOVING, Mode.HOMING) or self.queue:
                return Error("EBUSY", "machine is busy")
            # Re-homing is the recovery path out of a fault.
            self.fault_reason = None
            self.homed = False
            self.mode = Mode.HOMING
            self._homing = _HomingRun()
            return None
        if isinstance(cmd, Move):
            if self.mode is Mode.FAULT:
                return Error("EFAULT", self.fault_reason or "controller faulted")
            if not self.homed:
                return Error("ENOTHOMED", "home before moving")
            target = StepPosition(cmd.x, cmd.y, cmd.z)
            for i, ax in enumerate(self.config.axes):
                c = target[i]
                if c < 0 or c > ax.travel_steps:
                    return Error(
                        "EOUTOFBOUNDS",
                        f"{AXES[i]} target {c} outside [0, {ax.travel_steps}]",
                    )
            if len(self.queue) >= self.config.buffer_capacity:
                return Error("EQUEUEFULL", "move buffer full")
            self.queue.append(target)
            return Ready(self.free_slots)
        return Error("EPARSE", "unsupported command")  # pragma: no cover

    # -- scheduler ----------------------------------------------------------

    def tick(self, inbox: bytes = b"", dt: float | None = None) -> bytes:
        """One deterministic scheduler step; returns feedback bytes."""
        if dt is None:
            dt = self.tick_s
        out: list[Feedback] = []
        if inbox:
            for frame in self._framer.feed(inbox):
                if isinstance(frame, FrameOverflow):
                    out.append(Error("EPARSE", "line too long"))
                    continue
                try:
                    cmd = parse_command(frame)
                except MalformedCommand as e:
                    out.append(Error("EPARSE", str(e)[:120]))
                    continue
                fb = self.handle_command(cmd)
                if fb is not None:
                    out.append(fb)

        if self.mode is Mode.IDLE and self.queue and self.homed:
            self._start_move()
        active = False
        if self.mode is Mode.MOVING:
            active = True
            fb = self._advance_move(dt)
            if fb is not None:
                out.append(fb)
        elif self.mode is Mode.HOMING:
            active = True
            fb = self._advance_homing(dt)
            if fb is not None:
                out.append(fb)

        self.t += dt
        if active:
            self.machine.record(self.t)
        if not out:
            return b""
        return b"".join(encode_feedback(f) for f in out)

    def run_homing(self, coarse_dt: float = 0.25) -> bytes:
        """Start homing if needed and drive it to completion in coarse ticks.

        Same per-axis seek/backoff semantics as ticking at tick_s, just
        batched; useful for tests and fast-forwarded sessions.
        """
        out = bytearray()
        if self.mode is not Mode.HOMING:
            fb = self.handle_command(Home())
            if fb is not None:
                return encode_feedback(fb)
        while self.mode is Mode.HOMING:
            out += self.tick(b"", dt=coarse_dt)
        return bytes(out)

    def execute_plan(self, plan: MotionPlan, dt: float | None = None) -> int:
        """Run a raw motion plan to completion, bypassing the queue.

        Diagnostic/test path: no MoveDone is emitted. Returns ticks used.
        """
        if dt is None:
            dt = self.tick_s
        runs = self._runs_from(plan)
        ticks = 0
        while runs:
            self._apply_runs(runs, dt)
            runs = [r for r in runs if not r.done]
            ticks += 1
            self.t += dt
            self.machine.record(self.t)
            if self.mode is Mode.FAULT:
                break
        return ticks

    # -- internals -----------------------------------------------------------

    def _runs_from(self, plan: MotionPlan) -> list[_AxisRun]:
        return [
            _AxisRun(i, plan.deltas[i], plan.speeds[i], plan.accels[i])
            for i in range(3)
            if plan.deltas[i] != 0
        ]

    def _start_move(self) -> None:
        plan = plan_move(self.position, self.queue[0], self.config)
        self._runs = self._runs_from(plan)
        self.mode = Mode.MOVING

    def _apply_runs(self, runs: list[_AxisRun], dt: float) -> None:
        for run in runs:
            n = run.advance(dt)
            if n:
                try:
                    self.machine.step(run.axis, n)
                except LimitViolation as e:
                    self._fault(str(e))
                    return
                self._pos[run.axis] += n

    def _advance_move(self, dt: float) -> Feedback | None:
        runs = self._runs
        self._apply_runs(runs, dt)
        if self.mode is Mode.FAULT:
            return Error("ELIMIT", self.fault_reason or "travel limit")
        if all(r.done for r in runs):
            self.queue.popleft()
            self._runs = None
            self.mode = Mode.IDLE
            return MoveDone(self.free_slots)
        return None

    def _advance_homing(self, dt: float) -> Feedback | None:
        h = self._homing
        axis_i = HOMING_ORDER[h.stage]
        ax = self.config.axes[axis_i]
        h.acc += ax.max_step_rate * 0.5 * dt
        n = int(h.acc)
        if n <= 0:
            return None
        h.acc -= n

        if h.phase == "seek":
            if self.machine.switch_active(axis_i):
                h.phase = "backoff"
                h.backoff_left = ax.homing_backoff_steps
                return None
            if self.machine.switch_connected[axis_i]:
                to_switch = max(0, self.machine.physical()[axis_i])
                m = min(n, to_switch)
            else:
                m = n
            self.machine.seek_step(axis_i, -m)
            h.steps_taken += m
            if self.machine.switch_active(axis_i):
                h.phase = "backoff"
                h.backoff_left = ax.homing_backoff_steps
            elif h.steps_taken >= 2 * ax.travel_steps:
                self._fault(f"axis {AXES[axis_i]} never reached its switch")
                return Error("EHOMING", self.fault_reason)
            return None

        # backoff
        m = min(n, h.backoff_left)
        if m:
            self.machine.step(axis_i, m)
            h.backoff_left -= m
        if h.backoff_left == 0:
            self.machine.zero_here(axis_i)
            self._pos[axis_i] = 0
            h.stage += 1
            h.phase = "seek"
            h.steps_taken = 0
            if h.stage == len(HOMING_ORDER):
                self._homing = None
                self.homed = True
                self.mode = Mode.IDLE
                return Homed()
        return None

    def _fault(self, reason: str) -> None:
        self.mode = Mode.FAULT
        self.fault_reason = reason
        self.queue.clear()
        self._runs = None
        self._homing = None
        self.homed = False
