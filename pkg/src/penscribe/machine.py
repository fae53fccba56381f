"""Physical model of the 3-axis lead-screw pen machine.

Everything here is about the machine as a physical object: converting
between millimetres and motor steps, axis travel, the limit switch at each
axis origin, the frame flex that grows with distance from the Z lead
screws, and MachineSim, a steppable simulation of the axes that records
the pen-tip path.

Conventions:
  * the physical frame has its origin at each axis' switch trip point,
    positive into the workspace; Z is positive downward (toward paper);
  * the logical frame is what the controller reports after homing:
    logical = physical - homing_backoff (zero a backoff away from the
    switch);
  * mm→step rounding is half-away-from-zero, fixed globally.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

from .trace import PenTrace

AXES = ("x", "y", "z")

# Steps the carriage can push past the switch trip point before the hard stop.
SWITCH_OVERTRAVEL_STEPS = 256

# Homing seeks and backs off at this fraction of the axis' max step rate.
HOMING_RATE_FACTOR = 0.5


class ConfigError(ValueError):
    """Invalid machine configuration."""


class LimitViolation(RuntimeError):
    """A commanded step would push an axis outside its physical travel."""


def _round_half_away(v: float) -> int:
    n = int(math.floor(abs(v) + 0.5))
    return n if v >= 0 else -n


@dataclass(frozen=True)
class AxisParams:
    """Mechanical/electrical constants of one lead-screw axis.

    steps_per_rev folds together motor, gearbox, and drive mode;
    lead_pitch_mm is linear travel per lead-screw revolution.
    """

    steps_per_rev: int = 2048
    lead_pitch_mm: float = 2.0
    travel_mm: float = 220.0
    max_step_rate: float = 4250.0
    accel_steps_s2: float = 80000.0
    homing_backoff_steps: int = 16

    def __post_init__(self) -> None:
        if self.steps_per_rev < 1:
            raise ConfigError(f"steps_per_rev must be >= 1, got {self.steps_per_rev}")
        if not (math.isfinite(self.lead_pitch_mm) and self.lead_pitch_mm > 0):
            raise ConfigError(f"lead_pitch_mm must be finite and > 0, got {self.lead_pitch_mm}")
        if not (math.isfinite(self.travel_mm) and self.travel_mm > 0):
            raise ConfigError(f"travel_mm must be > 0, got {self.travel_mm}")
        if self.max_step_rate <= 0:
            raise ConfigError(f"max_step_rate must be > 0, got {self.max_step_rate}")
        if self.accel_steps_s2 <= 0:
            raise ConfigError(f"accel_steps_s2 must be > 0, got {self.accel_steps_s2}")
        if self.homing_backoff_steps < 0:
            raise ConfigError("homing_backoff_steps must be >= 0")

    @property
    def steps_per_mm(self) -> float:
        return self.steps_per_rev / self.lead_pitch_mm

    @property
    def mm_per_step(self) -> float:
        return self.lead_pitch_mm / self.steps_per_rev

    @property
    def travel_steps(self) -> int:
        return _round_half_away(self.travel_mm * self.steps_per_mm)


@dataclass(frozen=True)
class MachineConfig:
    """All mechanical/electrical parameters of the machine."""

    x: AxisParams = field(default_factory=AxisParams)
    y: AxisParams = field(default_factory=lambda: AxisParams(travel_mm=160.0))
    z: AxisParams = field(default_factory=lambda: AxisParams(travel_mm=30.0))
    flex_gain_mm_per_mm: float = 0.005
    flex_knee_mm: float = 50.0
    buffer_capacity: int = 8
    xy_offset_steps: int = 400

    def __post_init__(self) -> None:
        if self.buffer_capacity < 1:
            raise ConfigError(f"buffer_capacity must be >= 1, got {self.buffer_capacity}")
        if self.flex_gain_mm_per_mm < 0:
            raise ConfigError("flex_gain_mm_per_mm must be >= 0")
        if self.flex_knee_mm < 0:
            raise ConfigError("flex_knee_mm must be >= 0")

    def axis(self, name: str) -> AxisParams:
        if name not in AXES:
            raise ConfigError(f"unknown axis {name!r}")
        return getattr(self, name)

    @property
    def axes(self) -> tuple[AxisParams, AxisParams, AxisParams]:
        return (self.x, self.y, self.z)


class StepPosition(NamedTuple):
    """Axis coordinates in integer motor steps."""

    x: int
    y: int
    z: int

    def with_axis(self, index: int, value: int) -> "StepPosition":
        coords = list(self)
        coords[index] = value
        return StepPosition(*coords)


ORIGIN = StepPosition(0, 0, 0)


@dataclass(frozen=True)
class FlexModel:
    """Frame flex as a hinge function of distance from the Z lead screws.

    The Z lead screws mount along the machine's x=0 edge, so distance is
    simply the pen's x coordinate. Within `knee_mm` of the screws the frame
    is effectively rigid; beyond it the pen tip falls short of its commanded
    depth by gain * (distance - knee).
    """

    gain_mm_per_mm: float = 0.005
    knee_mm: float = 50.0

    @classmethod
    def from_config(cls, config: MachineConfig) -> "FlexModel":
        return cls(config.flex_gain_mm_per_mm, config.flex_knee_mm)


def mm_to_steps(mm: float, axis: str, config: MachineConfig) -> int:
    """Convert millimetres to motor steps: round(mm * steps_per_rev / pitch).

    Rounding is half-away-from-zero. Non-finite input is a contract
    violation and raises from the float→int conversion.
    """
    return _round_half_away(mm * config.axis(axis).steps_per_mm)


def steps_to_mm(steps: int, axis: str, config: MachineConfig) -> float:
    """Convert motor steps back to millimetres: steps * pitch / steps_per_rev."""
    return steps * config.axis(axis).lead_pitch_mm / config.axis(axis).steps_per_rev


def limit_switch_active(pos: StepPosition, axis: str, config: MachineConfig) -> bool:
    """True iff the axis coordinate is at or past the switch (physical frame).

    Switches sit at the origin of each axis; they are ideal (no hysteresis
    or bounce), so the active region is exactly (-inf, 0].
    """
    return getattr(pos, axis) <= 0


def flex_displacement(x_mm: float, y_mm: float, model: FlexModel) -> float:
    """Millimetres the pen tip falls short of its commanded depth at (x, y).

    Zero within the knee distance of the Z lead screws, then linear in the
    distance beyond it. The Y coordinate does not enter: the screws run
    along the whole x=0 edge.
    """
    d = x_mm if x_mm > 0.0 else 0.0
    excess = d - model.knee_mm
    if excess <= 0.0:
        return 0.0
    return model.gain_mm_per_mm * excess


class MachineSim:
    """Steppable physical axes with switches, flex, and trace recording.

    Owned by the firmware emulator; `step` moves one axis by a signed step
    count and enforces the hard travel limits, `seek_step` is the homing
    variant where a stalled motor skips steps at the hard stop instead of
    faulting. `record` appends the current pen-tip pose to the trace.
    """

    def __init__(
        self,
        config: MachineConfig,
        paper_surface_z_mm: float = 6.0,
        start_mm: tuple[float, float, float] = (5.0, 5.0, 5.0),
        switch_connected: tuple[bool, bool, bool] = (True, True, True),
    ) -> None:
        self.config = config
        self.flex = FlexModel.from_config(config)
        self.surface_z_mm = paper_surface_z_mm
        self.switch_connected = list(switch_connected)
        self.trace = PenTrace()
        # Physical position: switch trip point is 0; start is given in logical mm.
        self._phys = [
            ax.homing_backoff_steps + _round_half_away(start_mm[i] * ax.steps_per_mm)
            for i, ax in enumerate(config.axes)
        ]
        # Logical-zero offset per axis; refined by zero_here() when homing completes.
        self._zero = [ax.homing_backoff_steps for ax in config.axes]
        self._mm_per_step = [ax.mm_per_step for ax in config.axes]
        self._phys_max = [ax.travel_steps + ax.homing_backoff_steps for ax in config.axes]

    def physical(self) -> StepPosition:
        return StepPosition(*self._phys)

    def logical(self) -> StepPosition:
        return StepPosition(*(p - z for p, z in zip(self._phys, self._zero)))

    def switch_active(self, axis_index: int) -> bool:
        return self.switch_connected[axis_index] and self._phys[axis_index] <= 0

    def step(self, axis_index: int, steps: int) -> None:
        new = self._phys[axis_index] + steps
        if new < -SWITCH_OVERTRAVEL_STEPS or new > self._phys_max[axis_index]:
            raise LimitViolation(
                f"axis {AXES[axis_index]} step to physical {new} exits "
                f"[{-SWITCH_OVERTRAVEL_STEPS}, {self._phys_max[axis_index]}]"
            )
        self._phys[axis_index] = new

    def seek_step(self, axis_index: int, steps: int) -> None:
        # Homing drive: the motor keeps stepping but the carriage stalls at
        # the hard stop, so clamp instead of faulting.
        new = self._phys[axis_index] + steps
        lo = -SWITCH_OVERTRAVEL_STEPS
        hi = self._phys_max[axis_index]
        self._phys[axis_index] = min(max(new, lo), hi)

    def zero_here(self, axis_index: int) -> None:
        """Make the current physical position logical zero for the axis."""
        self._zero[axis_index] = self._phys[axis_index]

    def tip_mm(self) -> tuple[float, float, float]:
        """Physical pen-tip position in logical-frame millimetres (flex applied)."""
        x = (self._phys[0] - self._zero[0]) * self._mm_per_step[0]
        y = (self._phys[1] - self._zero[1]) * self._mm_per_step[1]
        z = (self._phys[2] - self._zero[2]) * self._mm_per_step[2]
        return x, y, z - flex_displacement(x, y, self.flex)

    def pen_down(self) -> bool:
        return self.tip_mm()[2] >= self.surface_z_mm - 1e-9

    def record(self, t: float) -> None:
        x, y, z = self.tip_mm()
        self.trace.append(t, x, y, z, z >= self.surface_z_mm - 1e-9)
