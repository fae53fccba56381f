"""Configuration: defaults, the key=value file format, and overrides.

One flat plain-text file configures both the machine model and the host
pipeline. Keys carry their units, values are numbers, booleans, or bare
strings; '#' starts a comment. Axis keys are prefixed x_/y_/z_:

    x_travel_mm = 220
    z_max_step_rate = 4100
    flex_gain_mm_per_mm = 0.005
    compensation_enabled = true
    chars_per_line = 24

Every key has a default; unknown keys are rejected. The default
max_step_rate is calibrated so a default-config writing job measures
about 200 mm/min at the pen tip (feed = rate / (steps_per_rev / pitch),
minus per-stroke ramp and pen-transition overhead).
"""

from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass, field, replace
from pathlib import Path

from .machine import AXES, AxisParams, ConfigError, MachineConfig

ENV_CONFIG_PATH = "PENSCRIBE_CONFIG"


@dataclass(frozen=True)
class HostConfig:
    """Host-side pipeline and simulation parameters."""

    chars_per_line: int = 24
    letter_height_mm: float = 8.0
    letter_spacing_mm: float = 0.0
    line_pitch_mm: float = 12.0
    margin_x_mm: float = 10.0
    margin_y_mm: float = 10.0
    paper_surface_z_mm: float = 6.0
    pen_lift_mm: float = 2.0
    writing_depth_mm: float = 0.5
    compensation_enabled: bool = True
    # None means "mirror the machine's flex model".
    comp_gain_mm_per_mm: float | None = None
    comp_knee_mm: float | None = None
    placeholder_glyph: str = "?"
    strict_glyphs: bool = False
    tick_s: float = 0.001
    event_interval_s: float = 0.02

    def __post_init__(self) -> None:
        if self.chars_per_line < 1:
            raise ConfigError("chars_per_line must be >= 1")
        if self.letter_height_mm <= 0 or self.line_pitch_mm <= 0:
            raise ConfigError("letter_height_mm and line_pitch_mm must be > 0")
        if self.tick_s <= 0:
            raise ConfigError("tick_s must be > 0")

    def comp_gain(self, machine: MachineConfig) -> float:
        g = self.comp_gain_mm_per_mm
        return machine.flex_gain_mm_per_mm if g is None else g

    def comp_knee(self, machine: MachineConfig) -> float:
        k = self.comp_knee_mm
        return machine.flex_knee_mm if k is None else k


@dataclass(frozen=True)
class Settings:
    machine: MachineConfig = field(default_factory=MachineConfig)
    host: HostConfig = field(default_factory=HostConfig)

    def as_dict(self) -> dict:
        out: dict[str, object] = {}
        for ax in AXES:
            p: AxisParams = self.machine.axis(ax)
            for f in dataclasses.fields(AxisParams):
                out[f"{ax}_{f.name}"] = getattr(p, f.name)
        for name in ("flex_gain_mm_per_mm", "flex_knee_mm", "buffer_capacity", "xy_offset_steps"):
            out[name] = getattr(self.machine, name)
        for f in dataclasses.fields(HostConfig):
            out[f.name] = getattr(self.host, f.name)
        return out


_AXIS_FIELDS = {f.name: f.type for f in dataclasses.fields(AxisParams)}
_MACHINE_FIELDS = ("flex_gain_mm_per_mm", "flex_knee_mm", "buffer_capacity", "xy_offset_steps")
_HOST_FIELDS = {f.name: f for f in dataclasses.fields(HostConfig)}


def _parse_value(key: str, raw: str):
    raw = raw.strip()
    low = raw.lower()
    if low in ("true", "yes", "on"):
        return True
    if low in ("false", "no", "off"):
        return False
    if low in ("none", "default"):
        return None
    try:
        return int(raw)
    except ValueError:
        pass
    try:
        return float(raw)
    except ValueError:
        pass
    return raw


def parse_config_text(text: str, base: Settings | None = None) -> Settings:
    settings = base or Settings()
    axis_over: dict[str, dict[str, object]] = {ax: {} for ax in AXES}
    machine_over: dict[str, object] = {}
    host_over: dict[str, object] = {}

    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"config line {lineno}: expected key = value, got {line!r}")
        key = key.strip()
        parsed = _parse_value(key, value)
        if key[:2] in ("x_", "y_", "z_") and key[2:] in _AXIS_FIELDS:
            axis_over[key[0]][key[2:]] = parsed
        elif key in _MACHINE_FIELDS:
            machine_over[key] = parsed
        elif key in _HOST_FIELDS:
            host_over[key] = parsed
        else:
            raise ConfigError(f"config line {lineno}: unknown key {key!r}")

    machine = settings.machine
    for ax in AXES:
        if axis_over[ax]:
            machine = replace(machine, **{ax: replace(machine.axis(ax), **axis_over[ax])})
    if machine_over:
        machine = replace(machine, **machine_over)
    host = replace(settings.host, **host_over) if host_over else settings.host
    return Settings(machine, host)


def load_settings(path: str | Path | None = None,
                  overrides: dict[str, str] | None = None) -> Settings:
    """Load settings from a file (or defaults), then apply key=value overrides.

    With no explicit path, the PENSCRIBE_CONFIG environment variable is
    consulted; if that is unset too, defaults apply.
    """
    if path is None:
        env = os.environ.get(ENV_CONFIG_PATH)
        path = env if env else None
    settings = Settings()
    if path is not None:
        settings = parse_config_text(Path(path).read_text(encoding="utf-8"), settings)
    if overrides:
        text = "\n".join(f"{k} = {v}" for k, v in overrides.items())
        settings = parse_config_text(text, settings)
    return settings
