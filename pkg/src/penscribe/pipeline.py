"""Text-to-trajectory pipeline.

Stages: segment text into lines, generate strokes per line on its
baseline, lay lines out on the paper, scale millimetres into machine
steps and add the fixed XY offset, compute the hinge-function Z
compensation per draw point, and wrap every stroke in pen lift/lower
transitions. The output is the ordered TargetPoint queue a job streams
to the controller.

All stages are pure; the same text, font, and config always produce the
identical point list.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal, Sequence

from .config import HostConfig
from .font import (
    FontStrokeGenerator,
    Stroke,
    StrokeGenerator,
    StyleParams,
    generate_strokes,
)
from .machine import MachineConfig, mm_to_steps, steps_to_mm
from .text import segment_text

PenState = Literal["travel", "draw"]


class OutOfWorkArea(ValueError):
    pass


@dataclass(frozen=True)
class TargetPoint:
    """One queued machine target in integer steps, tagged travel or draw."""

    x: int
    y: int
    z: int
    pen_state: PenState


StepStroke = tuple[tuple[int, int], ...]


def transform_coordinates(
    strokes: Sequence[Stroke], config: MachineConfig
) -> list[StepStroke]:
    """Map stroke points from paper millimetres into machine steps.

    Each coordinate is scaled by its axis' steps-per-mm and the constant
    XY offset is added. Raises OutOfWorkArea if any transformed point
    leaves [0, travel] on either axis.
    """
    off = config.xy_offset_steps
    max_x = config.x.travel_steps
    max_y = config.y.travel_steps
    out: list[StepStroke] = []
    for stroke in strokes:
        pts = []
        for x_mm, y_mm in stroke.points:
            x = mm_to_steps(x_mm, "x", config) + off
            y = mm_to_steps(y_mm, "y", config) + off
            if not (0 <= x <= max_x and 0 <= y <= max_y):
                raise OutOfWorkArea(
                    f"point ({x_mm:.3f}, {y_mm:.3f}) mm maps to steps ({x}, {y}) "
                    f"outside [0, {max_x}] x [0, {max_y}]"
                )
            pts.append((x, y))
        out.append(tuple(pts))
    return out


def z_compensation(x_steps: int, y_steps: int, machine: MachineConfig,
                   host: HostConfig) -> int:
    """Extra downward Z steps cancelling frame flex at an XY position.

    Hinge function of the pen's distance from the Z lead screws (the x=0
    edge): zero inside the knee, gain * (distance - knee) beyond it,
    converted to whole Z steps. Returns 0 when compensation is disabled.
    """
    if not host.compensation_enabled:
        return 0
    gain = host.comp_gain(machine)
    knee = host.comp_knee(machine)
    d = steps_to_mm(x_steps, "x", machine)
    if d < 0.0:
        d = 0.0
    excess = d - knee
    if excess <= 0.0 or gain == 0.0:
        return 0
    return mm_to_steps(gain * excess, "z", machine)


def insert_pen_transitions(
    step_strokes: Sequence[StepStroke], machine: MachineConfig, host: HostConfig
) -> list[TargetPoint]:
    """Wrap each stroke in lift/lower moves and set draw depths.

    Per stroke: a lifted travel point at the first XY, the stroke's points
    at writing depth plus compensation, then a lifted travel point at the
    last XY. Between strokes the pen only ever moves lifted. Compensation
    applies to draw points only.
    """
    z_lift = mm_to_steps(host.paper_surface_z_mm - host.pen_lift_mm, "z", machine)
    z_draw = mm_to_steps(host.paper_surface_z_mm + host.writing_depth_mm, "z", machine)
    if z_lift < 0 or z_draw > machine.z.travel_steps:
        raise OutOfWorkArea(
            f"pen heights (lift {z_lift}, draw {z_draw}) exceed z travel "
            f"[0, {machine.z.travel_steps}]"
        )
    points: list[TargetPoint] = []
    for stroke in step_strokes:
        first = stroke[0]
        last = stroke[-1]
        points.append(TargetPoint(first[0], first[1], z_lift, "travel"))
        for x, y in stroke:
            z = z_draw + z_compensation(x, y, machine, host)
            points.append(TargetPoint(x, y, z, "draw"))
        points.append(TargetPoint(last[0], last[1], z_lift, "travel"))
    return points


@dataclass(frozen=True)
class JobPlan:
    """Everything derived from one job's text before any streaming."""

    text: str
    lines: tuple[str, ...]
    strokes_mm: tuple[Stroke, ...]          # paper frame
    step_strokes: tuple[StepStroke, ...]    # machine frame, steps
    points: tuple[TargetPoint, ...]
    reference_mm: tuple[tuple[tuple[float, float], ...], ...]  # machine frame, mm

    @property
    def draw_indices(self) -> list[int]:
        return [i for i, p in enumerate(self.points) if p.pen_state == "draw"]


def plan_job(
    text: str,
    machine: MachineConfig,
    host: HostConfig,
    generator: StrokeGenerator | None = None,
) -> JobPlan:
    """Run the full text-to-points pipeline without touching any machine."""
    gen = generator or FontStrokeGenerator()
    style = StyleParams(
        letter_height_mm=host.letter_height_mm,
        letter_spacing_mm=host.letter_spacing_mm,
        placeholder_glyph=host.placeholder_glyph,
        strict=host.strict_glyphs,
    )
    lines = segment_text(text, host.chars_per_line)
    strokes: list[Stroke] = []
    box_drop = _baseline_rise(gen, style)
    for k, line in enumerate(lines):
        # First line at the top of the text block, later lines below it.
        baseline_y = (
            host.margin_y_mm
            + (len(lines) - 1 - k) * host.line_pitch_mm
            + box_drop
        )
        for s in generate_strokes(line, gen, style):
            strokes.append(s.translated(host.margin_x_mm, baseline_y))
    step_strokes = transform_coordinates(strokes, machine)
    points = insert_pen_transitions(step_strokes, machine, host) if step_strokes else []
    reference = tuple(
        tuple(
            (steps_to_mm(x, "x", machine), steps_to_mm(y, "y", machine))
            for x, y in stroke
        )
        for stroke in step_strokes
    )
    return JobPlan(
        text=text,
        lines=tuple(lines),
        strokes_mm=tuple(strokes),
        step_strokes=tuple(step_strokes),
        points=tuple(points),
        reference_mm=reference,
    )


def _baseline_rise(gen: StrokeGenerator, style: StyleParams) -> float:
    # Lift the baseline enough that descenders stay above the line's bottom.
    font = getattr(gen, "font", None)
    if font is None:
        return 0.0
    scale = style.letter_height_mm / font.box_height_em
    return -font.box_bottom * scale
