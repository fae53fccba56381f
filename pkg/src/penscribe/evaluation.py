"""Measurements over simulated writing: deviation, speed, depth, cost.

The deviation metric formalizes an overlay comparison: both the commanded
stroke polylines and the pen-down trace are resampled by arc length at a
fixed spacing, and the deviation is the maximum over trace samples of the
distance to the nearest reference sample (directed Hausdorff,
trace -> reference). Writing speed is pen-down path length over pen-down
time. Costs are exact decimal arithmetic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from decimal import Decimal, InvalidOperation
from importlib import resources
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.spatial import cKDTree

from .trace import PenTrace

RESAMPLE_SPACING_MM = 0.05

Polyline = Sequence[tuple[float, float]]


class EmptyInput(ValueError):
    pass


class NoDrawSegments(ValueError):
    pass


def resample_polyline(points: Polyline, spacing: float) -> np.ndarray:
    """Points along the polyline every `spacing` mm of arc length.

    Both endpoints are always included; zero-length input collapses to a
    single point.
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or len(pts) == 0:
        raise EmptyInput("polyline needs at least one point")
    if len(pts) == 1:
        return pts
    seg = np.diff(pts, axis=0)
    seg_len = np.hypot(seg[:, 0], seg[:, 1])
    s = np.concatenate(([0.0], np.cumsum(seg_len)))
    total = s[-1]
    if total == 0.0:
        return pts[:1]
    n = max(1, int(math.ceil(total / spacing)))
    targets = np.linspace(0.0, total, n + 1)
    x = np.interp(targets, s, pts[:, 0])
    y = np.interp(targets, s, pts[:, 1])
    return np.column_stack((x, y))


def _resample_set(polylines: Sequence[Polyline], spacing: float) -> np.ndarray:
    parts = [resample_polyline(p, spacing) for p in polylines if len(p) > 0]
    if not parts:
        raise EmptyInput("no polylines")
    return np.vstack(parts)


@dataclass(frozen=True)
class DeviationResult:
    max_mm: float
    at_xy: tuple[float, float]  # trace location of the worst deviation


def max_deviation_detail(
    reference: Sequence[Polyline],
    trace: PenTrace,
    spacing: float = RESAMPLE_SPACING_MM,
) -> DeviationResult:
    """Directed Hausdorff deviation of the pen-down trace from the reference."""
    if not reference:
        raise EmptyInput("reference is empty")
    runs = [r for r in trace.pen_down_runs() if len(r) >= 1]
    if not runs:
        raise EmptyInput("trace has no pen-down samples")
    ref_pts = _resample_set(reference, spacing)
    trace_pts = _resample_set(runs, spacing)
    tree = cKDTree(ref_pts)
    dists, _ = tree.query(trace_pts, k=1)
    i = int(np.argmax(dists))
    return DeviationResult(float(dists[i]), (float(trace_pts[i, 0]), float(trace_pts[i, 1])))


def max_deviation(
    reference: Sequence[Polyline],
    trace: PenTrace,
    spacing: float = RESAMPLE_SPACING_MM,
) -> float:
    return max_deviation_detail(reference, trace, spacing).max_mm


def writing_speed(trace: PenTrace) -> float:
    """Pen-down XY path length divided by pen-down time, in mm/min."""
    t, x, y, _, down = trace.columns()
    if int(down.sum()) < 2:
        raise NoDrawSegments("trace has fewer than 2 pen-down samples")
    length = 0.0
    elapsed = 0.0
    # Consecutive sample pairs that are both pen-down belong to one run.
    both = down[:-1] & down[1:]
    if not both.any():
        raise NoDrawSegments("no contiguous pen-down run")
    dx = np.diff(x)[both]
    dy = np.diff(y)[both]
    length = float(np.hypot(dx, dy).sum())
    elapsed = float(np.diff(t)[both].sum())
    if elapsed <= 0.0:
        raise NoDrawSegments("pen-down time is zero")
    return length / elapsed * 60.0


def draw_depth_error(
    trace: PenTrace,
    done_times: Sequence[float],
    draw_point_indices: Sequence[int],
    surface_z_mm: float,
    writing_depth_mm: float,
) -> float:
    """Worst |achieved - intended| pen depth over completed draw points.

    done_times[i] is when point i's completion was observed; the trace
    sample at that instant is the pen's physical pose at the commanded
    target.
    """
    worst = 0.0
    intended = surface_z_mm + writing_depth_mm
    for i in draw_point_indices:
        if i >= len(done_times):
            break
        sample = trace.at_time(done_times[i])
        err = abs(sample.z_mm - intended)
        if err > worst:
            worst = err
    return worst


# -- SVG overlay -------------------------------------------------------------

SVG_UNITS_PER_MM = 10.0  # 1 SVG user unit = 0.1 mm


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def _path_d(points: np.ndarray, height_units: float) -> str:
    # Flip Y: machine +y is away from the operator, SVG y grows downward.
    cmds = []
    for i, (x, y) in enumerate(points):
        cmds.append(
            ("M" if i == 0 else "L")
            + f"{_fmt(x * SVG_UNITS_PER_MM)} {_fmt(height_units - y * SVG_UNITS_PER_MM)}"
        )
    return " ".join(cmds)


def render_svg(
    reference: Sequence[Polyline],
    trace: PenTrace,
    width_mm: float = 220.0,
    height_mm: float = 160.0,
    spacing: float = RESAMPLE_SPACING_MM,
) -> bytes:
    """Overlay of commanded strokes and the simulated pen-down path.

    Reference strokes in blue, the trace in red, and the worst deviation
    (when both inputs are non-empty) circled in green with its value.
    Output bytes are deterministic for identical input.
    """
    w = width_mm * SVG_UNITS_PER_MM
    h = height_mm * SVG_UNITS_PER_MM
    parts = [
        '<?xml version="1.0" encoding="UTF-8"?>\n',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
        f'viewBox="0 0 {_fmt(w)} {_fmt(h)}" width="{_fmt(w)}" height="{_fmt(h)}">\n',
        f'<rect x="0" y="0" width="{_fmt(w)}" height="{_fmt(h)}" fill="#ffffff"/>\n',
        '<g fill="none" stroke="#2b6cb0" stroke-width="1.5">\n',
    ]
    for poly in reference:
        if len(poly) >= 2:
            pts = np.asarray(poly, dtype=np.float64)
            parts.append(f'<path d="{_path_d(pts, h)}"/>\n')
    parts.append("</g>\n")
    parts.append('<g fill="none" stroke="#c53030" stroke-width="1.0" opacity="0.8">\n')
    runs = trace.pen_down_runs()
    for run in runs:
        if len(run) >= 2:
            pts = resample_polyline(run, spacing)
            if len(pts) >= 2:
                parts.append(f'<path d="{_path_d(pts, h)}"/>\n')
    parts.append("</g>\n")
    if reference and runs:
        try:
            dev = max_deviation_detail(reference, trace, spacing)
        except EmptyInput:
            dev = None
        if dev is not None:
            cx = dev.at_xy[0] * SVG_UNITS_PER_MM
            cy = h - dev.at_xy[1] * SVG_UNITS_PER_MM
            parts.append(
                f'<circle cx="{_fmt(cx)}" cy="{_fmt(cy)}" r="20" fill="none" '
                'stroke="#2f855a" stroke-width="2"/>\n'
            )
            parts.append(
                f'<text x="{_fmt(cx + 24)}" y="{_fmt(cy)}" font-size="28" '
                f'fill="#2f855a">max dev {dev.max_mm:.4f} mm</text>\n'
            )
    parts.append("</svg>\n")
    return "".join(parts).encode("utf-8")


# -- bill of materials --------------------------------------------------------


class BOMFormatError(ValueError):
    pass


@dataclass(frozen=True)
class BOMItem:
    name: str
    count: int
    total_cost_usd: Decimal

    def __post_init__(self) -> None:
        if self.count < 1:
            raise BOMFormatError(f"count must be positive for {self.name!r}")
        if self.total_cost_usd < 0:
            raise BOMFormatError(f"cost must be non-negative for {self.name!r}")
        if self.total_cost_usd != self.total_cost_usd.quantize(Decimal("0.01")):
            raise BOMFormatError(f"cost must have 2 decimal places for {self.name!r}")


def parse_bom(text: str) -> list[BOMItem]:
    """Parse 'Component | Count | Total Cost (USD)' lines."""
    items: list[BOMItem] = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        fields = [f.strip() for f in line.split("|")]
        if len(fields) != 3:
            raise BOMFormatError(f"line {lineno}: expected 3 '|' separated fields")
        name, count_s, cost_s = fields
        try:
            items.append(BOMItem(name, int(count_s), Decimal(cost_s)))
        except (ValueError, InvalidOperation) as e:
            raise BOMFormatError(f"line {lineno}: {e}") from None
    return items


def load_bom(path: str | Path | None = None) -> list[BOMItem]:
    """Load a BOM file; defaults to the packaged machine component table."""
    if path is None:
        text = resources.files("penscribe").joinpath("data/bom.txt").read_text("utf-8")
    else:
        text = Path(path).read_text(encoding="utf-8")
    return parse_bom(text)


def bom_total(items: Sequence[BOMItem]) -> Decimal:
    """Exact decimal sum of the items' costs."""
    total = Decimal("0.00")
    for item in items:
        total += item.total_cost_usd
    return total
