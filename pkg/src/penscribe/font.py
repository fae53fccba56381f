"""Single-stroke vector font and the stroke-generator seam.

Strokes are continuous pen-down polylines. The default glyph source is a
packaged plain-text font (see data/font_default.txt for the format); any
other generator, e.g. a learned handwriting model, can be plugged in by
implementing StrokeGenerator.
"""

from __future__ import annotations

import functools
import logging
import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Protocol, runtime_checkable

logger = logging.getLogger(__name__)

_GLYPH_RE = re.compile(r"glyph\s+(\S+)\s+advance=([0-9.]+)$")


class FontFormatError(ValueError):
    pass


class UnsupportedGlyph(ValueError):
    def __init__(self, char: str) -> None:
        super().__init__(f"no glyph for character {char!r}")
        self.char = char


@dataclass(frozen=True)
class Stroke:
    """One continuous pen-down polyline in millimetres."""

    points: tuple[tuple[float, float], ...]

    def __post_init__(self) -> None:
        if len(self.points) < 2:
            raise ValueError("a stroke needs at least 2 points")
        for a, b in zip(self.points, self.points[1:]):
            if a == b:
                raise ValueError(f"consecutive duplicate point {a} in stroke")

    def translated(self, dx: float, dy: float) -> "Stroke":
        return Stroke(tuple((x + dx, y + dy) for x, y in self.points))


@dataclass(frozen=True)
class Glyph:
    char: str
    advance_em: float
    strokes: tuple[tuple[tuple[float, float], ...], ...]


class StrokeFont:
    """Glyphs as em-unit polylines; baseline at y=0.

    box_bottom/box_top declare the vertical extent every stroke must stay
    inside (descender room below the baseline). A configured letter height
    spans that whole box.
    """

    def __init__(self, name: str, box_bottom: float, box_top: float,
                 glyphs: dict[str, Glyph]) -> None:
        self.name = name
        self.box_bottom = box_bottom
        self.box_top = box_top
        self.glyphs = glyphs

    @property
    def box_height_em(self) -> float:
        return self.box_top - self.box_bottom

    def __contains__(self, char: str) -> bool:
        return char in self.glyphs

    def glyph(self, char: str) -> Glyph:
        try:
            return self.glyphs[char]
        except KeyError:
            raise UnsupportedGlyph(char) from None

    @classmethod
    def loads(cls, text: str, name: str = "unnamed") -> "StrokeFont":
        box_bottom, box_top = 0.0, 1.0
        glyphs: dict[str, Glyph] = {}
        char: str | None = None
        advance = 0.0
        strokes: list[tuple[tuple[float, float], ...]] = []

        def flush() -> None:
            if char is None:
                return
            if char in glyphs:
                raise FontFormatError(f"duplicate glyph {char!r}")
            glyphs[char] = Glyph(char, advance, tuple(strokes))

        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            try:
                if line.startswith("box "):
                    _, lo, hi = line.split()
                    box_bottom, box_top = float(lo), float(hi)
                elif line.startswith("glyph "):
                    m = _GLYPH_RE.match(line)
                    if not m:
                        raise FontFormatError(f"bad glyph header: {line!r}")
                    flush()
                    token = m.group(1)
                    char = chr(int(token[2:], 16)) if token.startswith("U+") else token
                    if len(char) != 1:
                        raise FontFormatError(f"glyph name must be one character: {token!r}")
                    advance = float(m.group(2))
                    strokes = []
                elif line.startswith("stroke "):
                    if char is None:
                        raise FontFormatError("stroke before any glyph header")
                    pts = []
                    for pair in line.split()[1:]:
                        xs, _, ys = pair.partition(",")
                        pts.append((float(xs), float(ys)))
                    if len(pts) < 2:
                        raise FontFormatError("stroke needs at least 2 points")
                    for a, b in zip(pts, pts[1:]):
                        if a == b:
                            raise FontFormatError(f"duplicate consecutive point {a}")
                    strokes.append(tuple(pts))
                else:
                    raise FontFormatError(f"unrecognized line: {line!r}")
            except (ValueError, FontFormatError) as e:
                raise FontFormatError(f"font line {lineno}: {e}") from None
        flush()

        font = cls(name, box_bottom, box_top, glyphs)
        for g in glyphs.values():
            for stroke in g.strokes:
                for x, y in stroke:
                    if not (box_bottom - 1e-9 <= y <= box_top + 1e-9):
                        raise FontFormatError(
                            f"glyph {g.char!r} point y={y} outside box "
                            f"[{box_bottom}, {box_top}]"
                        )
                    if not (-1e-9 <= x <= g.advance_em + 1e-9):
                        raise FontFormatError(
                            f"glyph {g.char!r} point x={x} outside [0, advance]"
                        )
        return font

    @classmethod
    def load(cls, path: str | Path) -> "StrokeFont":
        p = Path(path)
        return cls.loads(p.read_text(encoding="utf-8"), name=p.stem)


@functools.lru_cache(maxsize=1)
def default_font() -> StrokeFont:
    data = resources.files("penscribe").joinpath("data/font_default.txt").read_text("utf-8")
    return StrokeFont.loads(data, name="default")


@dataclass(frozen=True)
class StyleParams:
    """Layout knobs shared by every stroke generator."""

    letter_height_mm: float = 8.0
    letter_spacing_mm: float = 0.0
    placeholder_glyph: str = "?"
    strict: bool = False


@runtime_checkable
class StrokeGenerator(Protocol):
    """Turns one line of text into pen strokes on a y=0 baseline.

    Output strokes must fit within the style's letter height (the line
    box); x advances left to right from 0.
    """

    def line_strokes(self, line: str, style: StyleParams) -> list[Stroke]: ...


class FontStrokeGenerator:
    """Deterministic glyph-by-glyph generator over a StrokeFont."""

    def __init__(self, font: StrokeFont | None = None) -> None:
        self.font = font or default_font()
        self._warned: set[str] = set()

    def line_strokes(self, line: str, style: StyleParams) -> list[Stroke]:
        font = self.font
        # Letter height spans the full line box, descender room included.
        scale = style.letter_height_mm / font.box_height_em
        baseline_rise = -font.box_bottom * scale
        cursor = 0.0
        out: list[Stroke] = []
        for ch in line:
            try:
                glyph = font.glyph(ch)
            except UnsupportedGlyph:
                if style.strict:
                    raise
                if ch not in self._warned:
                    self._warned.add(ch)
                    logger.warning(
                        "no glyph for %r, substituting %r", ch, style.placeholder_glyph
                    )
                glyph = font.glyph(style.placeholder_glyph)
            for poly in glyph.strokes:
                out.append(
                    Stroke(tuple((cursor + x * scale, y * scale) for x, y in poly))
                )
            cursor += glyph.advance_em * scale + style.letter_spacing_mm
        return out


def generate_strokes(line: str, gen: StrokeGenerator, style: StyleParams) -> list[Stroke]:
    """Generate the pen strokes for one non-empty line of text.

    Enforces the generator contract: the strokes' vertical span must fit
    within the configured letter height (the line box).
    """
    if not line:
        raise ValueError("line must be non-empty")
    strokes = gen.line_strokes(line, style)
    ys = [y for s in strokes for _, y in s.points]
    if ys and (max(ys) - min(ys)) > style.letter_height_mm + 1e-6:
        raise ValueError(
            f"generator output spans {max(ys) - min(ys):.3f} mm, "
            f"taller than the {style.letter_height_mm} mm line box"
        )
    return strokes
