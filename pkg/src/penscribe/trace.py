"""Time-stamped pen-tip path recording.

A PenTrace is the ground truth every measurement works from: one sample per
simulation tick while the machine is active, holding the physical pen-tip
position in machine millimetres and whether the tip is touching the paper.
Columnar storage keeps million-sample traces cheap.
"""

from __future__ import annotations

from array import array
from typing import Iterator, NamedTuple


class TraceSample(NamedTuple):
    t: float
    x_mm: float
    y_mm: float
    z_mm: float
    pen_down: bool


class PenTrace:
    """Append-only, strictly time-ordered pen-tip samples."""

    __slots__ = ("_t", "_x", "_y", "_z", "_down")

    def __init__(self) -> None:
        self._t = array("d")
        self._x = array("d")
        self._y = array("d")
        self._z = array("d")
        self._down = array("b")

    def append(self, t: float, x_mm: float, y_mm: float, z_mm: float, pen_down: bool) -> None:
        if self._t and t <= self._t[-1]:
            raise ValueError(f"trace time must be strictly increasing: {t} after {self._t[-1]}")
        self._t.append(t)
        self._x.append(x_mm)
        self._y.append(y_mm)
        self._z.append(z_mm)
        self._down.append(1 if pen_down else 0)

    def __len__(self) -> int:
        return len(self._t)

    def __getitem__(self, i: int) -> TraceSample:
        return TraceSample(self._t[i], self._x[i], self._y[i], self._z[i], bool(self._down[i]))

    def __iter__(self) -> Iterator[TraceSample]:
        for i in range(len(self._t)):
            yield self[i]

    def mark(self) -> int:
        """Current sample count; use with :meth:`window` to slice out a job."""
        return len(self._t)

    def window(self, start: int, stop: int | None = None) -> "PenTrace":
        sub = PenTrace()
        sl = slice(start, stop)
        sub._t = self._t[sl]
        sub._x = self._x[sl]
        sub._y = self._y[sl]
        sub._z = self._z[sl]
        sub._down = self._down[sl]
        return sub

    def columns(self):
        """Return (t, x, y, z, pen_down) as numpy arrays."""
        import numpy as np

        return (
            np.frombuffer(self._t, dtype=np.float64),
            np.frombuffer(self._x, dtype=np.float64),
            np.frombuffer(self._y, dtype=np.float64),
            np.frombuffer(self._z, dtype=np.float64),
            np.frombuffer(self._down, dtype=np.int8).astype(bool),
        )

    def at_time(self, t: float) -> TraceSample:
        """Sample with the largest timestamp <= t."""
        import bisect

        i = bisect.bisect_right(self._t, t) - 1
        if i < 0:
            raise IndexError(f"no sample at or before t={t}")
        return self[i]

    def pen_down_runs(self) -> list[list[tuple[float, float]]]:
        """Contiguous pen-down XY polylines, in time order."""
        runs: list[list[tuple[float, float]]] = []
        cur: list[tuple[float, float]] = []
        for i in range(len(self._t)):
            if self._down[i]:
                cur.append((self._x[i], self._y[i]))
            elif cur:
                runs.append(cur)
                cur = []
        if cur:
            runs.append(cur)
        return runs
