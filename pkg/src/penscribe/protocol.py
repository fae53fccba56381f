"""Byte codec for the host <-> controller serial line protocol.

Messages are ASCII lines, one message per LF-terminated line; a single
trailing CR before the LF is tolerated on input and never produced.

Host -> controller:
    HOME
    MOVE X:<int> Y:<int> Z:<int>

Controller -> host:
    READY N:<uint>          accepted a move; N = free queue slots now
    HOMED                   homing finished, origin established
    DONE N:<uint>           finished a move; N = free queue slots now
    ERR <CODE> <message>    rejected input or fault; message may be empty

Integers are decimal with an optional leading '-' and must fit a signed
32-bit word (the controller's native int). Field keys are scanned rather
than position-matched, so each of X/Y/Z must appear exactly once; unknown
keywords, missing/duplicate fields, non-integer values, and overflow all
reject the line. Parsing is total: any byte sequence either yields a
message or raises MalformedCommand/MalformedFeedback, never anything else.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

INT32_MIN = -(2**31)
INT32_MAX = 2**31 - 1

# Longest line the controller will buffer before declaring the stream
# corrupt and resynchronizing at the next LF.
MAX_LINE_BYTES = 256

_INT_RE = re.compile(r"-?[0-9]{1,10}$")
_UINT_RE = re.compile(r"[0-9]{1,10}$")
_CODE_RE = re.compile(r"[A-Z][A-Z0-9_]{0,31}$")


class MalformedCommand(ValueError):
    pass


class MalformedFeedback(ValueError):
    pass


@dataclass(frozen=True)
class Home:
    pass


@dataclass(frozen=True)
class Move:
    x: int
    y: int
    z: int


Command = Home | Move


@dataclass(frozen=True)
class Ready:
    free_slots: int


@dataclass(frozen=True)
class Homed:
    pass


@dataclass(frozen=True)
class MoveDone:
    free_slots: int


@dataclass(frozen=True)
class Error:
    code: str
    message: str = ""


Feedback = Ready | Homed | MoveDone | Error


def _check_i32(v: int, what: str) -> int:
    if not isinstance(v, int) or isinstance(v, bool):
        raise ValueError(f"{what} must be an int, got {type(v).__name__}")
    if not INT32_MIN <= v <= INT32_MAX:
        raise ValueError(f"{what} {v} does not fit a signed 32-bit word")
    return v


def encode_command(cmd: Command) -> bytes:
    if isinstance(cmd, Home):
        return b"HOME\n"
    if isinstance(cmd, Move):
        x = _check_i32(cmd.x, "X")
        y = _check_i32(cmd.y, "Y")
        z = _check_i32(cmd.z, "Z")
        return f"MOVE X:{x} Y:{y} Z:{z}\n".encode("ascii")
    raise TypeError(f"not a Command: {cmd!r}")


def encode_feedback(fb: Feedback) -> bytes:
    if isinstance(fb, Ready):
        return f"READY N:{_check_uint(fb.free_slots)}\n".encode("ascii")
    if isinstance(fb, Homed):
        return b"HOMED\n"
    if isinstance(fb, MoveDone):
        return f"DONE N:{_check_uint(fb.free_slots)}\n".encode("ascii")
    if isinstance(fb, Error):
        if not _CODE_RE.match(fb.code):
            raise ValueError(f"bad error code {fb.code!r}")
        msg = fb.message
        if msg and ("\n" in msg or "\r" in msg or not msg.isascii()):
            raise ValueError("error message must be single-line ASCII")
        line = f"ERR {fb.code} {msg}" if msg else f"ERR {fb.code}"
        if len(line) + 1 > MAX_LINE_BYTES:
            raise ValueError("error message too long for one frame")
        return (line + "\n").encode("ascii")
    raise TypeError(f"not a Feedback: {fb!r}")


def _check_uint(v: int) -> int:
    _check_i32(v, "N")
    if v < 0:
        raise ValueError(f"free_slots must be >= 0, got {v}")
    return v


def _strip_line(line: bytes, exc: type[ValueError]) -> str:
    if line.endswith(b"\n"):
        line = line[:-1]
    if line.endswith(b"\r"):
        line = line[:-1]
    try:
        return line.decode("ascii")
    except UnicodeDecodeError as e:
        raise exc(f"non-ASCII byte in line: {e}") from None


def _parse_int_fields(tokens: list[str], keys: tuple[str, ...], exc: type[ValueError]) -> dict[str, int]:
    seen: dict[str, int] = {}
    for tok in tokens:
        key, sep, val = tok.partition(":")
        if not sep:
            raise exc(f"expected KEY:value field, got {tok!r}")
        if key not in keys:
            raise exc(f"unknown field {key!r}")
        if key in seen:
            raise exc(f"duplicate field {key!r}")
        if not _INT_RE.match(val):
            raise exc(f"field {key} value {val!r} is not an integer")
        n = int(val)
        if not INT32_MIN <= n <= INT32_MAX:
            raise exc(f"field {key} value {n} overflows 32 bits")
        seen[key] = n
    for key in keys:
        if key not in seen:
            raise exc(f"missing field {key!r}")
    return seen


def parse_command(line: bytes) -> Command:
    """Parse one command line (terminator optional). Inverse of encode_command."""
    text = _strip_line(line, MalformedCommand)
    tokens = text.split(" ")
    keyword = tokens[0]
    if keyword == "HOME":
        if len(tokens) != 1:
            raise MalformedCommand("HOME takes no fields")
        return Home()
    if keyword == "MOVE":
        f = _parse_int_fields(tokens[1:], ("X", "Y", "Z"), MalformedCommand)
        return Move(f["X"], f["Y"], f["Z"])
    raise MalformedCommand(f"unknown keyword {keyword!r}")


def parse_feedback(line: bytes) -> Feedback:
    """Parse one feedback line (terminator optional). Inverse of encode_feedback."""
    text = _strip_line(line, MalformedFeedback)
    tokens = text.split(" ")
    keyword = tokens[0]
    if keyword == "HOMED":
        if len(tokens) != 1:
            raise MalformedFeedback("HOMED takes no fields")
        return Homed()
    if keyword in ("READY", "DONE"):
        f = _parse_int_fields(tokens[1:], ("N",), MalformedFeedback)
        if f["N"] < 0:
            raise MalformedFeedback("N must be non-negative")
        return Ready(f["N"]) if keyword == "READY" else MoveDone(f["N"])
    if keyword == "ERR":
        parts = text.split(" ", 2)
        if len(parts) < 2 or not _CODE_RE.match(parts[1]):
            raise MalformedFeedback("ERR requires a code token")
        return Error(parts[1], parts[2] if len(parts) == 3 else "")
    raise MalformedFeedback(f"unknown keyword {keyword!r}")


class FrameOverflow:
    """Marker emitted by FrameSplitter for an over-length line."""

    __slots__ = ()

    def __repr__(self) -> str:  # pragma: no cover
        return "FrameOverflow()"

    def __eq__(self, other: object) -> bool:
        return isinstance(other, FrameOverflow)

    def __hash__(self) -> int:
        return hash(FrameOverflow)


FRAME_OVERFLOW = FrameOverflow()


class FrameSplitter:
    """Reassemble LF-delimited frames from an arbitrarily chunked byte stream.

    No bytes are lost or duplicated; an incomplete trailing fragment is held
    for the next feed. A line growing past MAX_LINE_BYTES without its LF
    yields FRAME_OVERFLOW once and everything up to the next LF is dropped
    (resynchronization). The emitted sequence is independent of how the
    stream was fragmented.

    Single-owner state: use one splitter per transport direction.
    """

    def __init__(self, max_line: int = MAX_LINE_BYTES) -> None:
        self.max_line = max_line
        self._buf = bytearray()
        self._discarding = False

    @property
    def residue(self) -> bytes:
        return bytes(self._buf)

    def feed(self, data: bytes) -> list[bytes | FrameOverflow]:
        out: list[bytes | FrameOverflow] = []
        self._buf += data
        while True:
            i = self._buf.find(b"\n")
            if i < 0:
                if self._discarding:
                    self._buf.clear()
                elif len(self._buf) > self.max_line:
                    out.append(FRAME_OVERFLOW)
                    self._buf.clear()
                    self._discarding = True
                break
            line = bytes(self._buf[:i])
            del self._buf[: i + 1]
            if self._discarding:
                self._discarding = False
                continue
            if len(line) > self.max_line:
                out.append(FRAME_OVERFLOW)
                continue
            out.append(line)
        return out
