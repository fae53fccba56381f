"""Flow-controlled streaming of target points to the controller.

The controller reports its free buffer slots in every READY/DONE message.
The host keeps a conservative credit: permits = last reported free slots
minus the sends the controller had not yet seen when it emitted that
report. A point is sent only while permits are positive, so the
controller's queue can never be offered more than its capacity no matter
how feedback is delayed.

FlowController is pure state (bytes in, decisions out) so the same logic
that drives a live transport can be exhaustively model-checked; stream_job
wraps it around a transport.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Protocol, Sequence

from .pipeline import TargetPoint
from .protocol import (
    Error,
    Feedback,
    FrameSplitter,
    Homed,
    MalformedFeedback,
    Move,
    MoveDone,
    Ready,
    encode_command,
    parse_feedback,
)


class TransportClosed(RuntimeError):
    pass


class Transport(Protocol):
    """A byte link to the controller that advances as it is polled."""

    def send(self, data: bytes) -> None: ...

    def poll(self) -> bytes:
        """Advance the link (one tick for simulated links); return feedback bytes."""
        ...

    @property
    def time(self) -> float: ...


@dataclass
class StreamReport:
    """Outcome of one streaming run."""

    points_total: int = 0
    points_sent: int = 0
    points_done: int = 0
    duration_s: float = 0.0
    status: str = "ok"  # ok | fault | aborted | transport
    error: str | None = None
    done_times: list[float] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.status == "ok"


class FlowController:
    """Credit-based send gate over the feedback stream.

    Feedback is FIFO, so when a READY/DONE carrying N free slots is
    processed, the controller had already seen exactly `accepted` of our
    sends (one READY per accepted move). Anything sent beyond that is
    still in flight toward it and must be charged against N.
    """

    def __init__(self, points: Sequence[TargetPoint], capacity: int) -> None:
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.points = list(points)
        self.capacity = capacity
        self.sent = 0
        self.accepted = 0      # READYs seen
        self.done = 0          # DONEs seen
        self.window = capacity  # last reported free slots
        self.error: Error | None = None

    @property
    def in_flight(self) -> int:
        return self.sent - self.done

    @property
    def permits(self) -> int:
        return self.window - (self.sent - self.accepted)

    @property
    def can_send(self) -> bool:
        return (
            self.error is None
            and self.sent < len(self.points)
            and self.permits > 0
        )

    @property
    def finished(self) -> bool:
        if self.error is not None:
            # Aborted: done once everything the controller accepted has drained.
            return self.done >= self.accepted
        return self.done == len(self.points)

    def next_point(self) -> TargetPoint:
        if not self.can_send:
            raise RuntimeError("no permit to send")
        p = self.points[self.sent]
        self.sent += 1
        return p

    def on_feedback(self, fb: Feedback) -> None:
        if isinstance(fb, Ready):
            self.accepted += 1
            self.window = fb.free_slots
        elif isinstance(fb, MoveDone):
            self.done += 1
            self.window = fb.free_slots
        elif isinstance(fb, Error):
            if self.error is None:
                self.error = fb
        elif isinstance(fb, Homed):
            pass  # stray HOMED is harmless
        else:  # pragma: no cover
            raise TypeError(f"unexpected feedback {fb!r}")


def stream_job(
    points: Sequence[TargetPoint],
    transport: Transport,
    capacity: int,
    on_feedback: Callable[[Feedback, float], None] | None = None,
    should_abort: Callable[[], bool] | None = None,
    idle_timeout_s: float = 300.0,
) -> StreamReport:
    """Send every point exactly once, in order, within the credit window.

    Returns counts, duration, and the firmware error that aborted the job
    if one did. `done_times` records the link time at which each move's
    completion was observed (used for depth measurements downstream).
    Raises TransportClosed only if the link stops producing feedback while
    moves are outstanding for longer than idle_timeout_s of link time.
    """
    ctl = FlowController(points, capacity)
    report = StreamReport(points_total=len(points))
    framer = FrameSplitter()
    start = transport.time
    last_progress = start
    aborted = False

    while not ctl.finished:
        if should_abort is not None and not aborted and should_abort():
            aborted = True
        while ctl.can_send and not aborted:
            transport.send(encode_command(Move(*_xyz(ctl.next_point()))))
        if aborted and ctl.error is None and ctl.done >= ctl.sent:
            break
        data = transport.poll()
        progressed = False
        if data:
            for frame in framer.feed(data):
                if isinstance(frame, bytes):
                    try:
                        fb = parse_feedback(frame)
                    except MalformedFeedback as e:
                        report.status = "transport"
                        report.error = f"garbled feedback: {e}"
                        report.points_sent = ctl.sent
                        report.points_done = ctl.done
                        report.duration_s = transport.time - start
                        return report
                    if isinstance(fb, MoveDone):
                        report.done_times.append(transport.time)
                    ctl.on_feedback(fb)
                    progressed = True
                    if on_feedback is not None:
                        on_feedback(fb, transport.time)
        if progressed:
            last_progress = transport.time
        elif ctl.in_flight > 0 and transport.time - last_progress > idle_timeout_s:
            raise TransportClosed(
                f"no feedback for {idle_timeout_s} s with {ctl.in_flight} moves in flight"
            )

    report.points_sent = ctl.sent
    report.points_done = ctl.done
    report.duration_s = transport.time - start
    if ctl.error is not None:
        report.status = "fault"
        report.error = f"{ctl.error.code}: {ctl.error.message}"
    elif aborted and ctl.done < len(points):
        report.status = "aborted"
        report.error = "aborted"
    return report


def _xyz(p: TargetPoint) -> tuple[int, int, int]:
    return (p.x, p.y, p.z)
