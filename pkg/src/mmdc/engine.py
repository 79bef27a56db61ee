"""Discrete-event core: clock, cancellable event queue, seeded random streams."""

from __future__ import annotations

import heapq
import json
import zlib
from collections.abc import Callable
from dataclasses import dataclass
from enum import IntEnum
from typing import Any, TextIO

import numpy as np

TRACE_FORMAT = "mmdc-trace"
TRACE_VERSION = 1


class EventKind(IntEnum):
    SRS_REPORT = 0
    TRAFFIC_GEN = 1
    LINK_SERVICE = 2
    X2_DELIVERY = 3
    HO_COMPLETE = 4
    TTT_EXPIRY = 5
    MOBILITY_STEP = 6
    RUN_END = 7


class SchedulingError(ValueError):
    pass


@dataclass(eq=False)
class SimEvent:
    fire_time: float
    seq: int
    kind: EventKind
    payload: Any = None
    cancelled: bool = False
    fired: bool = False


class EventHandle:
    """Opaque reference to a scheduled event, used for cancellation."""

    __slots__ = ("_event",)

    def __init__(self, event: SimEvent) -> None:
        self._event = event

    @property
    def fire_time(self) -> float:
        return self._event.fire_time

    @property
    def kind(self) -> EventKind:
        return self._event.kind

    @property
    def pending(self) -> bool:
        return not (self._event.fired or self._event.cancelled)


Handler = Callable[[SimEvent], None]


TIME_DECIMALS = 9


class Scheduler:
    """Single-threaded event queue ordered by (fire_time, insertion seq)."""

    def __init__(self, trace: TextIO | None = None) -> None:
        self.now = 0.0
        self._queue: list[tuple[float, int, SimEvent]] = []
        self._seq = 0
        self._handlers: dict[EventKind, Handler] = {}
        self._trace = trace
        self.processed = 0
        if trace is not None:
            trace.write(json.dumps({"format": TRACE_FORMAT, "version": TRACE_VERSION}) + "\n")

    def on(self, kind: EventKind, handler: Handler) -> None:
        self._handlers[kind] = handler

    def schedule(self, fire_time: float, kind: EventKind, payload: Any = None) -> EventHandle:
        # Snap to a 1 ns grid so that sums like t0 + ttt and k * period that denote the
        # same instant compare equal and fall back to FIFO order.
        fire_time = round(fire_time, TIME_DECIMALS)
        if fire_time < self.now:
            raise SchedulingError(
                f"cannot schedule {kind.name} at t={fire_time!r} before clock t={self.now!r}"
            )
        event = SimEvent(fire_time, self._seq, kind, payload)
        self._seq += 1
        heapq.heappush(self._queue, (fire_time, event.seq, event))
        return EventHandle(event)

    def schedule_in(self, delay: float, kind: EventKind, payload: Any = None) -> EventHandle:
        return self.schedule(self.now + delay, kind, payload)

    def cancel(self, handle: EventHandle) -> bool:
        event = handle._event
        if event.fired or event.cancelled:
            return False
        event.cancelled = True
        return True

    def record(self, kind: str, **fields: Any) -> None:
        """Append a non-event record (control action, file outcome) to the trace."""
        if self._trace is not None:
            self._trace.write(
                json.dumps({"t": self.now, "kind": kind, **fields}, sort_keys=True) + "\n"
            )

    @property
    def tracing(self) -> bool:
        return self._trace is not None

    def __len__(self) -> int:
        return sum(1 for _, _, e in self._queue if not e.cancelled)

    def run_until(self, t_end: float) -> int:
        """Process every event with fire_time <= t_end, then park the clock at t_end.

        A RUN_END event is queued at ``t_end``; nothing fires after it.
        Returns the number of events processed (RUN_END included).
        """
        if t_end <= 0:
            raise ValueError("t_end must be positive")
        self.schedule(t_end, EventKind.RUN_END)
        queue = self._queue
        handlers = self._handlers
        trace = self._trace
        count = 0
        while queue:
            if queue[0][0] > t_end:
                break
            event = heapq.heappop(queue)[2]
            if event.cancelled:
                continue
            self.now = event.fire_time
            event.fired = True
            count += 1
            if trace is not None:
                trace.write(
                    json.dumps(
                        {
                            "t": event.fire_time,
                            "seq": event.seq,
                            "kind": event.kind.name,
                            "payload": _summary(event.payload),
                        },
                        sort_keys=True,
                    )
                    + "\n"
                )
            handler = handlers.get(event.kind)
            if handler is not None:
                handler(event)
            if event.kind is EventKind.RUN_END:
                break
        self.now = t_end
        self.processed += count
        return count


def _summary(payload: Any) -> Any:
    if payload is None or isinstance(payload, (int, float, str, bool)):
        return payload
    if isinstance(payload, dict):
        return {str(k): _summary(v) for k, v in payload.items()}
    if isinstance(payload, (list, tuple)):
        return [_summary(v) for v in payload]
    return repr(payload)


STREAM_NAMES = ("topology", "blockage", "shadowing", "traffic")


class RngStreams:
    """Independent named generators derived from a single master seed.

    Each stream is keyed by a stable hash of its name, so the draws on one
    stream never depend on how many draws were taken from another.
    """

    def __init__(self, master_seed: int) -> None:
        self.master_seed = int(master_seed)
        self._streams: dict[str, np.random.Generator] = {}

    def stream(self, name: str) -> np.random.Generator:
        gen = self._streams.get(name)
        if gen is None:
            key = zlib.crc32(name.encode("utf-8"))
            seq = np.random.SeedSequence(self.master_seed, spawn_key=(key,))
            gen = np.random.Generator(np.random.PCG64(seq))
            self._streams[name] = gen
        return gen

    def __getitem__(self, name: str) -> np.random.Generator:
        return self.stream(name)
