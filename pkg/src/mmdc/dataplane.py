"""Byte-accounting data plane: files, RLC queues, X2 transfers and PDCP reception.

Data is tracked as ranges of PDCP sequence numbers. Every file is cut into
PDUs of ``pdu_size`` bytes (the last one shorter), numbered consecutively
across the run, so a queue holds a handful of ``[lo, hi)`` ranges even when
it carries hundreds of megabytes.
"""

from __future__ import annotations

import math
from bisect import bisect_left, bisect_right
from collections import deque
from collections.abc import Iterable, Iterator
from dataclasses import dataclass

from .channel import LinkClass, LinkReport
from .engine import TIME_DECIMALS, EventKind, Scheduler

Range = tuple[int, int]


class IntervalSet:
    """Disjoint, sorted half-open integer intervals; adjacent ones merge."""

    __slots__ = ("_s", "_e")

    def __init__(self, ranges: Iterable[Range] = ()) -> None:
        self._s: list[int] = []
        self._e: list[int] = []
        for lo, hi in ranges:
            self.add(lo, hi)

    def add(self, lo: int, hi: int) -> list[Range]:
        """Insert ``[lo, hi)``; return the sub-ranges that were not present before."""
        if lo >= hi:
            return []
        S, E = self._s, self._e
        i = bisect_left(E, lo)
        j = bisect_right(S, hi)
        fresh: list[Range] = []
        cur = lo
        for k in range(i, j):
            if S[k] > cur:
                fresh.append((cur, min(S[k], hi)))
            cur = max(cur, E[k])
            if cur >= hi:
                break
        if cur < hi:
            fresh.append((cur, hi))
        if i < j:
            lo, hi = min(lo, S[i]), max(hi, E[j - 1])
        S[i:j] = [lo]
        E[i:j] = [hi]
        return fresh

    def remove(self, lo: int, hi: int) -> None:
        if lo >= hi:
            return
        S, E = self._s, self._e
        i = bisect_right(E, lo)
        j = bisect_left(S, hi)
        if i >= j:
            return
        keep_s: list[int] = []
        keep_e: list[int] = []
        if S[i] < lo:
            keep_s.append(S[i])
            keep_e.append(lo)
        if E[j - 1] > hi:
            keep_s.append(hi)
            keep_e.append(E[j - 1])
        S[i:j] = keep_s
        E[i:j] = keep_e

    def __contains__(self, x: int) -> bool:
        k = bisect_right(self._s, x) - 1
        return k >= 0 and x < self._e[k]

    def __iter__(self) -> Iterator[Range]:
        return iter(zip(self._s, self._e))

    def __bool__(self) -> bool:
        return bool(self._s)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, IntervalSet) and self._s == other._s and self._e == other._e

    def __repr__(self) -> str:
        return f"IntervalSet({list(self)})"

    @property
    def count(self) -> int:
        return sum(e - s for s, e in zip(self._s, self._e))

    def first(self) -> Range:
        return self._s[0], self._e[0]

    def pop_first(self) -> Range:
        return self._s.pop(0), self._e.pop(0)

    def copy(self) -> IntervalSet:
        out = IntervalSet()
        out._s = list(self._s)
        out._e = list(self._e)
        return out

    def union(self, other: IntervalSet) -> IntervalSet:
        out = self.copy()
        for lo, hi in other:
            out.add(lo, hi)
        return out

    def difference(self, other: IntervalSet) -> IntervalSet:
        out = self.copy()
        for lo, hi in other:
            out.remove(lo, hi)
        return out

    def issubset(self, other: IntervalSet) -> bool:
        return not self.difference(other)


@dataclass
class FileJob:
    file_id: int
    size: int
    created: float
    deadline: float
    first_seq: int
    n_pdus: int
    byte_start: int
    delivered_bytes: int = 0
    completed: float | None = None

    @property
    def end_seq(self) -> int:
        return self.first_seq + self.n_pdus

    @property
    def succeeded(self) -> bool:
        return self.completed is not None and self.completed <= self.deadline


class FileTable:
    """Files in creation order with seq <-> byte-offset arithmetic."""

    def __init__(self, pdu_size: int = 1400) -> None:
        if pdu_size <= 0:
            raise ValueError("pdu_size must be positive")
        self.pdu_size = pdu_size
        self.files: list[FileJob] = []
        self._first: list[int] = []
        self._bstart: list[int] = []
        self.next_seq = 0
        self.total_bytes = 0

    def add_file(self, size: int, created: float, deadline: float) -> FileJob:
        if size <= 0:
            raise ValueError("file size must be positive")
        n = -(-size // self.pdu_size)
        job = FileJob(len(self.files), size, created, deadline, self.next_seq, n, self.total_bytes)
        self.files.append(job)
        self._first.append(job.first_seq)
        self._bstart.append(job.byte_start)
        self.next_seq += n
        self.total_bytes += size
        return job

    def offset(self, seq: int) -> int:
        """Stream byte offset of the first byte of PDU ``seq``."""
        if seq >= self.next_seq:
            return self.total_bytes
        k = bisect_right(self._first, seq) - 1
        f = self.files[k]
        return f.byte_start + (seq - f.first_seq) * self.pdu_size

    def nbytes(self, lo: int, hi: int) -> int:
        return self.offset(hi) - self.offset(lo)

    def measure(self, ranges: Iterable[Range]) -> int:
        return sum(self.offset(hi) - self.offset(lo) for lo, hi in ranges)

    def seq_floor(self, byte_pos: float) -> int:
        """Largest seq whose PDU starts at or before ``byte_pos``; whole PDUs only."""
        if byte_pos >= self.total_bytes:
            return self.next_seq
        k = bisect_right(self._bstart, byte_pos) - 1
        f = self.files[k]
        return f.first_seq + min(int((byte_pos - f.byte_start) // self.pdu_size), f.n_pdus)

    def credit(self, lo: int, hi: int, t: float) -> list[FileJob]:
        """Account application delivery of ``[lo, hi)`` at ``t``; return files just completed."""
        done = []
        k = bisect_right(self._first, lo) - 1
        while k < len(self.files) and self.files[k].first_seq < hi:
            f = self.files[k]
            a, b = max(lo, f.first_seq), min(hi, f.end_seq)
            if a < b:
                f.delivered_bytes += self.nbytes(a, b)
                if f.delivered_bytes > f.size:
                    raise AssertionError(f"file {f.file_id} over-delivered")
                if f.delivered_bytes == f.size and f.completed is None:
                    f.completed = t
                    done.append(f)
            k += 1
        return done


def generate_traffic(
    table: FileTable,
    duration: float,
    interval: float = 0.12,
    size: int = 1_000_000,
    delay_constraint: float = 0.12,
    start: float = 0.0,
) -> list[FileJob]:
    """Periodic file arrivals over ``[start, duration)``; mainly for offline use."""
    return [table.add_file(size, t, t + delay_constraint)
            for t in arrival_times(duration, interval, start)]


def arrival_times(duration: float, interval: float, start: float = 0.0) -> list[float]:
    n = max(0, math.ceil((duration - start) / interval - 1e-9))
    return [start + k * interval for k in range(n)]


def link_rate_bps(
    report: LinkReport | None,
    bandwidth_hz: float,
    eta: float = 0.6,
    se_max: float = 7.4,
    sinr_db: float | None = None,
) -> float:
    """Attenuated, capped Shannon rate; zero in outage."""
    if report is not None:
        if report.link_class is LinkClass.OUTAGE:
            return 0.0
        sinr_db = report.sinr_db
    if sinr_db is None:
        raise ValueError("need a report or an explicit sinr_db")
    se = math.log2(1.0 + 10.0 ** (sinr_db / 10.0))
    return eta * bandwidth_hz * min(se, se_max)


class RlcBuffer:
    """FIFO of PDU ranges with tail drop at ``capacity`` bytes.

    ``head_offset`` counts bytes of the head PDU already sent over the air;
    the PDU only reaches the UE once its last byte is sent.
    """

    def __init__(self, node_id: int, table: FileTable, capacity: float = 100e6) -> None:
        self.node_id = node_id
        self.table = table
        self.capacity = capacity
        self.queue: deque[list[int]] = deque()
        self.queued_bytes = 0
        self.head_offset = 0.0
        self.bytes_dropped = 0
        self.bytes_sent = 0.0
        self.reserved = 0

    def __bool__(self) -> bool:
        return bool(self.queue)

    @property
    def room(self) -> float:
        return self.capacity - self.queued_bytes - self.reserved

    def enqueue(self, lo: int, hi: int) -> Range | None:
        """Append ``[lo, hi)``; return the tail-dropped range, if any."""
        if lo >= hi:
            return None
        table = self.table
        size = table.nbytes(lo, hi)
        space = self.capacity - self.queued_bytes
        dropped = None
        if size > space:
            cut = max(lo, table.seq_floor(table.offset(lo) + space))
            dropped = (cut, hi)
            self.bytes_dropped += table.nbytes(cut, hi)
            hi = cut
            size = table.nbytes(lo, hi)
            if lo >= hi:
                return dropped
        if self.queue and self.queue[-1][1] == lo:
            self.queue[-1][1] = hi
        else:
            self.queue.append([lo, hi])
        self.queued_bytes += size
        return dropped

    def take_all(self) -> list[Range]:
        out = [(lo, hi) for lo, hi in self.queue]
        self.queue.clear()
        self.queued_bytes = 0
        self.head_offset = 0.0
        return out

    def take_bytes(self, limit: float) -> list[Range]:
        """Pop whole PDUs from the head, at most ``limit`` bytes in total."""
        out: list[Range] = []
        table = self.table
        budget = limit
        while self.queue and budget > 0:
            lo, hi = self.queue[0]
            size = table.nbytes(lo, hi)
            if size <= budget:
                self.queue.popleft()
                out.append((lo, hi))
                budget -= size
                self.queued_bytes -= size
                continue
            cut = table.seq_floor(table.offset(lo) + budget)
            if cut > lo:
                out.append((lo, cut))
                moved = table.nbytes(lo, cut)
                self.queued_bytes -= moved
                self.queue[0][0] = cut
            break
        if out:
            self.head_offset = 0.0
        return out

    def contents(self) -> IntervalSet:
        return IntervalSet((lo, hi) for lo, hi in self.queue)

    def discard(self, seqs: IntervalSet) -> None:
        """Drop every queued PDU whose seq is in ``seqs`` (e.g. already at the UE)."""
        if not self.queue or not seqs:
            return
        keep = self.contents().difference(seqs)
        head = self.queue[0][0]
        self.queue = deque([lo, hi] for lo, hi in keep)
        self.queued_bytes = self.table.measure(keep)
        if not self.queue or self.queue[0][0] != head:
            self.head_offset = 0.0

    def serve(self, rate_bps: float, dt: float, t0: float = 0.0) -> list[tuple[int, int, float]]:
        """Send at ``rate_bps`` for ``dt`` seconds from ``t0``.

        Returns ``(lo, hi, t)`` for each range of PDUs completed, ``t`` being
        when the range's last byte left the queue.
        """
        return serve_link(self, rate_bps, dt, t0)


def serve_link(
    buffer: RlcBuffer, rate_bps: float, dt: float, t0: float = 0.0
) -> list[tuple[int, int, float]]:
    if dt <= 0:
        raise ValueError("dt must be positive")
    if rate_bps <= 0 or not buffer.queue:
        return []
    table = buffer.table
    budget = rate_bps * dt / 8.0
    used = 0.0
    out: list[tuple[int, int, float]] = []
    q = buffer.queue
    while q:
        lo, hi = q[0]
        start_b = table.offset(lo) + buffer.head_offset
        remaining = table.offset(hi) - start_b
        avail = budget - used
        if remaining <= avail:
            used += remaining
            q.popleft()
            buffer.queued_bytes -= table.nbytes(lo, hi)
            buffer.head_offset = 0.0
            out.append((lo, hi, t0 + used * 8.0 / rate_bps))
            continue
        cut = table.seq_floor(start_b + avail)
        if cut > lo:
            sent_to = table.offset(cut)
            out.append((lo, cut, t0 + (used + sent_to - start_b) * 8.0 / rate_bps))
            buffer.queued_bytes -= table.nbytes(lo, cut)
            q[0][0] = cut
            buffer.head_offset = start_b + avail - sent_to
        else:
            buffer.head_offset += avail
        used = budget
        break
    buffer.bytes_sent += used
    return out


@dataclass
class X2Transfer:
    transfer_id: int
    dst: RlcBuffer
    ranges: list[Range]
    nbytes: int
    arrive: float


class X2Link:
    """Fixed-delay wired pipe between nodes; contents in flight stay tracked."""

    def __init__(self, scheduler: Scheduler, delay: float = 1e-3) -> None:
        self.scheduler = scheduler
        self.delay = delay
        self.in_flight: dict[int, X2Transfer] = {}
        self._next = 0

    def send(self, dst: RlcBuffer, ranges: list[Range]) -> X2Transfer | None:
        if not ranges:
            return None
        nbytes = dst.table.measure(ranges)
        tr = X2Transfer(self._next, dst, list(ranges), nbytes, self.scheduler.now + self.delay)
        self._next += 1
        dst.reserved += nbytes
        self.in_flight[tr.transfer_id] = tr
        self.scheduler.schedule(tr.arrive, EventKind.X2_DELIVERY,
                                {"transfer": tr.transfer_id, "dst": dst.node_id, "bytes": nbytes})
        return tr

    def forward(self, src: RlcBuffer, dst: RlcBuffer) -> X2Transfer | None:
        """Move all of ``src`` toward ``dst``; ``src`` empties immediately."""
        if src is dst:
            raise ValueError("X2 forward needs distinct buffers")
        return self.send(dst, src.take_all())

    def deliver(self, transfer_id: int) -> tuple[X2Transfer, list[Range]]:
        tr = self.in_flight.pop(transfer_id)
        tr.dst.reserved -= tr.nbytes
        dropped = []
        for lo, hi in tr.ranges:
            d = tr.dst.enqueue(lo, hi)
            if d is not None:
                dropped.append(d)
        return tr, dropped

    def contents(self) -> IntervalSet:
        out = IntervalSet()
        for tr in self.in_flight.values():
            for lo, hi in tr.ranges:
                out.add(lo, hi)
        return out


def x2_forward(src: RlcBuffer, dst: RlcBuffer, link: X2Link) -> X2Transfer | None:
    return link.forward(src, dst)


class PdcpReceiver:
    """UE-side duplicate elimination with an optional in-order reordering window.

    Sequence numbers that arrive after the window has already skipped past
    them are handed up immediately rather than discarded.
    """

    def __init__(self, reordering: bool = True, window: float = 0.05) -> None:
        self.reordering = reordering
        self.window = window
        self.received = IntervalSet()
        self.delivered = IntervalSet()
        self.held = IntervalSet()
        self.next_expected = 0
        self.timer_expiry: float | None = None
        self.duplicate_pdus = 0
        self.released_pdus = 0

    def _release(self, lo: int, hi: int, t: float, out: list) -> None:
        if lo >= hi:
            return
        fresh = self.delivered.add(lo, hi)
        if fresh != [(lo, hi)]:
            raise AssertionError(f"PDCP would deliver [{lo}, {hi}) twice")
        self.released_pdus += hi - lo
        out.append((lo, hi, t))

    def _drain(self, t: float, out: list) -> None:
        held = self.held
        while held and held.first()[0] == self.next_expected:
            lo, hi = held.pop_first()
            self._release(lo, hi, t, out)
            self.next_expected = hi

    def receive(self, lo: int, hi: int, t: float) -> list[tuple[int, int, float]]:
        out: list[tuple[int, int, float]] = []
        fresh = self.received.add(lo, hi)
        self.duplicate_pdus += (hi - lo) - sum(b - a for a, b in fresh)
        if not self.reordering:
            for a, b in fresh:
                self._release(a, b, t, out)
            return out
        nxt = self.next_expected
        for a, b in fresh:
            if b <= nxt:
                self._release(a, b, t, out)
            elif a < nxt:
                self._release(a, nxt, t, out)
                self.held.add(nxt, b)
            else:
                self.held.add(a, b)
        before = self.next_expected
        self._drain(t, out)
        if not self.held:
            self.timer_expiry = None
        elif self.timer_expiry is None or self.next_expected != before:
            self.timer_expiry = round(t + self.window, TIME_DECIMALS)
        return out

    def advance(self, now: float) -> list[tuple[int, int, float]]:
        """Fire any reordering timer due by ``now``; skipped gaps are abandoned."""
        out: list[tuple[int, int, float]] = []
        while self.timer_expiry is not None and self.timer_expiry <= now:
            t = self.timer_expiry
            self.next_expected = self.held.first()[0]
            self._drain(t, out)
            self.timer_expiry = round(t + self.window, TIME_DECIMALS) if self.held else None
        return out
