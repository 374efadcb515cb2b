"""Monotonic time sources and the timer scheduler.

Every timed component in the stack takes an injected clock instead of
reading the system time, so the same code runs in real time for
deployments and in virtual time for tests and as-fast-as-possible replay.
Virtual time advances only via explicit stepping; timer callbacks observe
`now_ns()` equal to their own deadline, which is what makes scheduled
dispatch times exact rather than approximate.
"""

from __future__ import annotations

import heapq
import itertools
import logging
import threading
import time
from typing import Callable, Optional

log = logging.getLogger(__name__)

# Wall-clock origin used in virtual mode (2020-01-01T00:00:00Z). Pinning the
# wall clock keeps virtual-time log files byte-identical between runs.
VIRTUAL_WALL_EPOCH_NS = 1_577_836_800_000_000_000


def s_to_ns(seconds: float) -> int:
    return int(round(seconds * 1e9))


def ns_to_s(ns: int) -> float:
    return ns / 1e9


class Clock:
    """Monotonic nanosecond time source. `now_ns` starts at 0."""

    is_virtual = False

    def now_ns(self) -> int:
        raise NotImplementedError

    def wall_ns(self) -> int:
        raise NotImplementedError


class RealClock(Clock):
    def __init__(self):
        self._zero = time.monotonic_ns()

    def now_ns(self) -> int:
        return time.monotonic_ns() - self._zero

    def wall_ns(self) -> int:
        return time.time_ns()


class VirtualClock(Clock):
    """Test-controlled clock. Time moves only when the scheduler steps it."""

    is_virtual = True

    def __init__(self, start_ns: int = 0):
        self._now = start_ns

    def now_ns(self) -> int:
        return self._now

    def wall_ns(self) -> int:
        return VIRTUAL_WALL_EPOCH_NS + self._now

    def _set(self, ns: int) -> None:
        # Never moves backwards, even for stale deadlines.
        if ns > self._now:
            self._now = ns


class TimerHandle:
    """Cancelable handle for a scheduled callback."""

    __slots__ = ("deadline_ns", "seq", "fn", "period_ns", "cancelled")

    def __init__(self, deadline_ns: int, seq: int, fn: Callable[[], None],
                 period_ns: Optional[int] = None):
        self.deadline_ns = deadline_ns
        self.seq = seq
        self.fn = fn
        self.period_ns = period_ns
        self.cancelled = False

    def cancel(self) -> None:
        self.cancelled = True


class Scheduler:
    """Timer queue over an injected clock.

    Entries fire in (deadline, insertion order) order. Periodic entries
    re-arm at exact multiples of their period (fixed-rate, no drift).
    In virtual mode the caller pumps time with `advance()` / `run_until()`;
    in real mode a daemon thread drives the queue.
    """

    def __init__(self, clock: Clock):
        self.clock = clock
        self._heap: list[tuple[int, int, TimerHandle]] = []
        self._lock = threading.Lock()
        self._wakeup = threading.Condition(self._lock)
        self._seq = itertools.count()
        self._thread: Optional[threading.Thread] = None
        self._running = False

    # -- scheduling ------------------------------------------------------

    def call_at(self, deadline_ns: int, fn: Callable[[], None]) -> TimerHandle:
        with self._lock:
            handle = TimerHandle(deadline_ns, next(self._seq), fn)
            heapq.heappush(self._heap, (handle.deadline_ns, handle.seq, handle))
            self._wakeup.notify_all()
        return handle

    def call_later(self, delay_s: float, fn: Callable[[], None]) -> TimerHandle:
        return self.call_at(self.clock.now_ns() + s_to_ns(delay_s), fn)

    def call_every(self, period_s: float, fn: Callable[[], None],
                   first_at_ns: Optional[int] = None) -> TimerHandle:
        period_ns = s_to_ns(period_s)
        if period_ns <= 0:
            raise ValueError("period must be positive")
        first = self.clock.now_ns() if first_at_ns is None else first_at_ns
        with self._lock:
            handle = TimerHandle(first, next(self._seq), fn, period_ns=period_ns)
            heapq.heappush(self._heap, (handle.deadline_ns, handle.seq, handle))
            self._wakeup.notify_all()
        return handle

    def pending_count(self) -> int:
        with self._lock:
            return sum(1 for _, _, h in self._heap if not h.cancelled)

    # -- virtual-time pumping -------------------------------------------

    def _pop_due(self, limit_ns: int) -> Optional[TimerHandle]:
        """Pop the next non-cancelled entry due at or before limit_ns."""
        with self._lock:
            while self._heap:
                deadline, seq, handle = self._heap[0]
                if handle.cancelled:
                    heapq.heappop(self._heap)
                    continue
                if deadline > limit_ns:
                    return None
                heapq.heappop(self._heap)
                if handle.period_ns is not None:
                    handle.deadline_ns = deadline + handle.period_ns
                    handle.seq = next(self._seq)
                    heapq.heappush(
                        self._heap, (handle.deadline_ns, handle.seq, handle))
                return handle
            return None

    def _run_handle(self, handle: TimerHandle, at_ns: int) -> None:
        assert isinstance(self.clock, VirtualClock)
        self.clock._set(at_ns)
        try:
            handle.fn()
        except Exception:
            log.exception("timer callback failed")

    def advance(self, seconds: float) -> None:
        """Advance virtual time by `seconds`, firing every due timer."""
        if not self.clock.is_virtual:
            raise RuntimeError("advance() requires a virtual clock")
        target = self.clock.now_ns() + s_to_ns(seconds)
        while True:
            with self._lock:
                due = self._peek_deadline_locked()
            if due is None or due > target:
                break
            handle = self._pop_due(target)
            if handle is None:
                break
            self._run_handle(handle, min(max(due, self.clock.now_ns()), target))
        self.clock._set(target)

    def advance_to_next(self) -> bool:
        """Jump virtual time to the next timer and fire it. False if idle."""
        if not self.clock.is_virtual:
            raise RuntimeError("advance_to_next() requires a virtual clock")
        with self._lock:
            due = self._peek_deadline_locked()
        if due is None:
            return False
        handle = self._pop_due(due)
        if handle is None:
            return False
        self._run_handle(handle, max(due, self.clock.now_ns()))
        return True

    def run_until(self, predicate: Callable[[], bool],
                  limit_s: float = 60.0) -> None:
        """Pump virtual timers until `predicate()` holds.

        Raises TimeoutError if the predicate is still false after `limit_s`
        of virtual time or once no timers remain.
        """
        if not self.clock.is_virtual:
            raise RuntimeError("run_until() requires a virtual clock")
        limit_ns = self.clock.now_ns() + s_to_ns(limit_s)
        while not predicate():
            if self.clock.now_ns() > limit_ns:
                raise TimeoutError("virtual time limit exceeded")
            if not self.advance_to_next():
                raise TimeoutError("scheduler idle before predicate held")

    def _peek_deadline_locked(self) -> Optional[int]:
        while self._heap:
            deadline, seq, handle = self._heap[0]
            if handle.cancelled:
                heapq.heappop(self._heap)
                continue
            return deadline
        return None

    # -- real-time driver -------------------------------------------------

    def start(self) -> None:
        if self.clock.is_virtual:
            raise RuntimeError("real-time driver requires a real clock")
        if self._thread is not None:
            return
        self._running = True
        self._thread = threading.Thread(
            target=self._drive, name="mbot-scheduler", daemon=True)
        self._thread.start()

    def stop(self) -> None:
        self._running = False
        with self._lock:
            self._wakeup.notify_all()
        if self._thread is not None:
            self._thread.join(timeout=5.0)
            self._thread = None

    def _drive(self) -> None:
        while self._running:
            now = self.clock.now_ns()
            with self._lock:
                due = self._peek_deadline_locked()
                if due is None:
                    self._wakeup.wait(timeout=0.1)
                    continue
                if due > now:
                    self._wakeup.wait(timeout=min(ns_to_s(due - now), 0.1))
                    continue
            handle = self._pop_due(now)
            if handle is None:
                continue
            try:
                handle.fn()
            except Exception:
                log.exception("timer callback failed")
