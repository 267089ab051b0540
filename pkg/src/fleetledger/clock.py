"""Injected time: a deterministic logical scheduler and a wall-clock twin.

All components take a clock and express timing as integer nanoseconds, so
batch timeouts, commit latencies and recorder gates behave bit-exactly in
logical mode and the same code paths run unmodified against real time.
Callbacks scheduled at equal logical times run in scheduling order.
"""

from __future__ import annotations

import heapq
import itertools
import logging
import threading
import time
from typing import Callable

log = logging.getLogger(__name__)

NS_PER_S = 1_000_000_000


def s_to_ns(seconds: float) -> int:
    return round(seconds * NS_PER_S)


def ns_to_s(ns: int) -> float:
    return ns / NS_PER_S


class TimerHandle:
    __slots__ = ("cancelled",)

    def __init__(self) -> None:
        self.cancelled = False

    def cancel(self) -> None:
        self.cancelled = True


class LogicalClock:
    """Single-threaded discrete-event scheduler with nanosecond time."""

    is_logical = True

    def __init__(self, start_ns: int = 0) -> None:
        self._now = start_ns
        self._heap: list[tuple[int, int, TimerHandle, Callable, tuple]] = []
        self._seq = itertools.count()

    def now_ns(self) -> int:
        return self._now

    def call_at(self, when_ns: int, fn: Callable, *args) -> TimerHandle:
        handle = TimerHandle()
        heapq.heappush(
            self._heap, (max(when_ns, self._now), next(self._seq), handle, fn, args)
        )
        return handle

    def call_later(self, delay_ns: int, fn: Callable, *args) -> TimerHandle:
        return self.call_at(self._now + delay_ns, fn, *args)

    def _pop_due(self, limit_ns: int | None) -> tuple | None:
        while self._heap:
            when, _, handle, fn, args = self._heap[0]
            if limit_ns is not None and when > limit_ns:
                return None
            heapq.heappop(self._heap)
            if handle.cancelled:
                continue
            return when, fn, args
        return None

    def run_ready(self) -> int:
        """Execute everything scheduled at the current instant; time stays put."""
        executed = 0
        while True:
            item = self._pop_due(self._now)
            if item is None:
                return executed
            _, fn, args = item
            fn(*args)
            executed += 1

    def run_until(self, deadline_ns: int) -> None:
        """Execute all events due up to the deadline; ends with now == deadline."""
        while True:
            item = self._pop_due(deadline_ns)
            if item is None:
                break
            when, fn, args = item
            self._now = when
            fn(*args)
        if deadline_ns > self._now:
            self._now = deadline_ns

    def run_until_idle(self, max_ns: int | None = None) -> None:
        while True:
            item = self._pop_due(max_ns)
            if item is None:
                if max_ns is not None and max_ns > self._now:
                    self._now = max_ns
                return
            when, fn, args = item
            self._now = when
            fn(*args)

    def pending_events(self) -> int:
        return sum(1 for _, _, h, _, _ in self._heap if not h.cancelled)


class WallClock:
    """Real-time scheduler: one worker thread drains a heap of timers.

    Running every timer on a single worker serializes block cutting and
    delivery exactly like the logical clock's single thread does.
    """

    is_logical = False

    def __init__(self) -> None:
        self._heap: list[tuple[int, int, TimerHandle, Callable, tuple]] = []
        self._seq = itertools.count()
        self._cond = threading.Condition()
        self._stopped = False
        self._thread = threading.Thread(target=self._run, name="clock-worker", daemon=True)
        self._thread.start()

    def now_ns(self) -> int:
        return time.monotonic_ns()

    def call_at(self, when_ns: int, fn: Callable, *args) -> TimerHandle:
        handle = TimerHandle()
        with self._cond:
            heapq.heappush(self._heap, (when_ns, next(self._seq), handle, fn, args))
            self._cond.notify()
        return handle

    def call_later(self, delay_ns: int, fn: Callable, *args) -> TimerHandle:
        return self.call_at(self.now_ns() + max(delay_ns, 0), fn, *args)

    def _run(self) -> None:
        while True:
            with self._cond:
                while True:
                    if self._stopped:
                        return
                    if not self._heap:
                        self._cond.wait()
                        continue
                    when, _, handle, fn, args = self._heap[0]
                    if handle.cancelled:
                        heapq.heappop(self._heap)
                        continue
                    delay = when - time.monotonic_ns()
                    if delay > 0:
                        self._cond.wait(delay / NS_PER_S)
                        continue
                    heapq.heappop(self._heap)
                    break
            try:
                fn(*args)
            except Exception:
                log.exception("timer callback failed")

    def run_ready(self) -> int:
        return 0

    def shutdown(self) -> None:
        with self._cond:
            self._stopped = True
            self._cond.notify()
        self._thread.join(timeout=5)
