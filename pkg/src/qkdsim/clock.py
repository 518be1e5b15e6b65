"""Clock abstraction and a deterministic event scheduler.

Every time-aware component takes a clock object instead of reading wall
time, so a whole run can execute under a simulated clock (fast,
reproducible) or a wall clock (real-time demos).
"""

from __future__ import annotations

import heapq
import time
from typing import Callable


class SimClock:
    """Monotone simulated clock. Only ever moves forward."""

    def __init__(self, start: float = 0.0):
        self._now = float(start)

    def now(self) -> float:
        return self._now

    def advance(self, dt: float) -> None:
        if dt < 0:
            raise ValueError("clock cannot move backwards")
        self._now += dt

    def advance_to(self, t: float) -> None:
        if t > self._now:
            self._now = t


class WallClock:
    """Wall-clock adapter with the same read interface as SimClock."""

    def __init__(self):
        self._t0 = time.monotonic()

    def now(self) -> float:
        return time.monotonic() - self._t0

    def advance(self, dt: float) -> None:
        # Real time passes on its own; modelled latencies are a no-op here.
        pass

    def advance_to(self, t: float) -> None:
        pass


class Scheduler:
    """Priority-queue event loop over a SimClock.

    Events at the same timestamp run in (priority, insertion order).
    A handler may advance the clock itself (e.g. modelled message
    latencies); later events never run before their scheduled time but
    may run late if a handler overran it, which keeps time monotone.
    """

    def __init__(self, clock: SimClock):
        self.clock = clock
        self._heap: list[tuple[float, int, int, Callable[[], None]]] = []
        self._seq = 0

    def at(self, t: float, fn: Callable[[], None], priority: int = 5) -> None:
        heapq.heappush(self._heap, (t, priority, self._seq, fn))
        self._seq += 1

    def run_until(self, t_end: float) -> None:
        while self._heap and self._heap[0][0] <= t_end:
            t, _prio, _seq, fn = heapq.heappop(self._heap)
            self.clock.advance_to(t)
            fn()
        self.clock.advance_to(t_end)
