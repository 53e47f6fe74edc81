"""Wall-clock and virtual-clock time sources.

Every device latency in the package is expressed against a Clock so that
simulated campaigns run in milliseconds of real time while keeping a
realistic, deterministic timeline. Hardware backends use WallClock.
"""

from __future__ import annotations

import time


class Clock:
    """Time source interface: monotonic seconds plus a sleep primitive."""

    def now(self) -> float:
        raise NotImplementedError

    def sleep(self, seconds: float) -> None:
        raise NotImplementedError


class WallClock(Clock):
    def __init__(self):
        self._t0 = time.monotonic()

    def now(self) -> float:
        return time.monotonic() - self._t0

    def sleep(self, seconds: float) -> None:
        if seconds > 0:
            time.sleep(seconds)


class SimClock(Clock):
    """Virtual clock: sleeping advances time instantly."""

    def __init__(self, start: float = 0.0):
        self._now = float(start)

    def now(self) -> float:
        return self._now

    def sleep(self, seconds: float) -> None:
        if seconds < 0:
            raise ValueError("cannot sleep a negative duration")
        self._now += seconds

    def advance_to(self, t: float) -> None:
        if t < self._now:
            raise ValueError(f"cannot move the clock backwards ({t} < {self._now})")
        self._now = t

    def reset(self, t: float = 0.0) -> None:
        """Set the clock directly; used when resuming a persisted campaign."""
        self._now = float(t)
