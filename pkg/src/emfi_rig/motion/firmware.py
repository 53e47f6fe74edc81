"""In-process stand-in for the motion controller firmware.

Implements the wire subset with stock semantics: soft-limit clamping,
step-grid quantization, and motion duration = Chebyshev distance over the
commanded (speed-capped) feed, slept on the shared clock.
"""

from __future__ import annotations

from collections import deque

from ..clock import Clock
from ..errors import DeviceTimeout, ParseError
from . import gcode
from .gcode import _STEPS_PER_MM


class SimulatedStageFirmware:
    def __init__(self, clock: Clock, travel_mm: float = 100.0, max_speed_mm_s: float = 10.0):
        self.clock = clock
        self.travel_mm = travel_mm
        self.max_speed = max_speed_mm_s
        self.steps = [0, 0, 0]
        self.homed = False
        self.fans: dict[int, int] = {}

    @property
    def position_mm(self) -> tuple[float, float, float]:
        return tuple(s / _STEPS_PER_MM for s in self.steps)

    def _clamp_steps(self, value_mm: float) -> int:
        clamped = min(max(value_mm, 0.0), self.travel_mm)
        return round(clamped * _STEPS_PER_MM)

    def _travel_to(self, target_steps: list[int], feed_mm_min: int) -> None:
        speed = min(feed_mm_min / 60.0, self.max_speed)
        dist_steps = max(abs(t - c) for t, c in zip(target_steps, self.steps))
        duration = (dist_steps / _STEPS_PER_MM) / speed
        self.clock.sleep(duration)
        self.steps = target_steps

    def handle_line(self, line: str) -> list[str]:
        try:
            cmd = gcode.decode(line)
        except ParseError as exc:
            return [f"Error:{exc}", "ok"]

        if isinstance(cmd, gcode.Home):
            speed = self.max_speed
            dist = max(abs(s) for s in self.steps) / _STEPS_PER_MM
            self.clock.sleep(dist / speed)
            self.steps = [0, 0, 0]
            self.homed = True
            return ["ok"]
        if isinstance(cmd, gcode.MoveAbsolute):
            if not self.homed:
                return ["Error:home first", "ok"]
            target = [self._clamp_steps(v) for v in (cmd.x, cmd.y, cmd.z)]
            self._travel_to(target, cmd.feed)
            return ["ok"]
        if isinstance(cmd, gcode.MoveRelative):
            if not self.homed:
                return ["Error:home first", "ok"]
            current = self.position_mm
            target = [
                self._clamp_steps(c + d) for c, d in zip(current, (cmd.dx, cmd.dy, cmd.dz))
            ]
            self._travel_to(target, cmd.feed)
            return ["ok"]
        if isinstance(cmd, gcode.ReportPosition):
            x, y, z = self.position_mm
            sx, sy, sz = self.steps
            report = f"X:{x:.4f} Y:{y:.4f} Z:{z:.4f} E:0.0000 Count X:{sx} Y:{sy} Z:{sz}"
            return [report, "ok"]
        if isinstance(cmd, gcode.SetFanSpeed):
            self.fans[cmd.index] = cmd.duty
            return ["ok"]
        return [f"Error:unsupported {line!r}", "ok"]


class SimulatedTransport:
    """Loopback line transport wired straight into the firmware."""

    def __init__(self, firmware: SimulatedStageFirmware):
        self.firmware = firmware
        self._rx: deque[str] = deque()

    def write_line(self, line: str) -> None:
        self._rx.extend(self.firmware.handle_line(line))

    def read_line(self, timeout_s: float = 1.0) -> str:
        if not self._rx:
            raise DeviceTimeout("no response from simulated firmware")
        return self._rx.popleft()
