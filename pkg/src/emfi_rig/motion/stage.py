"""Stage controller: soft limits, homing discipline, synchronous moves.

One controller instance owns one device; commands are serialized through
it. Serial timeouts retry once, then surface as DeviceError.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Protocol

from ..errors import DeviceError, DeviceTimeout, LimitError, StateError, ValidationError
from ..model import StagePosition
from . import gcode


@dataclass(frozen=True)
class MotionLimits:
    travel_mm: float = 100.0
    step_mm: float = 0.0025
    max_speed_mm_s: float = 10.0

    def __post_init__(self):
        if self.travel_mm <= 0 or self.step_mm <= 0 or self.max_speed_mm_s <= 0:
            raise ValidationError("motion limits must all be positive")
        if self.travel_mm < self.step_mm:
            raise ValidationError("travel must be at least one step")


@dataclass(frozen=True)
class MachineState:
    position: StagePosition
    homed: bool
    moving: bool


class LineTransport(Protocol):
    def write_line(self, line: str) -> None: ...

    def read_line(self, timeout_s: float = 1.0) -> str: ...


class SerialTransport:
    """Real serial port passthrough (requires pyserial at runtime)."""

    def __init__(self, port: str, baudrate: int = 115200, timeout_s: float = 2.0):
        try:
            import serial
        except ImportError as exc:  # pragma: no cover - hardware-only path
            raise DeviceError("pyserial is required for serial backends") from exc
        self._ser = serial.Serial(port, baudrate=baudrate, timeout=timeout_s)

    def write_line(self, line: str) -> None:  # pragma: no cover - hardware-only path
        self._ser.write((line + "\n").encode("utf-8"))

    def read_line(self, timeout_s: float = 1.0) -> str:  # pragma: no cover
        raw = self._ser.readline()
        if not raw:
            raise DeviceTimeout("serial read timed out")
        return raw.decode("utf-8", errors="replace").rstrip("\r\n")


class StageController:
    def __init__(
        self,
        transport: LineTransport,
        limits: MotionLimits = MotionLimits(),
        interlock=None,
        timeout_s: float = 5.0,
    ):
        self.transport = transport
        self.limits = limits
        self.interlock = interlock
        self.timeout_s = timeout_s
        self._homed = False
        self._position: Optional[StagePosition] = None

    # -- wire helpers -------------------------------------------------

    def _exchange(self, line: str) -> list[str]:
        self.transport.write_line(line)
        body: list[str] = []
        while True:
            reply = self.transport.read_line(self.timeout_s)
            if reply == "ok":
                return body
            body.append(reply)

    def _ask(self, cmd: gcode.GCodeCommand) -> list[str]:
        line = gcode.encode(cmd)
        try:
            body = self._exchange(line)
        except DeviceTimeout:
            try:
                body = self._exchange(line)
            except DeviceTimeout as exc:
                raise DeviceError(f"no response to {line!r} after retry") from exc
        for reply in body:
            if reply.startswith("Error:"):
                raise DeviceError(f"firmware rejected {line!r}: {reply}")
        return body

    def _query_position(self) -> StagePosition:
        body = self._ask(gcode.ReportPosition())
        if not body:
            raise DeviceError("firmware returned no position report")
        x, y, z = gcode.decode_position_report(body[0])
        return StagePosition(x, y, z)

    # -- checks -------------------------------------------------------

    def _check_motion_allowed(self) -> None:
        if self.interlock is not None:
            self.interlock.check_motion()

    def _check_limits(self, target: StagePosition) -> None:
        for axis, value in (("x", target.x), ("y", target.y), ("z", target.z)):
            if not 0.0 <= value <= self.limits.travel_mm:
                raise LimitError(
                    f"{axis}={value} outside travel [0, {self.limits.travel_mm:g}] mm"
                )

    @staticmethod
    def _feed_mm_min(speed_mm_s: float) -> int:
        if speed_mm_s <= 0:
            raise ValidationError(f"feed must be > 0 mm/s, got {speed_mm_s}")
        return max(1, round(speed_mm_s * 60.0))

    # -- public API ---------------------------------------------------

    @property
    def state(self) -> MachineState:
        pos = self._position if self._position is not None else StagePosition(0, 0, 0)
        return MachineState(position=pos, homed=self._homed, moving=False)

    def home(self) -> StagePosition:
        self._check_motion_allowed()
        self._ask(gcode.Home())
        self._homed = True
        self._position = self._query_position()
        return self._position

    def get_position(self) -> StagePosition:
        self._position = self._query_position()
        return self._position

    def move_to(self, target: StagePosition, feed_mm_s: float = 10.0) -> StagePosition:
        if not self._homed:
            raise StateError("stage is not homed")
        self._check_motion_allowed()
        self._check_limits(target)
        expected = StagePosition(
            gcode.quantize_mm(target.x), gcode.quantize_mm(target.y), gcode.quantize_mm(target.z)
        )
        if self._position == expected:
            return self._position
        feed = self._feed_mm_min(feed_mm_s)
        self._ask(gcode.MoveAbsolute(target.x, target.y, target.z, feed))
        self._position = self._query_position()
        return self._position

    def jog(self, dx: float = 0.0, dy: float = 0.0, dz: float = 0.0, feed_mm_s: float = 10.0) -> StagePosition:
        if not self._homed:
            raise StateError("stage is not homed")
        self._check_motion_allowed()
        if self._position is None:
            self.get_position()
        target = self._position.offset(dx, dy, dz)
        self._check_limits(target)
        feed = self._feed_mm_min(feed_mm_s)
        self._ask(gcode.MoveRelative(dx, dy, dz, feed))
        self._position = self._query_position()
        return self._position

    def set_fan(self, index: int, duty: int) -> None:
        self._ask(gcode.SetFanSpeed(index, duty))
