"""Marlin-style G-code subset: G0/G1/G28/M114/M106.

Dialect notes: G1 moves to an absolute position, G0 jogs by a relative
delta (the firmware this models is a lightly customized Marlin build, and
the distinction keeps every command a single self-contained line).
Coordinates are written with exactly 3 decimals; lines are
newline-terminated on the wire.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

from ..errors import ParseError, ValidationError

# One stepper step in mm; every reported coordinate is a multiple of this.
STEP_MM = 0.0025
_STEPS_PER_MM = 400


def quantize_mm(value: float) -> float:
    """Coordinate as the firmware will realize it: 3-decimal wire rounding,
    then snapping to the 2.5 um step grid."""
    return round(round(value, 3) * _STEPS_PER_MM) / _STEPS_PER_MM


def _round3(value: float) -> float:
    return round(float(value), 3)


@dataclass(frozen=True)
class Home:
    pass


@dataclass(frozen=True)
class MoveAbsolute:
    x: float
    y: float
    z: float
    feed: int  # mm/min

    def __post_init__(self):
        object.__setattr__(self, "x", _round3(self.x))
        object.__setattr__(self, "y", _round3(self.y))
        object.__setattr__(self, "z", _round3(self.z))
        if self.feed <= 0:
            raise ValidationError(f"feed must be > 0, got {self.feed}")


@dataclass(frozen=True)
class MoveRelative:
    dx: float
    dy: float
    dz: float
    feed: int  # mm/min

    def __post_init__(self):
        object.__setattr__(self, "dx", _round3(self.dx))
        object.__setattr__(self, "dy", _round3(self.dy))
        object.__setattr__(self, "dz", _round3(self.dz))
        if self.feed <= 0:
            raise ValidationError(f"feed must be > 0, got {self.feed}")


@dataclass(frozen=True)
class ReportPosition:
    pass


@dataclass(frozen=True)
class SetFanSpeed:
    index: int
    duty: int

    def __post_init__(self):
        if self.index < 0:
            raise ValidationError(f"fan index must be >= 0, got {self.index}")
        if not 0 <= self.duty <= 255:
            raise ValidationError(f"fan duty must be in [0, 255], got {self.duty}")


GCodeCommand = Union[Home, MoveAbsolute, MoveRelative, ReportPosition, SetFanSpeed]


def encode(cmd: GCodeCommand) -> str:
    """Canonical wire line for a command (without the trailing newline)."""
    if isinstance(cmd, Home):
        return "G28"
    if isinstance(cmd, MoveAbsolute):
        return f"G1 X{cmd.x:.3f} Y{cmd.y:.3f} Z{cmd.z:.3f} F{cmd.feed}"
    if isinstance(cmd, MoveRelative):
        return f"G0 X{cmd.dx:.3f} Y{cmd.dy:.3f} Z{cmd.dz:.3f} F{cmd.feed}"
    if isinstance(cmd, ReportPosition):
        return "M114"
    if isinstance(cmd, SetFanSpeed):
        return f"M106 P{cmd.index} S{cmd.duty}"
    raise ValidationError(f"unknown command {cmd!r}")


class _Scanner:
    """Tracks the byte offset while pulling tokens off a line."""

    def __init__(self, line: str):
        self.line = line
        self.pos = 0

    def fail(self, message: str):
        raise ParseError(message, self.pos)

    def expect(self, literal: str) -> None:
        if not self.line.startswith(literal, self.pos):
            self.fail(f"expected {literal!r}")
        self.pos += len(literal)

    def token(self) -> str:
        end = self.line.find(" ", self.pos)
        if end == -1:
            end = len(self.line)
        tok = self.line[self.pos : end]
        if not tok:
            self.fail("expected a token")
        self.pos = end
        return tok

    def skip_space(self) -> None:
        while self.pos < len(self.line) and self.line[self.pos] == " ":
            self.pos += 1

    def number(self, prefix: str) -> float:
        self.expect(prefix)
        start = self.pos
        tok = self.token()
        try:
            return float(tok)
        except ValueError:
            self.pos = start
            self.fail(f"bad number {tok!r}")

    def integer(self, prefix: str) -> int:
        self.expect(prefix)
        start = self.pos
        tok = self.token()
        try:
            return int(tok)
        except ValueError:
            self.pos = start
            self.fail(f"bad integer {tok!r}")

    def done(self) -> None:
        if self.pos != len(self.line):
            self.fail("trailing garbage")


def decode(line: str) -> GCodeCommand:
    """Inverse of encode for the supported subset."""
    s = _Scanner(line.strip("\r\n"))
    opcode = s.token()
    if opcode == "G28":
        s.done()
        return Home()
    if opcode in ("G0", "G1"):
        s.skip_space()
        x = s.number("X")
        s.skip_space()
        y = s.number("Y")
        s.skip_space()
        z = s.number("Z")
        s.skip_space()
        feed = s.integer("F")
        s.done()
        if opcode == "G1":
            return MoveAbsolute(x, y, z, feed)
        return MoveRelative(x, y, z, feed)
    if opcode == "M114":
        s.done()
        return ReportPosition()
    if opcode == "M106":
        s.skip_space()
        index = s.integer("P")
        s.skip_space()
        duty = s.integer("S")
        s.done()
        return SetFanSpeed(index, duty)
    raise ParseError(f"unknown opcode {opcode!r}", 0)


def decode_position_report(line: str) -> tuple[float, float, float]:
    """Parse an 'X:<f> Y:<f> Z:<f> ...' position report; extra fields after
    the Z coordinate (E, step counts) are ignored."""
    s = _Scanner(line.strip("\r\n"))
    x = s.number("X:")
    s.skip_space()
    y = s.number("Y:")
    s.skip_space()
    z = s.number("Z:")
    return (x, y, z)
