from .gcode import (
    GCodeCommand,
    Home,
    MoveAbsolute,
    MoveRelative,
    ReportPosition,
    SetFanSpeed,
    decode,
    decode_position_report,
    encode,
    quantize_mm,
)
from .firmware import SimulatedStageFirmware, SimulatedTransport
from .stage import LineTransport, MachineState, MotionLimits, SerialTransport, StageController

__all__ = [
    "GCodeCommand",
    "Home",
    "MoveAbsolute",
    "MoveRelative",
    "ReportPosition",
    "SetFanSpeed",
    "decode",
    "decode_position_report",
    "encode",
    "quantize_mm",
    "SimulatedStageFirmware",
    "SimulatedTransport",
    "LineTransport",
    "MachineState",
    "MotionLimits",
    "SerialTransport",
    "StageController",
]
