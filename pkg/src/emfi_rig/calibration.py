"""Probe-tip offset calibration, die-to-stage mapping, and Z-depth search.

Centers come in as operator-marked pixel coordinates (no image processing
here). Offsets are stored per probe tip and must be re-measured after a
tip change; the rotation field is reserved and currently always zero.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional

from .errors import NotFoundError, RigError, ValidationError
from .model import StagePosition

DEFAULT_FRAME_PX = (1920, 1080)
MAX_OFFSET_MM = 50.0


@dataclass(frozen=True)
class PixelPoint:
    u: float
    v: float

    def __post_init__(self):
        if not (math.isfinite(self.u) and math.isfinite(self.v)):
            raise ValidationError("pixel coordinates must be finite")


@dataclass(frozen=True)
class OffsetCalibration:
    """Stage-frame offset from a camera-located point to the probe tip."""

    dx: float
    dy: float
    pixel_scale_um: float
    timestamp: str
    probe_ident: str
    rotation_deg: float = 0.0

    def __post_init__(self):
        if self.pixel_scale_um <= 0:
            raise ValidationError(f"pixel scale must be > 0, got {self.pixel_scale_um}")
        if math.hypot(self.dx, self.dy) >= MAX_OFFSET_MM:
            raise ValidationError(
                f"offset magnitude must be < {MAX_OFFSET_MM:g} mm, got ({self.dx}, {self.dy})"
            )

    def to_dict(self) -> dict:
        return {
            "version": 1,
            "dx": self.dx,
            "dy": self.dy,
            "pixel_scale_um": self.pixel_scale_um,
            "timestamp": self.timestamp,
            "probe_ident": self.probe_ident,
            "rotation_deg": self.rotation_deg,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "OffsetCalibration":
        if d.get("version") != 1:
            raise ValidationError(f"unsupported calibration version {d.get('version')!r}")
        return cls(
            dx=d["dx"],
            dy=d["dy"],
            pixel_scale_um=d["pixel_scale_um"],
            timestamp=d["timestamp"],
            probe_ident=d["probe_ident"],
            rotation_deg=d.get("rotation_deg", 0.0),
        )


@dataclass(frozen=True)
class DieAnchor:
    """Stage position of the die corner plus the die extent."""

    corner: StagePosition
    width: float
    height: float

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ValidationError("die extent must be positive")


def compute_probe_offset(
    probe_center: PixelPoint,
    camera_center: PixelPoint,
    pixel_scale_um: float,
    probe_ident: str,
    timestamp: str = "",
    frame_px: tuple[int, int] = DEFAULT_FRAME_PX,
) -> OffsetCalibration:
    """Offset between camera center and probe-tip center, in stage mm.

    Sign convention: adding the offset to a camera-located stage point
    yields the stage target that puts the probe tip over that point.
    """
    if pixel_scale_um <= 0:
        raise ValidationError(f"pixel scale must be > 0, got {pixel_scale_um}")
    for name, pt in (("probe", probe_center), ("camera", camera_center)):
        if not (0 <= pt.u <= frame_px[0] and 0 <= pt.v <= frame_px[1]):
            raise ValidationError(f"{name} center {pt} outside frame {frame_px}")
    dx = (probe_center.u - camera_center.u) * pixel_scale_um / 1000.0
    dy = (probe_center.v - camera_center.v) * pixel_scale_um / 1000.0
    return OffsetCalibration(
        dx=dx,
        dy=dy,
        pixel_scale_um=pixel_scale_um,
        timestamp=timestamp,
        probe_ident=probe_ident,
    )


def die_to_stage(
    die_point: tuple[float, float],
    anchor: DieAnchor,
    cal: OffsetCalibration,
    z: Optional[float] = None,
    allow_outside: bool = False,
) -> StagePosition:
    """Map die-relative coordinates to the probe-aligned stage target."""
    x, y = die_point
    if not allow_outside and not (0 <= x <= anchor.width and 0 <= y <= anchor.height):
        raise ValidationError(
            f"die point ({x}, {y}) outside die extent"
            f" {anchor.width} x {anchor.height} mm"
        )
    return StagePosition(
        anchor.corner.x + x + cal.dx,
        anchor.corner.y + y + cal.dy,
        anchor.corner.z if z is None else z,
    )


def stage_to_die(pos: StagePosition, anchor: DieAnchor, cal: OffsetCalibration) -> tuple[float, float]:
    """Inverse of die_to_stage for the XY plane."""
    return (pos.x - anchor.corner.x - cal.dx, pos.y - anchor.corner.y - cal.dy)


def find_z_touch(
    start_z: float,
    step: float,
    gap_threshold: float,
    gap_oracle: Callable[[float], float],
    z_min: float = 0.0,
) -> float:
    """Closest-approach z that still keeps at least gap_threshold clearance.

    `gap_oracle(z)` reports the gap between tip and surface at height z
    (simulated, or an operator confirming the paper-feeler check). Bisects
    the crossing, then walks down in `step` increments; the result is
    within one step of surface + threshold and never penetrates it.
    """
    if step <= 0:
        raise ValidationError(f"step must be > 0, got {step}")
    if gap_threshold < 0:
        raise ValidationError(f"gap threshold must be >= 0, got {gap_threshold}")
    if gap_oracle(start_z) < gap_threshold:
        raise RigError(f"no clearance at start z={start_z}; start above the surface")
    if gap_oracle(z_min) >= gap_threshold:
        raise NotFoundError("travel exhausted before losing clearance; surface not found")

    # Bisect to bracket the clearance boundary within one step.
    hi, lo = start_z, z_min  # clearance ok at hi, not ok at lo
    while hi - lo > step:
        mid = (hi + lo) / 2
        if gap_oracle(mid) >= gap_threshold:
            hi = mid
        else:
            lo = mid
    # Walk down in full steps from the bracket to the last safe height.
    z = hi
    while z - step >= z_min and gap_oracle(z - step) >= gap_threshold:
        z -= step
    return z


class CalibrationStore:
    """Per-tip calibration documents in the campaign workspace."""

    def __init__(self, directory: str | Path):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)

    def _path(self, probe_ident: str) -> Path:
        return self.directory / f"calibration-{probe_ident}.json"

    def save(self, cal: OffsetCalibration) -> Path:
        path = self._path(cal.probe_ident)
        path.write_text(json.dumps(cal.to_dict(), indent=2) + "\n")
        return path

    def load(self, probe_ident: str) -> OffsetCalibration:
        path = self._path(probe_ident)
        if not path.exists():
            raise NotFoundError(f"no calibration stored for tip {probe_ident!r}")
        return OffsetCalibration.from_dict(json.loads(path.read_text()))

    def invalidate(self, probe_ident: str) -> None:
        path = self._path(probe_ident)
        if path.exists():
            path.unlink()
