"""Pydantic request/response bodies for the HTTP control surface.

Campaign configs ride through as the same JSON documents the campaign
directory snapshots use (one schema, one parser); the semantic validation
lives in CampaignConfig.from_dict.
"""

from __future__ import annotations

from typing import Any, Literal, Optional

from pydantic import BaseModel, Field


class ApiError(BaseModel):
    code: Literal["validation", "state", "device", "busy", "not_found"]
    message: str


class PositionBody(BaseModel):
    x: float
    y: float
    z: float


class PowerBody(BaseModel):
    ps_on: bool
    pwr_sw: bool
    on: bool


class SuppliesBody(BaseModel):
    v_soc: float
    v_core: float


class CampaignBrief(BaseModel):
    id: str
    mode: str
    state: str
    attempts_done: int
    attempts_total: int


class StatusResponse(BaseModel):
    homed: bool
    position: PositionBody
    pulse_state: str
    power: PowerBody
    supplies: SuppliesBody
    probe: str
    calibrated: bool
    busy: bool
    campaign: Optional[CampaignBrief] = None


class JogRequest(BaseModel):
    dx: float = 0.0
    dy: float = 0.0
    dz: float = 0.0
    feed_mm_s: float = 10.0


class PositionResponse(BaseModel):
    position: PositionBody


class PixelPointBody(BaseModel):
    u: float
    v: float


class ProbeBody(BaseModel):
    diameter_mm: float
    winding: Literal["CW", "CCW"]


class CalibrationRequest(BaseModel):
    probe_center: PixelPointBody
    camera_center: PixelPointBody
    pixel_scale_um: float
    probe: ProbeBody


class CalibrationResponse(BaseModel):
    dx: float
    dy: float
    pixel_scale_um: float
    timestamp: str
    probe_ident: str
    rotation_deg: float


class CampaignRequest(BaseModel):
    """Campaign config document plus an optional idempotency key."""

    version: int = 1
    mode: Literal["scan", "attack", "sweep"]
    payload: dict[str, Any]
    pulse: dict[str, Any]
    supplies: dict[str, Any]
    seed: int = 0
    epoch: Optional[str] = None
    plan: Optional[dict[str, Any]] = None
    grid: Optional[dict[str, Any]] = None
    attempts_per_position: int = 100
    position: Optional[list[float]] = None
    attempts: int = 0
    sweep: Optional[dict[str, Any]] = None
    scan_z: Optional[float] = None
    spi_timeout_s: float = 5.0
    feed_mm_s: float = 10.0
    exclude_error_attempts: bool = False
    idempotency_key: Optional[str] = Field(default=None, exclude=True)

    def config_dict(self) -> dict:
        return self.model_dump(exclude={"idempotency_key"})


class CampaignCreated(BaseModel):
    id: str


class StatsBody(BaseModel):
    successes: int
    attempts: int
    rate: Optional[float] = None
    ci95_low: Optional[float] = None
    ci95_high: Optional[float] = None


class DelayGroupBody(BaseModel):
    median: int
    lo: int
    hi: int
    delays: list[int]


class CampaignStatus(BaseModel):
    id: str
    mode: str
    state: Literal["running", "completed", "cancelled", "failed"]
    error: Optional[str] = None
    attempts_done: int
    attempts_total: int
    stats: Optional[StatsBody] = None
    argmax: Optional[list[float]] = None
    groups: Optional[list[DelayGroupBody]] = None
    directory: str
