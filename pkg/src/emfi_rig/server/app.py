"""HTTP control surface: status, jog, calibration, campaigns, event stream."""

from __future__ import annotations

import json
import os
from pathlib import Path
from typing import Optional

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse, PlainTextResponse, StreamingResponse
from fastapi.staticfiles import StaticFiles

from ..calibration import PixelPoint
from ..campaign import build_sim_rig
from ..dut import load_fault_model
from ..errors import (
    BusyError,
    DeviceError,
    LimitError,
    NotFoundError,
    ParseError,
    RangeError,
    RigError,
    SafetyError,
    StateError,
    UndefinedRateError,
    ValidationError,
)
from ..pulse import ProbeTip
from ..stats import confidence_interval, success_rate
from .manager import CampaignHandle, RigManager
from . import schemas

_ERROR_MAP = [
    (BusyError, "busy", 409),
    (NotFoundError, "not_found", 404),
    (SafetyError, "state", 409),
    (StateError, "state", 409),
    (LimitError, "validation", 422),
    (RangeError, "validation", 422),
    (ParseError, "validation", 422),
    (UndefinedRateError, "validation", 422),
    (ValidationError, "validation", 422),
    (DeviceError, "device", 502),
]


def _error_response(exc: RigError) -> JSONResponse:
    for klass, code, status in _ERROR_MAP:
        if isinstance(exc, klass):
            body = schemas.ApiError(code=code, message=str(exc))
            return JSONResponse(status_code=status, content=body.model_dump())
    body = schemas.ApiError(code="device", message=str(exc))
    return JSONResponse(status_code=500, content=body.model_dump())


def default_workspace() -> Path:
    return Path(os.environ.get("EMFI_RIG_WORKSPACE", "workspace"))


def create_manager(
    workspace: Optional[Path] = None, fault_model_path: Optional[Path] = None
) -> RigManager:
    model = load_fault_model(fault_model_path) if fault_model_path else None
    rig = build_sim_rig(fault_model=model)
    return RigManager(rig, workspace or default_workspace())


def create_app(manager: Optional[RigManager] = None) -> FastAPI:
    app = FastAPI(title="emfi-rig", version="0.1.0")
    app.state.manager = manager if manager is not None else create_manager()
    mgr: RigManager = app.state.manager

    @app.exception_handler(RigError)
    async def rig_error_handler(_request: Request, exc: RigError):
        return _error_response(exc)

    @app.exception_handler(RequestValidationError)
    async def validation_handler(_request: Request, exc: RequestValidationError):
        body = schemas.ApiError(code="validation", message=str(exc.errors()))
        return JSONResponse(status_code=422, content=body.model_dump())

    # -- rig ------------------------------------------------------------

    @app.get("/status", response_model=schemas.StatusResponse)
    def status():
        return mgr.status()

    @app.post("/home", response_model=schemas.PositionResponse)
    def home():
        pos = mgr.home()
        return {"position": {"x": pos.x, "y": pos.y, "z": pos.z}}

    @app.post("/jog", response_model=schemas.PositionResponse)
    def jog(req: schemas.JogRequest):
        pos = mgr.jog(req.dx, req.dy, req.dz, req.feed_mm_s)
        return {"position": {"x": pos.x, "y": pos.y, "z": pos.z}}

    @app.post("/pulse/arm")
    def pulse_arm():
        mgr.rig.pulse.arm()
        return {"state": mgr.rig.pulse.state.value}

    @app.post("/pulse/disarm")
    def pulse_disarm():
        mgr.rig.pulse.disarm()
        return {"state": mgr.rig.pulse.state.value}

    # -- calibration -------------------------------------------------------

    @app.post("/calibration", response_model=schemas.CalibrationResponse)
    def set_calibration(req: schemas.CalibrationRequest):
        cal = mgr.calibrate(
            PixelPoint(req.probe_center.u, req.probe_center.v),
            PixelPoint(req.camera_center.u, req.camera_center.v),
            req.pixel_scale_um,
            ProbeTip(req.probe.diameter_mm, req.probe.winding),
        )
        return cal.to_dict()

    @app.get("/calibration", response_model=schemas.CalibrationResponse)
    def get_calibration():
        return mgr.get_calibration().to_dict()

    # -- campaigns ----------------------------------------------------------

    @app.post("/campaigns", response_model=schemas.CampaignCreated, status_code=201)
    def start_campaign(req: schemas.CampaignRequest):
        cid = mgr.start_campaign(req.config_dict(), req.idempotency_key)
        return {"id": cid}

    def _campaign_status(handle: CampaignHandle) -> dict:
        stats = None
        argmax = None
        groups = None
        successes = handle.successes
        attempts = handle.attempts_done
        if attempts > 0:
            from ..model import SuccessStats

            s = SuccessStats(successes, attempts)
            low, high = confidence_interval(s, 0.95)
            stats = {
                "successes": successes,
                "attempts": attempts,
                "rate": success_rate(s),
                "ci95_low": low,
                "ci95_high": high,
            }
        if handle.result is not None and handle.result.scan is not None:
            best = handle.result.scan.argmax()
            argmax = list(best) if best is not None else None
        if handle.result is not None and handle.result.groups is not None:
            groups = [
                {"median": g.median, "lo": g.lo, "hi": g.hi, "delays": g.delays}
                for g in handle.result.groups
            ]
        return {
            "id": handle.id,
            "mode": handle.config.mode,
            "state": handle.state,
            "error": handle.error,
            "attempts_done": handle.attempts_done,
            "attempts_total": handle.attempts_total,
            "stats": stats,
            "argmax": argmax,
            "groups": groups,
            "directory": str(handle.directory),
        }

    @app.get("/campaigns/{cid}", response_model=schemas.CampaignStatus)
    def get_campaign(cid: str):
        return _campaign_status(mgr.get_campaign(cid))

    @app.post("/campaigns/{cid}/cancel", response_model=schemas.CampaignStatus)
    def cancel_campaign(cid: str):
        return _campaign_status(mgr.cancel_campaign(cid))

    @app.get("/campaigns/{cid}/heatmap", response_class=PlainTextResponse)
    def campaign_heatmap(cid: str):
        return mgr.heatmap_csv(cid)

    @app.get("/campaigns/{cid}/summary", response_class=PlainTextResponse)
    def campaign_summary(cid: str):
        return mgr.summary_text(cid)

    # -- event stream ---------------------------------------------------------

    @app.get("/events")
    def events(campaign_id: Optional[str] = None, last_id: Optional[int] = None):
        cid = campaign_id
        if cid is None:
            with mgr._cond:
                if mgr.active is not None:
                    cid = mgr.active.id
                elif mgr.campaigns:
                    cid = next(reversed(mgr.campaigns))
        if cid is None:
            raise NotFoundError("no campaign to stream")

        def sse():
            for event in mgr.event_stream(cid, last_id):
                if event["type"] == "attempt":
                    data = json.dumps(event["record"], separators=(",", ":"))
                    yield f"event: attempt\nid: {event['seq']}\ndata: {data}\n\n"
                else:
                    payload = {k: v for k, v in event.items() if k != "type"}
                    data = json.dumps(payload, separators=(",", ":"))
                    yield f"event: lifecycle\ndata: {data}\n\n"

        return StreamingResponse(sse(), media_type="text/event-stream")

    # Serve the operator console when a built frontend is present.
    dist = Path(__file__).resolve().parents[3] / "frontend" / "dist"
    if dist.is_dir():  # pragma: no cover - packaging detail
        app.mount("/", StaticFiles(directory=dist, html=True), name="ui")

    return app
