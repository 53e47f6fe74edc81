"""Single-owner rig manager behind the HTTP API.

Exactly one campaign runs at a time; it owns the device handles for its
whole duration. Manual commands (jog, home, calibration) acquire the same
device lock with a short timeout, so contention surfaces as busy errors
instead of blocking the campaign loop. Subscribers consume a per-campaign
event list that is appended under a condition variable after every
attempt.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterator, Optional
from uuid import uuid4

from ..calibration import CalibrationStore, PixelPoint, compute_probe_offset
from ..campaign import (
    CampaignConfig,
    CampaignResult,
    CancelToken,
    Rig,
    run_campaign,
    total_attempts,
)
from ..errors import BusyError, NotFoundError
from ..model import AttemptOutcome, AttemptRecord, FAULT_OUTCOMES, StagePosition
from ..persistence import export_heatmap, export_summary
from ..pulse import ProbeTip


@dataclass
class CampaignHandle:
    id: str
    config: CampaignConfig
    directory: Path
    state: str = "running"
    error: Optional[str] = None
    cancel: CancelToken = field(default_factory=CancelToken)
    events: list[dict] = field(default_factory=list)
    outcome_counts: dict[AttemptOutcome, int] = field(default_factory=dict)
    attempts_done: int = 0
    attempts_total: int = 0
    last_record: Optional[AttemptRecord] = None
    result: Optional[CampaignResult] = None
    thread: Optional[threading.Thread] = None

    def count(self, *outcomes: AttemptOutcome) -> int:
        return sum(self.outcome_counts.get(o, 0) for o in outcomes)

    @property
    def successes(self) -> int:
        if self.config.mode == "attack" or self.config.mode == "sweep":
            return self.count(AttemptOutcome.BYPASS_SUCCESS)
        return self.count(*FAULT_OUTCOMES)


class RigManager:
    def __init__(self, rig: Rig, workspace: str | Path):
        self.rig = rig
        self.workspace = Path(workspace)
        self.workspace.mkdir(parents=True, exist_ok=True)
        self.calibration_store = CalibrationStore(self.workspace / "calibrations")
        self._cond = threading.Condition()
        self._device_lock = threading.Lock()
        self.campaigns: dict[str, CampaignHandle] = {}
        self.active: Optional[CampaignHandle] = None
        self._idempotency: dict[str, str] = {}

    # -- device commands -----------------------------------------------

    def _with_devices(self, op):
        with self._cond:
            if self._busy():
                raise BusyError("the rig is owned by a running campaign")
        if not self._device_lock.acquire(timeout=0.25):
            raise BusyError("the rig is owned by a running campaign")
        try:
            return op()
        finally:
            self._device_lock.release()

    def home(self) -> StagePosition:
        return self._with_devices(self.rig.stage.home)

    def jog(self, dx: float, dy: float, dz: float, feed_mm_s: float) -> StagePosition:
        return self._with_devices(lambda: self.rig.stage.jog(dx, dy, dz, feed_mm_s))

    def calibrate(
        self,
        probe_center: PixelPoint,
        camera_center: PixelPoint,
        pixel_scale_um: float,
        probe: ProbeTip,
    ):
        def op():
            self.rig.mount_tip(probe)
            cal = compute_probe_offset(
                probe_center,
                camera_center,
                pixel_scale_um,
                probe_ident=probe.ident,
                timestamp=datetime.now(timezone.utc).isoformat(),
            )
            self.rig.calibration = cal
            self.calibration_store.save(cal)
            return cal

        return self._with_devices(op)

    def get_calibration(self):
        if self.rig.calibration is None:
            raise NotFoundError(f"no calibration for mounted tip {self.rig.probe.ident!r}")
        return self.rig.calibration

    # -- campaign lifecycle ------------------------------------------------

    def _busy(self) -> bool:
        return self.active is not None and self.active.state == "running"

    def start_campaign(self, config_dict: dict, idempotency_key: Optional[str] = None) -> str:
        with self._cond:
            if idempotency_key is not None and idempotency_key in self._idempotency:
                return self._idempotency[idempotency_key]
            if self._busy():
                raise BusyError("a campaign is already running")
            config = CampaignConfig.from_dict(config_dict)
            cid = f"{config.mode}-{uuid4().hex[:8]}"
            handle = CampaignHandle(
                id=cid,
                config=config,
                directory=self.workspace / cid,
                attempts_total=total_attempts(config),
            )
            self.campaigns[cid] = handle
            if idempotency_key is not None:
                self._idempotency[idempotency_key] = cid
            self.active = handle
            cal = self.rig.calibration
            started = {
                "type": "lifecycle",
                "phase": "started",
                "campaign_id": cid,
                "mode": config.mode,
                "attempts_per_position": config.attempts_per_position,
                "anchor": {"x": self.rig.anchor.corner.x, "y": self.rig.anchor.corner.y},
                "offset": {"dx": cal.dx if cal else 0.0, "dy": cal.dy if cal else 0.0},
                "grid": None
                if config.grid is None
                else {
                    "x0": config.grid.x0,
                    "y0": config.grid.y0,
                    "width": config.grid.width,
                    "height": config.grid.height,
                    "pitch": config.grid.pitch,
                },
            }
            handle.events.append(started)
            self._cond.notify_all()
            handle.thread = threading.Thread(
                target=self._run, args=(handle,), name=f"campaign-{cid}", daemon=True
            )
            handle.thread.start()
            return cid

    def _run(self, handle: CampaignHandle) -> None:
        def on_attempt(record: AttemptRecord) -> None:
            with self._cond:
                handle.attempts_done += 1
                handle.outcome_counts[record.outcome] = (
                    handle.outcome_counts.get(record.outcome, 0) + 1
                )
                handle.last_record = record
                handle.events.append(
                    {"type": "attempt", "seq": record.seq, "record": record.to_dict()}
                )
                self._cond.notify_all()

        try:
            with self._device_lock:
                result = run_campaign(
                    self.rig,
                    handle.config,
                    handle.directory,
                    on_attempt=on_attempt,
                    cancel=handle.cancel,
                )
            final = "cancelled" if result.cancelled else "completed"
            with self._cond:
                handle.result = result
                handle.state = final
        except Exception as exc:  # surfaced via campaign status, not the log
            with self._cond:
                handle.state = "failed"
                handle.error = str(exc)
        finally:
            with self._cond:
                handle.events.append(
                    {
                        "type": "lifecycle",
                        "phase": handle.state,
                        "campaign_id": handle.id,
                    }
                )
                if self.active is handle:
                    self.active = None
                self._cond.notify_all()

    def get_campaign(self, cid: str) -> CampaignHandle:
        handle = self.campaigns.get(cid)
        if handle is None:
            raise NotFoundError(f"unknown campaign {cid!r}")
        return handle

    def cancel_campaign(self, cid: str, wait_s: float = 30.0) -> CampaignHandle:
        handle = self.get_campaign(cid)
        handle.cancel.cancel()
        if handle.thread is not None:
            handle.thread.join(timeout=wait_s)
        return handle

    # -- event stream ----------------------------------------------------

    def event_stream(self, cid: str, last_seq: Optional[int] = None) -> Iterator[dict]:
        """Replay-then-follow of a campaign's events; attempt events with
        seq <= last_seq are skipped so clients resume without duplicates."""
        handle = self.get_campaign(cid)
        idx = 0
        while True:
            with self._cond:
                while idx >= len(handle.events) and handle.state == "running":
                    self._cond.wait(timeout=0.5)
                chunk = handle.events[idx:]
                idx += len(chunk)
                done = handle.state != "running" and idx >= len(handle.events)
            for event in chunk:
                if (
                    event["type"] == "attempt"
                    and last_seq is not None
                    and event["seq"] <= last_seq
                ):
                    continue
                yield event
            if done:
                return

    # -- status and exports ------------------------------------------------

    def status(self) -> dict:
        with self._cond:
            active = self.active
            busy = self._busy()
        if busy and active.last_record is not None:
            pos = active.last_record.position
            homed = True
        else:
            st = self.rig.stage.state
            pos, homed = st.position, st.homed
        campaign = None
        if active is not None:
            campaign = {
                "id": active.id,
                "mode": active.config.mode,
                "state": active.state,
                "attempts_done": active.attempts_done,
                "attempts_total": active.attempts_total,
            }
        cal = self.rig.calibration
        return {
            "homed": homed,
            "position": {"x": pos.x, "y": pos.y, "z": pos.z},
            "pulse_state": self.rig.pulse.state.value,
            "power": {
                "ps_on": self.rig.trigger.power.ps_on,
                "pwr_sw": self.rig.trigger.power.pwr_sw,
                "on": self.rig.trigger.power.target_on,
            },
            "supplies": {
                "v_soc": self.rig.trigger.supplies.v_soc,
                "v_core": self.rig.trigger.supplies.v_core,
            },
            "probe": self.rig.probe.ident,
            "calibrated": cal is not None and cal.probe_ident == self.rig.probe.ident,
            "busy": busy,
            "campaign": campaign,
        }

    def heatmap_csv(self, cid: str) -> str:
        handle = self.get_campaign(cid)
        if handle.result is None or handle.result.scan is None:
            raise NotFoundError(f"campaign {cid!r} has no completed scan result")
        return export_heatmap(handle.result.scan)

    def summary_text(self, cid: str) -> str:
        handle = self.get_campaign(cid)
        if handle.result is None or handle.result.stats is None:
            raise NotFoundError(f"campaign {cid!r} has no completed attack stats")
        return export_summary([(handle.config.plan, handle.result.stats)])
