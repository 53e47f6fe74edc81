"""Attack-cycle orchestration: grid scans, delay brute-force with median
grouping, fixed-point attack runs, and the motion/pulse safety interlock.

Every cycle executes the same sequence:
disarm -> move -> arm -> charge -> power_on -> await SPI -> (hardware
trigger fires the pulse after the plan delay) -> collect -> classify ->
power_off. Attempts persist incrementally, so a killed campaign resumes
from its log and finishes byte-identically to an uninterrupted run.
"""

from __future__ import annotations

import random
import statistics
import threading
from dataclasses import dataclass
from datetime import datetime, timedelta, timezone
from pathlib import Path
from typing import Callable, Optional

from .calibration import DieAnchor, OffsetCalibration, die_to_stage, stage_to_die
from .clock import Clock, SimClock
from .dut import DutConfig, FaultModel, SimulatedDut, classify_response, default_fault_model
from .errors import (
    DeviceError,
    DeviceTimeout,
    SafetyError,
    ValidationError,
)
from .model import (
    ArkVerify,
    AttemptOutcome,
    AttemptRecord,
    GridSpec,
    PayloadKind,
    ScanResult,
    StagePosition,
    SuccessStats,
    TriggerPlan,
    SupplyVoltages,
    generate_grid,
    payload_from_dict,
    payload_to_dict,
)
from .motion import MotionLimits, SimulatedStageFirmware, SimulatedTransport, StageController
from .persistence import (
    CampaignLog,
    export_heatmap,
    export_summary,
    scan_result_from_records,
    write_export,
)
from .pulse import ProbeTip, PulseConfig, PulseGenerator
from .trigger_power import Svi2Command, TriggerPowerConfig, TriggerPowerUnit

EV_DISARM = "disarm"
EV_MOVE = "move"
EV_ARM = "arm"
EV_CHARGE = "charge"
EV_POWER_ON = "power_on"
EV_SPI = "spi_event"
EV_TRIGGER = "trigger"
EV_COLLECT = "collect"
EV_CLASSIFY = "classify"
EV_POWER_OFF = "power_off"
EV_SPI_TIMEOUT = "spi_timeout"
EV_DEVICE_ERROR = "device_error"

# Full event sequence of an undisturbed cycle, in order.
CANONICAL_CYCLE_EVENTS = (
    EV_DISARM,
    EV_MOVE,
    EV_ARM,
    EV_CHARGE,
    EV_POWER_ON,
    EV_SPI,
    EV_TRIGGER,
    EV_COLLECT,
    EV_CLASSIFY,
    EV_POWER_OFF,
)


class Interlock:
    """Safety rule: the stage may not move while the pulse side is armed.

    Also keeps an append-only trace of arm/disarm/motion checkpoints so
    campaigns can be audited for ordering violations.
    """

    def __init__(self):
        self.pulse_armed = False
        self.trace: list[str] = []

    @property
    def motion_permitted(self) -> bool:
        return not self.pulse_armed

    def set_pulse_armed(self, armed: bool) -> None:
        self.pulse_armed = armed
        self.trace.append(EV_ARM if armed else EV_DISARM)

    def check_motion(self) -> None:
        if self.pulse_armed:
            raise SafetyError("stage motion is locked out while the pulse generator is armed")
        self.trace.append(EV_MOVE)


class CancelToken:
    def __init__(self):
        self._event = threading.Event()

    def cancel(self) -> None:
        self._event.set()

    @property
    def cancelled(self) -> bool:
        return self._event.is_set()


@dataclass
class Rig:
    """All device handles a campaign owns for its duration."""

    clock: Clock
    stage: StageController
    pulse: PulseGenerator
    trigger: TriggerPowerUnit
    dut: SimulatedDut
    interlock: Interlock
    anchor: DieAnchor
    calibration: Optional[OffsetCalibration]
    probe: ProbeTip

    def mount_tip(self, tip: ProbeTip) -> None:
        """Physically swapping the tip invalidates the active calibration."""
        if tip.ident != self.probe.ident:
            self.calibration = None
        self.probe = tip

    def require_calibration(self) -> OffsetCalibration:
        if self.calibration is None:
            raise ValidationError(
                f"no probe-offset calibration for tip {self.probe.ident!r};"
                " run the calibration procedure first"
            )
        if self.calibration.probe_ident != self.probe.ident:
            raise ValidationError(
                f"calibration is for tip {self.calibration.probe_ident!r},"
                f" but {self.probe.ident!r} is mounted"
            )
        return self.calibration


def build_sim_rig(
    fault_model: Optional[FaultModel] = None,
    dut_config: DutConfig = DutConfig(),
    anchor: Optional[DieAnchor] = None,
    calibration: Optional[OffsetCalibration] = None,
    limits: MotionLimits = MotionLimits(),
    trigger_config: TriggerPowerConfig = TriggerPowerConfig(),
    charge_latency_s: float = 0.05,
    probe: ProbeTip = ProbeTip(4, "CW"),
) -> Rig:
    """Fully simulated rig on a virtual clock; the desk-scale test bench."""
    clock = SimClock()
    interlock = Interlock()
    firmware = SimulatedStageFirmware(clock, limits.travel_mm, limits.max_speed_mm_s)
    stage = StageController(SimulatedTransport(firmware), limits, interlock=interlock)
    pulse = PulseGenerator(clock, charge_latency_s, interlock=interlock)
    pulse.set_config(PulseConfig(500.0, 73.0, probe))
    model = fault_model if fault_model is not None else default_fault_model()
    dut = SimulatedDut(clock, model, dut_config)
    trigger = TriggerPowerUnit(clock, dut, trigger_config)
    if anchor is None:
        anchor = DieAnchor(corner=StagePosition(30.0, 30.0, 12.1), width=22.0, height=9.0)
    if calibration is None:
        calibration = OffsetCalibration(
            dx=0.55,
            dy=-0.35,
            pixel_scale_um=10.0,
            timestamp="1970-01-01T00:00:00+00:00",
            probe_ident=probe.ident,
        )
    return Rig(
        clock=clock,
        stage=stage,
        pulse=pulse,
        trigger=trigger,
        dut=dut,
        interlock=interlock,
        anchor=anchor,
        calibration=calibration,
        probe=probe,
    )


@dataclass(frozen=True)
class GridWindow:
    """Scan window in die coordinates (mm from the die corner)."""

    x0: float
    y0: float
    width: float
    height: float
    pitch: float

    def __post_init__(self):
        if self.pitch <= 0:
            raise ValidationError(f"pitch must be > 0, got {self.pitch}")
        if self.width < 0 or self.height < 0:
            raise ValidationError("grid width/height must be >= 0")
        # Heatmap keys are canonicalized to 10 um; keep lattice points on
        # that grid so planned and reloaded positions agree.
        for name in ("pitch", "x0", "y0"):
            v = getattr(self, name)
            if abs(v * 20 - round(v * 20)) > 1e-9:
                raise ValidationError(f"{name} must be a multiple of 0.05 mm, got {v}")


@dataclass(frozen=True)
class SweepSpec:
    lo: int
    hi: int
    step: int = 1
    attempts_per_delay: int = 20
    group_threshold: int = 8

    def __post_init__(self):
        if self.lo < 0 or self.hi < self.lo:
            raise ValidationError("sweep range must satisfy 0 <= lo <= hi")
        if self.step <= 0:
            raise ValidationError("sweep step must be > 0")
        if self.attempts_per_delay <= 0:
            raise ValidationError("attempts per delay must be > 0")
        if self.group_threshold < 0:
            raise ValidationError("group threshold must be >= 0")

    def delays(self) -> list[int]:
        return list(range(self.lo, self.hi + 1, self.step))


@dataclass(frozen=True)
class CampaignConfig:
    mode: str  # "scan" | "attack" | "sweep"
    payload: PayloadKind
    pulse: PulseConfig
    supplies: SupplyVoltages
    seed: int = 0
    epoch: Optional[str] = None
    plan: Optional[TriggerPlan] = None
    grid: Optional[GridWindow] = None
    attempts_per_position: int = 100
    position: Optional[tuple[float, float]] = None
    attempts: int = 0
    sweep: Optional[SweepSpec] = None
    scan_z: Optional[float] = None
    spi_timeout_s: float = 5.0
    feed_mm_s: float = 10.0
    exclude_error_attempts: bool = False

    def __post_init__(self):
        modes = {"scan", "attack", "sweep"}
        if self.mode not in modes:
            raise ValidationError(f"mode must be one of {sorted(modes)}, got {self.mode!r}")
        if self.mode == "scan":
            if self.grid is None or self.plan is None:
                raise ValidationError("scan mode requires grid and plan")
            if self.position is not None or self.sweep is not None:
                raise ValidationError("scan mode admits neither position nor sweep")
            if self.attempts_per_position <= 0:
                raise ValidationError("attempts per position must be > 0")
        elif self.mode == "attack":
            if self.position is None or self.plan is None:
                raise ValidationError("attack mode requires position and plan")
            if self.grid is not None or self.sweep is not None:
                raise ValidationError("attack mode admits neither grid nor sweep")
            if self.attempts <= 0:
                raise ValidationError("attack mode requires attempts > 0")
            if not isinstance(self.payload, ArkVerify):
                raise ValidationError("attack mode requires the ark_verify payload")
        else:
            if self.position is None or self.sweep is None:
                raise ValidationError("sweep mode requires position and sweep")
            if self.grid is not None:
                raise ValidationError("sweep mode admits no grid")
            if not isinstance(self.payload, ArkVerify):
                raise ValidationError("sweep mode requires the ark_verify payload")

    def to_dict(self) -> dict:
        d: dict = {
            "version": 1,
            "mode": self.mode,
            "payload": payload_to_dict(self.payload),
            "pulse": {
                "voltage": self.pulse.voltage,
                "width_ns": self.pulse.width_ns,
                "probe": {
                    "diameter_mm": self.pulse.probe.diameter_mm,
                    "winding": self.pulse.probe.winding,
                },
            },
            "supplies": {"v_soc": self.supplies.v_soc, "v_core": self.supplies.v_core},
            "seed": self.seed,
            "epoch": self.epoch,
            "attempts_per_position": self.attempts_per_position,
            "attempts": self.attempts,
            "scan_z": self.scan_z,
            "spi_timeout_s": self.spi_timeout_s,
            "feed_mm_s": self.feed_mm_s,
            "exclude_error_attempts": self.exclude_error_attempts,
        }
        d["plan"] = None if self.plan is None else {"delay": self.plan.delay, "window": self.plan.window}
        d["grid"] = None if self.grid is None else {
            "x0": self.grid.x0,
            "y0": self.grid.y0,
            "width": self.grid.width,
            "height": self.grid.height,
            "pitch": self.grid.pitch,
        }
        d["position"] = None if self.position is None else list(self.position)
        d["sweep"] = None if self.sweep is None else {
            "lo": self.sweep.lo,
            "hi": self.sweep.hi,
            "step": self.sweep.step,
            "attempts_per_delay": self.sweep.attempts_per_delay,
            "group_threshold": self.sweep.group_threshold,
        }
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "CampaignConfig":
        if d.get("version") != 1:
            raise ValidationError(f"unsupported campaign config version {d.get('version')!r}")
        return cls(
            mode=d["mode"],
            payload=payload_from_dict(d["payload"]),
            pulse=PulseConfig(
                voltage=d["pulse"]["voltage"],
                width_ns=d["pulse"]["width_ns"],
                probe=ProbeTip(
                    diameter_mm=d["pulse"]["probe"]["diameter_mm"],
                    winding=d["pulse"]["probe"]["winding"],
                ),
            ),
            supplies=SupplyVoltages(**d["supplies"]),
            seed=d.get("seed", 0),
            epoch=d.get("epoch"),
            plan=None if d.get("plan") is None else TriggerPlan(**d["plan"]),
            grid=None if d.get("grid") is None else GridWindow(**d["grid"]),
            attempts_per_position=d.get("attempts_per_position", 100),
            position=None if d.get("position") is None else tuple(d["position"]),
            attempts=d.get("attempts", 0),
            sweep=None if d.get("sweep") is None else SweepSpec(**d["sweep"]),
            scan_z=d.get("scan_z"),
            spi_timeout_s=d.get("spi_timeout_s", 5.0),
            feed_mm_s=d.get("feed_mm_s", 10.0),
            exclude_error_attempts=d.get("exclude_error_attempts", False),
        )


@dataclass
class DelayGroup:
    """Adjacent successful delays merged into one working parameter."""

    median: int
    lo: int
    hi: int
    delays: list[int]


def group_delays(delays: list[int], threshold: int) -> list[DelayGroup]:
    """Merge sorted successful delays whose gaps are <= threshold."""
    groups: list[DelayGroup] = []
    for delay in sorted(delays):
        if groups and delay - groups[-1].hi <= threshold:
            g = groups[-1]
            g.delays.append(delay)
            g.hi = delay
            g.median = statistics.median_low(g.delays)
        else:
            groups.append(DelayGroup(median=delay, lo=delay, hi=delay, delays=[delay]))
    return groups


@dataclass
class CampaignResult:
    mode: str
    records: int
    cancelled: bool
    scan: Optional[ScanResult] = None
    stats: Optional[SuccessStats] = None
    groups: Optional[list[DelayGroup]] = None


class CampaignRunner:
    """Executes one campaign on a rig it exclusively owns.

    Determinism contract: with the same config (seed and epoch included)
    the attempt log is byte-identical, whether or not the run was
    interrupted and resumed. Per-attempt randomness derives from
    (seed, sequence id) alone, and cycle timing is replayed from the log
    on resume.
    """

    _SEED_STRIDE = 1_000_003  # seeds are spaced wider than any campaign plan

    @staticmethod
    def attempt_rng(seed: int, seq: int) -> random.Random:
        return random.Random(seed * CampaignRunner._SEED_STRIDE + seq)

    def __init__(
        self,
        rig: Rig,
        config: CampaignConfig,
        directory: str | Path,
        on_attempt: Optional[Callable[[AttemptRecord], None]] = None,
        cancel: Optional[CancelToken] = None,
    ):
        self.rig = rig
        self.config = config
        self.directory = Path(directory)
        self.on_attempt = on_attempt
        self.cancel = cancel if cancel is not None else CancelToken()
        self.log = CampaignLog(directory)
        self._epoch_dt: Optional[datetime] = None

    # -- plan -----------------------------------------------------------

    def _scan_positions(self) -> list[tuple[float, float]]:
        g = self.config.grid
        spec = GridSpec(
            origin=StagePosition(g.x0, g.y0, 0.0), width=g.width, height=g.height,
            pitch=g.pitch, z=0.0,
        )
        return [(p.x, p.y) for p in generate_grid(spec)]

    def _attempt_plan(self) -> list[tuple[tuple[float, float], TriggerPlan]]:
        """(die position, trigger plan) for every attempt, in order."""
        cfg = self.config
        if cfg.mode == "scan":
            return [
                (pos, cfg.plan)
                for pos in self._scan_positions()
                for _ in range(cfg.attempts_per_position)
            ]
        if cfg.mode == "attack":
            return [(cfg.position, cfg.plan)] * cfg.attempts
        return [
            (cfg.position, TriggerPlan(delay, 0))
            for delay in cfg.sweep.delays()
            for _ in range(cfg.sweep.attempts_per_delay)
        ]

    # -- lifecycle --------------------------------------------------------

    def _snapshot(self) -> dict:
        cal = self.rig.require_calibration()
        snap = self.config.to_dict()
        if snap["epoch"] is None:
            snap["epoch"] = datetime.now(timezone.utc).isoformat()
        snap["anchor"] = {
            "corner": {
                "x": self.rig.anchor.corner.x,
                "y": self.rig.anchor.corner.y,
                "z": self.rig.anchor.corner.z,
            },
            "width": self.rig.anchor.width,
            "height": self.rig.anchor.height,
        }
        snap["offset"] = {"dx": cal.dx, "dy": cal.dy}
        return snap

    def _timestamp(self, t: float) -> str:
        return (self._epoch_dt + timedelta(seconds=t)).isoformat()

    def run(self) -> CampaignResult:
        cfg = self.config
        rig = self.rig
        cal = rig.require_calibration()
        if cfg.pulse.probe.ident != rig.probe.ident:
            raise ValidationError(
                f"campaign wants tip {cfg.pulse.probe.ident!r}"
                f" but {rig.probe.ident!r} is mounted"
            )

        fresh = self._snapshot()
        if self.log.config_path.exists():
            snapshot = self.log.read_config()
            a, b = dict(fresh), dict(snapshot)
            if cfg.epoch is None:
                # The stored snapshot carries the stamped start time.
                a.pop("epoch", None)
                b.pop("epoch", None)
            if a != b:
                raise ValidationError(
                    "campaign directory already holds a different config snapshot"
                )
        else:
            snapshot = fresh
            self.log.write_config(snapshot)
        self._epoch_dt = datetime.fromisoformat(snapshot["epoch"])

        existing = self.log.prepare_resume()
        plan = self._attempt_plan()
        if len(existing) > len(plan):
            raise ValidationError("attempt log longer than the campaign plan")

        # Initial device conditions.
        rig.pulse.disarm()
        rig.trigger.power_off()
        rig.trigger.set_supply(Svi2Command("Soc", cfg.supplies.v_soc))
        rig.trigger.set_supply(Svi2Command("Core", cfg.supplies.v_core))
        rig.pulse.set_config(cfg.pulse)
        rig.dut.payload = cfg.payload
        rig.stage.home()
        if existing:
            last = existing[-1]
            rig.stage.move_to(last.position, cfg.feed_mm_s)
        if isinstance(rig.clock, SimClock):
            # Timeline continuity: setup travel is off the recorded clock.
            rig.clock.reset(existing[-1].events[-1][1] if existing else 0.0)

        scan_z = cfg.scan_z if cfg.scan_z is not None else rig.anchor.corner.z
        records_done = len(existing)
        cancelled = False
        for seq in range(records_done, len(plan)):
            if self.cancel.cancelled:
                cancelled = True
                break
            die_pos, trig_plan = plan[seq]
            record = self._run_cycle(seq, die_pos, trig_plan, cal, scan_z)
            self.log.append(record)
            existing.append(record)
            if self.on_attempt is not None:
                self.on_attempt(record)
        self.log.close()

        return self._result(existing, snapshot, cancelled)

    # -- one cycle ----------------------------------------------------------

    def _run_cycle(
        self,
        seq: int,
        die_pos: tuple[float, float],
        trig_plan: TriggerPlan,
        cal: OffsetCalibration,
        scan_z: float,
    ) -> AttemptRecord:
        cfg = self.config
        rig = self.rig
        clock = rig.clock
        rng = self.attempt_rng(cfg.seed, seq)
        events: list[tuple[str, float]] = []

        def ev(name: str) -> None:
            events.append((name, clock.now()))

        t_start = clock.now()
        rig.trigger.last_effective_delay = None

        rig.pulse.disarm()
        ev(EV_DISARM)
        target = die_to_stage(die_pos, rig.anchor, cal, z=scan_z, allow_outside=True)
        stage_pos = rig.stage.move_to(target, cfg.feed_mm_s)
        ev(EV_MOVE)
        rig.pulse.set_config(cfg.pulse)
        rig.pulse.arm()
        ev(EV_ARM)
        rig.pulse.charge()
        rig.pulse.wait_ready()
        ev(EV_CHARGE)

        probe_die = stage_to_die(stage_pos, rig.anchor, cal)
        rig.trigger.configure_trigger(trig_plan)
        rig.trigger.rng = rng

        def on_spi(_t: float) -> None:
            ev(EV_SPI)

        def on_trigger(effective_cycles: int) -> None:
            rig.pulse.hw_trigger()
            ev(EV_TRIGGER)
            rig.dut.apply_pulse(probe_die, cfg.pulse, effective_cycles, rng)

        rig.trigger.on_spi = on_spi
        rig.trigger.on_trigger = on_trigger

        outcome: AttemptOutcome
        response = ""
        try:
            rig.trigger.power_on()
            ev(EV_POWER_ON)
            try:
                rig.trigger.await_spi_event(cfg.spi_timeout_s)
                output = rig.dut.run_payload_to_completion()
                ev(EV_COLLECT)
                outcome = classify_response(output, cfg.payload, powered=True)
                ev(EV_CLASSIFY)
                response = output if output is not None else ""
            except DeviceTimeout:
                ev(EV_SPI_TIMEOUT)
                if rig.trigger.power.target_on and rig.dut.halt_outcome is AttemptOutcome.BOOT_FAILURE:
                    outcome = AttemptOutcome.BOOT_FAILURE
                else:
                    outcome = AttemptOutcome.TIMEOUT
        except DeviceError:
            ev(EV_DEVICE_ERROR)
            outcome = AttemptOutcome.CRASH
        finally:
            rig.trigger.on_spi = None
            rig.trigger.on_trigger = None
            rig.trigger.power_off()
            ev(EV_POWER_OFF)

        return AttemptRecord(
            seq=seq,
            timestamp=self._timestamp(t_start),
            position=stage_pos,
            pulse=cfg.pulse,
            supplies=cfg.supplies,
            plan=trig_plan,
            effective_delay=rig.trigger.last_effective_delay,
            payload=cfg.payload,
            outcome=outcome,
            response=response,
            events=tuple(events),
        )

    # -- result assembly -----------------------------------------------------

    def _result(self, records: list[AttemptRecord], snapshot: dict, cancelled: bool) -> CampaignResult:
        cfg = self.config
        result = CampaignResult(
            mode=cfg.mode, records=len(records), cancelled=cancelled
        )
        anchor_xy = (snapshot["anchor"]["corner"]["x"], snapshot["anchor"]["corner"]["y"])
        offset_xy = (snapshot["offset"]["dx"], snapshot["offset"]["dy"])
        if cfg.mode == "scan":
            result.scan = scan_result_from_records(
                records, anchor_xy, offset_xy, cfg.attempts_per_position
            )
            if not cancelled:
                write_export(self.directory, "heatmap.csv", export_heatmap(result.scan))
        elif cfg.mode == "attack":
            result.stats = self._attack_stats(records)
            if not cancelled:
                write_export(
                    self.directory,
                    "summary.txt",
                    export_summary([(cfg.plan, result.stats)]),
                )
        else:
            result.groups = self._sweep_groups(records)
        return result

    def _attack_stats(self, records: list[AttemptRecord]) -> SuccessStats:
        error_outcomes = (
            AttemptOutcome.CRASH,
            AttemptOutcome.BOOT_FAILURE,
            AttemptOutcome.TIMEOUT,
        )
        successes = sum(1 for r in records if r.outcome is AttemptOutcome.BYPASS_SUCCESS)
        attempts = len(records)
        if self.config.exclude_error_attempts:
            attempts -= sum(1 for r in records if r.outcome in error_outcomes)
        return SuccessStats(successes, attempts)

    def _sweep_groups(self, records: list[AttemptRecord]) -> list[DelayGroup]:
        hit_delays = sorted(
            {r.plan.delay for r in records if r.outcome is AttemptOutcome.BYPASS_SUCCESS}
        )
        return group_delays(hit_delays, self.config.sweep.group_threshold)


def total_attempts(cfg: CampaignConfig) -> int:
    """Number of attempts the campaign plan calls for."""
    if cfg.mode == "scan":
        g = cfg.grid
        spec = GridSpec(
            origin=StagePosition(g.x0, g.y0, 0.0), width=g.width, height=g.height,
            pitch=g.pitch, z=0.0,
        )
        return spec.nx * spec.ny * cfg.attempts_per_position
    if cfg.mode == "attack":
        return cfg.attempts
    return len(cfg.sweep.delays()) * cfg.sweep.attempts_per_delay


# -- convenience entry points ------------------------------------------------


def run_campaign(
    rig: Rig,
    config: CampaignConfig,
    directory: str | Path,
    on_attempt: Optional[Callable[[AttemptRecord], None]] = None,
    cancel: Optional[CancelToken] = None,
) -> CampaignResult:
    return CampaignRunner(rig, config, directory, on_attempt=on_attempt, cancel=cancel).run()


def refine_position(
    rig: Rig,
    base: CampaignConfig,
    coarse_best: tuple[float, float],
    pitch_fine: float,
    directory: str | Path,
) -> tuple[float, float]:
    """Scan a one-coarse-pitch window around the coarse argmax at a finer
    pitch; returns the fine argmax (ties lowest (y, x)), or the coarse
    input when the fine map is uniformly zero."""
    if base.mode != "scan" or base.grid is None:
        raise ValidationError("refinement needs a scan-mode base config")
    if pitch_fine >= base.grid.pitch:
        raise ValidationError(
            f"fine pitch {pitch_fine} must be smaller than coarse pitch {base.grid.pitch}"
        )
    coarse_pitch = base.grid.pitch
    cx, cy = coarse_best
    x0 = max(0.0, cx - coarse_pitch)
    y0 = max(0.0, cy - coarse_pitch)
    x1 = min(rig.anchor.width, cx + coarse_pitch)
    y1 = min(rig.anchor.height, cy + coarse_pitch)
    window = GridWindow(
        x0=x0, y0=y0, width=x1 - x0, height=y1 - y0, pitch=pitch_fine
    )
    fine_cfg = CampaignConfig(
        mode="scan",
        payload=base.payload,
        pulse=base.pulse,
        supplies=base.supplies,
        seed=base.seed + 1,
        epoch=base.epoch,
        plan=base.plan,
        grid=window,
        attempts_per_position=base.attempts_per_position,
        scan_z=base.scan_z,
        spi_timeout_s=base.spi_timeout_s,
        feed_mm_s=base.feed_mm_s,
    )
    result = run_campaign(rig, fine_cfg, directory)
    best = result.scan.argmax()
    return best if best is not None else coarse_best
