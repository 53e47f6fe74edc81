"""Shared domain types: positions, grids, plans, outcomes, attempt records.

Unit conventions used across the package: lengths in millimeters, voltages
in volts, pulse widths in nanoseconds, trigger delays in integer wait
cycles, durations in seconds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Union

from .errors import ValidationError
from .pulse import ProbeTip, PulseConfig

# Stage step quantum in mm (2.5 um positioning accuracy).
STEP_QUANTUM_MM = 0.0025


def _require_finite(name: str, value: float) -> float:
    if not math.isfinite(value):
        raise ValidationError(f"{name} must be finite, got {value!r}")
    return float(value)


@dataclass(frozen=True)
class StagePosition:
    """Absolute stage coordinates in mm."""

    x: float
    y: float
    z: float

    def __post_init__(self):
        for name in ("x", "y", "z"):
            _require_finite(name, getattr(self, name))

    def offset(self, dx: float = 0.0, dy: float = 0.0, dz: float = 0.0) -> "StagePosition":
        return StagePosition(self.x + dx, self.y + dy, self.z + dz)


@dataclass(frozen=True)
class GridSpec:
    """Rectangular scan lattice anchored at a die corner.

    Positions span [0, width] x [0, height] relative to the origin, borders
    included on both sides; z is the scan height for every point.
    """

    origin: StagePosition
    width: float
    height: float
    pitch: float
    z: float

    def __post_init__(self):
        _require_finite("width", self.width)
        _require_finite("height", self.height)
        _require_finite("pitch", self.pitch)
        _require_finite("z", self.z)
        if self.width < 0 or self.height < 0:
            raise ValidationError("grid width and height must be >= 0")
        if self.pitch <= 0:
            raise ValidationError(f"grid pitch must be > 0, got {self.pitch}")

    @property
    def nx(self) -> int:
        return int(math.floor(self.width / self.pitch + 1e-9)) + 1

    @property
    def ny(self) -> int:
        return int(math.floor(self.height / self.pitch + 1e-9)) + 1


def generate_grid(spec: GridSpec) -> list[StagePosition]:
    """All lattice points of the grid in boustrophedon (serpentine) order.

    Rows advance along +y; x runs left-to-right on even rows and
    right-to-left on odd rows, halving travel versus a raster return.
    """
    positions: list[StagePosition] = []
    for j in range(spec.ny):
        xs = range(spec.nx)
        if j % 2 == 1:
            xs = reversed(xs)
        for i in xs:
            positions.append(
                StagePosition(
                    spec.origin.x + i * spec.pitch,
                    spec.origin.y + j * spec.pitch,
                    spec.z,
                )
            )
    return positions


@dataclass(frozen=True)
class SupplyVoltages:
    """Setpoints for the two externally controllable rails."""

    v_soc: float
    v_core: float

    def __post_init__(self):
        for name in ("v_soc", "v_core"):
            v = _require_finite(name, getattr(self, name))
            if not 0 < v <= 1.5:
                raise ValidationError(f"{name} must be in (0, 1.5] V, got {v}")


@dataclass(frozen=True)
class TriggerPlan:
    """Pulse delay after the SPI boot event, in integer wait cycles.

    Effective per-attempt delays are sampled uniformly from
    [delay - window, delay + window].
    """

    delay: int
    window: int = 0

    def __post_init__(self):
        if not isinstance(self.delay, int) or not isinstance(self.window, int):
            raise ValidationError("delay and window must be integers (wait cycles)")
        if self.delay < 0:
            raise ValidationError(f"delay must be >= 0, got {self.delay}")
        if self.window < 0:
            raise ValidationError(f"window must be >= 0, got {self.window}")
        if self.window > self.delay:
            raise ValidationError(
                f"window {self.window} would allow negative delays (delay {self.delay})"
            )

    @property
    def lo(self) -> int:
        return self.delay - self.window

    @property
    def hi(self) -> int:
        return self.delay + self.window


@dataclass(frozen=True)
class SuccessStats:
    successes: int
    attempts: int

    def __post_init__(self):
        if self.successes < 0 or self.attempts < 0:
            raise ValidationError("counts must be >= 0")
        if self.successes > self.attempts:
            raise ValidationError(
                f"successes {self.successes} exceeds attempts {self.attempts}"
            )

    def merged(self, other: "SuccessStats") -> "SuccessStats":
        return SuccessStats(self.successes + other.successes, self.attempts + other.attempts)


class AttemptOutcome(str, Enum):
    NO_EFFECT = "NoEffect"
    PAYLOAD_FAULT = "PayloadFault"
    CRASH = "Crash"
    BYPASS_SUCCESS = "BypassSuccess"
    BOOT_FAILURE = "BootFailure"
    TIMEOUT = "Timeout"


# Outcomes that count as an injected fault in scan statistics.
FAULT_OUTCOMES = (AttemptOutcome.PAYLOAD_FAULT, AttemptOutcome.BYPASS_SUCCESS)


@dataclass(frozen=True)
class CounterLoop:
    """Register counter loop; a fault shows up as a wrong final count."""

    iterations: int = 1000

    def __post_init__(self):
        if self.iterations <= 0:
            raise ValidationError("iterations must be > 0")


@dataclass(frozen=True)
class SramPattern:
    """Stack fill with a repeated word; faults show up as differing reads."""

    word: int = 0xDEADBEEF
    count: int = 64

    def __post_init__(self):
        if self.count <= 0:
            raise ValidationError("count must be > 0")
        if not 0 <= self.word <= 0xFFFFFFFF:
            raise ValidationError("word must be a 32-bit value")


@dataclass(frozen=True)
class ArkVerify:
    """Root-key hash check in the first boot stage; the bypass target."""


PayloadKind = Union[CounterLoop, SramPattern, ArkVerify]

_PAYLOAD_NAMES = {CounterLoop: "counter_loop", SramPattern: "sram_pattern", ArkVerify: "ark_verify"}


def payload_to_dict(payload: PayloadKind) -> dict:
    d = {"kind": _PAYLOAD_NAMES[type(payload)]}
    if isinstance(payload, CounterLoop):
        d["iterations"] = payload.iterations
    elif isinstance(payload, SramPattern):
        d["word"] = payload.word
        d["count"] = payload.count
    return d


def payload_from_dict(d: dict) -> PayloadKind:
    kind = d.get("kind")
    if kind == "counter_loop":
        return CounterLoop(iterations=d.get("iterations", 1000))
    if kind == "sram_pattern":
        return SramPattern(word=d.get("word", 0xDEADBEEF), count=d.get("count", 64))
    if kind == "ark_verify":
        return ArkVerify()
    raise ValidationError(f"unknown payload kind {kind!r}")


# Die-coordinate keys are canonicalized to 10 um so that planned lattice
# points and positions recovered from quantized stage reports agree.
def die_key(x: float, y: float) -> tuple[float, float]:
    return (round(x, 2), round(y, 2))


class ScanResult:
    """Per-position outcome histograms for a grid scan."""

    def __init__(self, attempts_per_position: int):
        self.attempts_per_position = attempts_per_position
        self.order: list[tuple[float, float]] = []
        self.histograms: dict[tuple[float, float], dict[AttemptOutcome, int]] = {}

    def add(self, x: float, y: float, outcome: AttemptOutcome) -> None:
        key = die_key(x, y)
        if key not in self.histograms:
            self.order.append(key)
            self.histograms[key] = {}
        hist = self.histograms[key]
        hist[outcome] = hist.get(outcome, 0) + 1

    def attempts_at(self, key: tuple[float, float]) -> int:
        return sum(self.histograms.get(key, {}).values())

    def faults_at(self, key: tuple[float, float]) -> int:
        hist = self.histograms.get(key, {})
        return sum(hist.get(o, 0) for o in FAULT_OUTCOMES)

    def stats_at(self, key: tuple[float, float]) -> SuccessStats:
        return SuccessStats(self.faults_at(key), self.attempts_at(key))

    def total_stats(self) -> SuccessStats:
        return SuccessStats(
            sum(self.faults_at(k) for k in self.order),
            sum(self.attempts_at(k) for k in self.order),
        )

    def argmax(self) -> tuple[float, float] | None:
        """Position with the most faults; ties broken by lowest (y, x).
        None when the whole map is fault-free."""
        best = None
        best_count = 0
        for key in sorted(self.order, key=lambda k: (k[1], k[0])):
            count = self.faults_at(key)
            if count > best_count:
                best, best_count = key, count
        return best


@dataclass(frozen=True)
class AttemptRecord:
    """Complete parameterization and classified result of one attack cycle.

    Immutable once written; seq ids are strictly increasing within a
    campaign. `events` is the cycle's internal event log as (name, virtual
    seconds) pairs in execution order.
    """

    seq: int
    timestamp: str
    position: StagePosition
    pulse: PulseConfig
    supplies: SupplyVoltages
    plan: TriggerPlan
    effective_delay: int | None
    payload: PayloadKind
    outcome: AttemptOutcome
    response: str
    events: tuple[tuple[str, float], ...] = field(default_factory=tuple)

    def to_dict(self) -> dict:
        return {
            "v": 1,
            "seq": self.seq,
            "ts": self.timestamp,
            "pos": {"x": self.position.x, "y": self.position.y, "z": self.position.z},
            "pulse": {
                "voltage": self.pulse.voltage,
                "width_ns": self.pulse.width_ns,
                "probe": {
                    "diameter_mm": self.pulse.probe.diameter_mm,
                    "winding": self.pulse.probe.winding,
                },
            },
            "supply": {"v_soc": self.supplies.v_soc, "v_core": self.supplies.v_core},
            "plan": {"delay": self.plan.delay, "window": self.plan.window},
            "eff_delay": self.effective_delay,
            "payload": payload_to_dict(self.payload),
            "outcome": self.outcome.value,
            "response": self.response,
            "events": [[name, t] for name, t in self.events],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AttemptRecord":
        if d.get("v") != 1:
            raise ValidationError(f"unsupported record schema version {d.get('v')!r}")
        return cls(
            seq=d["seq"],
            timestamp=d["ts"],
            position=StagePosition(**d["pos"]),
            pulse=PulseConfig(
                voltage=d["pulse"]["voltage"],
                width_ns=d["pulse"]["width_ns"],
                probe=ProbeTip(
                    diameter_mm=d["pulse"]["probe"]["diameter_mm"],
                    winding=d["pulse"]["probe"]["winding"],
                ),
            ),
            supplies=SupplyVoltages(**d["supply"]),
            plan=TriggerPlan(**d["plan"]),
            effective_delay=d["eff_delay"],
            payload=payload_from_dict(d["payload"]),
            outcome=AttemptOutcome(d["outcome"]),
            response=d["response"],
            events=tuple((name, t) for name, t in d["events"]),
        )
