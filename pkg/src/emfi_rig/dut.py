"""Simulated device under test: security co-processor boot flow, three
payload behaviors, and a parametric fault-susceptibility model.

Susceptibility is a sum of Gaussian blobs over die coordinates with a hard
pulse-voltage knee and a supply-voltage gate; bypass effects additionally
require the pulse to land inside a timing window. The model is loaded from
a versioned JSON document so campaigns are replayable.
"""

from __future__ import annotations

import json
import math
import random
import re
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Optional

from .clock import Clock
from .errors import StateError, ValidationError
from .model import (
    ArkVerify,
    AttemptOutcome,
    CounterLoop,
    PayloadKind,
    SramPattern,
)
from .pulse import PulseConfig


class FaultEffect(str, Enum):
    LOOP_FAULT = "loop_fault"
    SRAM_FLIP = "sram_flip"
    CRASH = "crash"
    ARK_BYPASS = "ark_bypass"


# Which payload each effect can disturb (None = any payload).
_EFFECT_PAYLOAD = {
    FaultEffect.LOOP_FAULT: CounterLoop,
    FaultEffect.SRAM_FLIP: SramPattern,
    FaultEffect.ARK_BYPASS: ArkVerify,
    FaultEffect.CRASH: None,
}


@dataclass(frozen=True)
class FaultBlob:
    center: tuple[float, float]
    sigma: float
    p_max: float
    effect: FaultEffect

    def __post_init__(self):
        if self.sigma <= 0:
            raise ValidationError(f"blob sigma must be > 0, got {self.sigma}")
        if not 0 <= self.p_max <= 1:
            raise ValidationError(f"blob p_max must be in [0, 1], got {self.p_max}")

    def probability_at(self, x: float, y: float) -> float:
        d2 = (x - self.center[0]) ** 2 + (y - self.center[1]) ** 2
        return self.p_max * math.exp(-d2 / (2 * self.sigma**2))


@dataclass(frozen=True)
class BypassWindow:
    center: int
    half_width: int

    def __post_init__(self):
        if self.center < 0 or self.half_width < 0:
            raise ValidationError("bypass window fields must be >= 0")

    def contains(self, delay_cycles: int) -> bool:
        return abs(delay_cycles - self.center) <= self.half_width


@dataclass(frozen=True)
class VsocGate:
    """Fault probabilities are multiplied by `multiplier` when the rail sits
    at or above `threshold` (nominal supply suppresses faults)."""

    threshold: float = 0.60
    multiplier: float = 0.0


@dataclass(frozen=True)
class FaultModel:
    blobs: tuple[FaultBlob, ...]
    voltage_knee: float = 350.0
    vsoc_gate: VsocGate = field(default_factory=VsocGate)
    bypass_windows: tuple[BypassWindow, ...] = ()
    seed: int = 0

    def to_dict(self) -> dict:
        return {
            "version": 1,
            "seed": self.seed,
            "voltage_knee": self.voltage_knee,
            "vsoc_gate": {
                "threshold": self.vsoc_gate.threshold,
                "multiplier": self.vsoc_gate.multiplier,
            },
            "blobs": [
                {
                    "center": list(b.center),
                    "sigma": b.sigma,
                    "p_max": b.p_max,
                    "effect": b.effect.value,
                }
                for b in self.blobs
            ],
            "bypass_windows": [
                {"center": w.center, "half_width": w.half_width} for w in self.bypass_windows
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FaultModel":
        if d.get("version") != 1:
            raise ValidationError(f"unsupported fault model version {d.get('version')!r}")
        gate = d.get("vsoc_gate", {})
        return cls(
            blobs=tuple(
                FaultBlob(
                    center=(float(b["center"][0]), float(b["center"][1])),
                    sigma=float(b["sigma"]),
                    p_max=float(b["p_max"]),
                    effect=FaultEffect(b["effect"]),
                )
                for b in d.get("blobs", [])
            ),
            voltage_knee=float(d.get("voltage_knee", 350.0)),
            vsoc_gate=VsocGate(
                threshold=float(gate.get("threshold", 0.60)),
                multiplier=float(gate.get("multiplier", 0.0)),
            ),
            bypass_windows=tuple(
                BypassWindow(center=int(w["center"]), half_width=int(w["half_width"]))
                for w in d.get("bypass_windows", [])
            ),
            seed=int(d.get("seed", 0)),
        )


def load_fault_model(path: str | Path) -> FaultModel:
    return FaultModel.from_dict(json.loads(Path(path).read_text()))


def save_fault_model(model: FaultModel, path: str | Path) -> None:
    Path(path).write_text(json.dumps(model.to_dict(), indent=2) + "\n")


def default_fault_model(seed: int = 0) -> FaultModel:
    """Built-in susceptibility model: distinct hotspot maps per payload,
    a strong bypass spot, and four bypass timing windows."""
    return FaultModel(
        blobs=(
            FaultBlob(center=(13.4, 4.3), sigma=0.7, p_max=0.45, effect=FaultEffect.LOOP_FAULT),
            FaultBlob(center=(6.2, 5.1), sigma=0.8, p_max=0.30, effect=FaultEffect.SRAM_FLIP),
            FaultBlob(center=(17.5, 2.4), sigma=0.5, p_max=0.08, effect=FaultEffect.CRASH),
            FaultBlob(center=(13.4, 4.3), sigma=0.6, p_max=0.2206, effect=FaultEffect.ARK_BYPASS),
        ),
        voltage_knee=350.0,
        vsoc_gate=VsocGate(threshold=0.60, multiplier=0.0),
        bypass_windows=(
            BypassWindow(128, 4),
            BypassWindow(2364, 4),
            BypassWindow(2384, 4),
            BypassWindow(2391, 2),
        ),
        seed=seed,
    )


class DutState(str, Enum):
    OFF = "Off"
    BOOTING = "Booting"
    RUNNING_PAYLOAD = "RunningPayload"
    HALTED = "Halted"


@dataclass(frozen=True)
class DutConfig:
    boot_v_min: float = 0.56
    boot_latency_s: float = 1.2
    output_latency_s: float = 0.8
    verification_us: float = 53.0
    ark_key_valid: bool = False


class SimulatedDut:
    """Boot state machine plus payload execution under injected faults."""

    def __init__(
        self,
        clock: Clock,
        model: FaultModel,
        config: DutConfig = DutConfig(),
        payload: PayloadKind = CounterLoop(),
    ):
        self.clock = clock
        self.model = model
        self.config = config
        self.payload = payload
        self.powered = False
        self.boot_count = 0
        self.v_soc_at_boot: Optional[float] = None
        self.halt_outcome: Optional[AttemptOutcome] = None
        self._state = DutState.OFF
        self._spi_event_t: Optional[float] = None
        self._pending: Optional[tuple] = None
        self._rng = random.Random(f"fault-model:{model.seed}")

    # -- state machine -------------------------------------------------

    @property
    def state(self) -> DutState:
        if (
            self._state is DutState.BOOTING
            and self._spi_event_t is not None
            and self.clock.now() >= self._spi_event_t
        ):
            self._state = DutState.RUNNING_PAYLOAD
        return self._state

    def set_power(self, on: bool, v_soc: float = 0.9) -> None:
        if on and not self.powered:
            self.powered = True
            self.boot(v_soc)
        elif not on:
            self.power_cut()

    def boot(self, v_soc: float) -> None:
        """Power-on boot: either halts (brown-out) or schedules the SPI
        flash-read event after the configured boot latency."""
        if self._state is not DutState.OFF:
            raise StateError(f"cannot boot from state {self._state.value}")
        if not self.powered:
            raise StateError("cannot boot without power")
        self.boot_count += 1
        self.v_soc_at_boot = v_soc
        self._pending = None
        if v_soc < self.config.boot_v_min:
            self._state = DutState.HALTED
            self.halt_outcome = AttemptOutcome.BOOT_FAILURE
            self._spi_event_t = None
            return
        self._state = DutState.BOOTING
        self.halt_outcome = None
        self._spi_event_t = self.clock.now() + self.config.boot_latency_s

    def power_cut(self) -> None:
        self.powered = False
        self._state = DutState.OFF
        self._spi_event_t = None
        self._pending = None

    def spi_event_time(self) -> Optional[float]:
        return self._spi_event_t

    # -- fault injection -----------------------------------------------

    def _vsoc_factor(self) -> float:
        if self.v_soc_at_boot is None:
            return 0.0
        if self.v_soc_at_boot >= self.model.vsoc_gate.threshold:
            return self.model.vsoc_gate.multiplier
        return 1.0

    def apply_pulse(
        self,
        position: tuple[float, float],
        cfg: PulseConfig,
        time_cycles: int,
        rng: Optional[random.Random] = None,
    ) -> Optional[FaultEffect]:
        """Sample at most one fault effect for a pulse at die coordinates.

        A pulse against an unpowered device is a recorded no-op.
        """
        if self.state is not DutState.RUNNING_PAYLOAD:
            return None
        rng = rng if rng is not None else self._rng
        if cfg.voltage < self.model.voltage_knee:
            return None
        vsoc = self._vsoc_factor()
        if vsoc == 0.0:
            return None

        candidates = []
        for idx, blob in enumerate(self.model.blobs):
            wanted = _EFFECT_PAYLOAD[blob.effect]
            if wanted is not None and not isinstance(self.payload, wanted):
                continue
            if blob.effect is FaultEffect.ARK_BYPASS and not any(
                w.contains(time_cycles) for w in self.model.bypass_windows
            ):
                continue
            p = blob.probability_at(*position) * vsoc
            if p > 0:
                candidates.append((p, idx, blob))
        candidates.sort(key=lambda c: (-c[0], c[1]))

        for p, _idx, blob in candidates:
            if rng.random() < p:
                self._plant_effect(blob.effect, rng)
                return blob.effect
        return None

    def _plant_effect(self, effect: FaultEffect, rng: random.Random) -> None:
        if effect is FaultEffect.LOOP_FAULT and isinstance(self.payload, CounterLoop):
            delta = rng.randint(1, min(50, self.payload.iterations))
            self._pending = (effect, delta)
        elif effect is FaultEffect.SRAM_FLIP and isinstance(self.payload, SramPattern):
            index = rng.randrange(self.payload.count)
            flipped = self.payload.word ^ (1 << rng.randrange(32))
            self._pending = (effect, index, flipped)
        else:
            self._pending = (effect,)

    def force_effect(self, effect: FaultEffect) -> None:
        """Test hook: plant an effect without sampling."""
        self._plant_effect(effect, self._rng)

    # -- payload execution ----------------------------------------------

    def run_payload_to_completion(self) -> Optional[str]:
        """Finish the payload and return its UART output (None if crashed)."""
        if self.state is not DutState.RUNNING_PAYLOAD:
            raise StateError(f"no payload running in state {self._state.value}")
        self.clock.sleep(self.config.output_latency_s)
        pending = self._pending
        self._pending = None
        self._state = DutState.HALTED

        if pending is not None and pending[0] is FaultEffect.CRASH:
            self.halt_outcome = AttemptOutcome.CRASH
            return None

        if isinstance(self.payload, CounterLoop):
            expected = self.payload.iterations
            counter = expected
            if pending is not None and pending[0] is FaultEffect.LOOP_FAULT:
                counter = expected - pending[1]
            self.halt_outcome = None
            return f"COUNTER {counter} EXPECTED {expected}"

        if isinstance(self.payload, SramPattern):
            if pending is not None and pending[0] is FaultEffect.SRAM_FLIP:
                _, index, flipped = pending
                self.halt_outcome = None
                return f"SRAM FAULTS 1 {index:04d}:{flipped:08X}"
            self.halt_outcome = None
            return "SRAM FAULTS 0"

        if isinstance(self.payload, ArkVerify):
            if pending is not None and pending[0] is FaultEffect.ARK_BYPASS:
                self.halt_outcome = None
                return "OFFCHIP BL EXEC"
            if self.config.ark_key_valid:
                self.halt_outcome = None
                return "ARK OK"
            self.halt_outcome = None
            return "ARK FAIL HALT"

        raise ValidationError(f"unknown payload {self.payload!r}")


# -- response classification -------------------------------------------

_COUNTER_RE = re.compile(r"^COUNTER (\d+) EXPECTED (\d+)$")
_SRAM_RE = re.compile(r"^SRAM FAULTS (\d+)")


def classify_response(
    output: Optional[str], payload: PayloadKind, powered: bool = True
) -> AttemptOutcome:
    """Deterministic mapping from raw DUT output to an attempt outcome.

    Missing output means Crash when the target had power and Timeout
    otherwise; unrecognized output is conservatively a Crash.
    """
    if output is None or output == "":
        return AttemptOutcome.CRASH if powered else AttemptOutcome.TIMEOUT
    if isinstance(payload, CounterLoop):
        m = _COUNTER_RE.match(output)
        if m:
            counter, expected = int(m.group(1)), int(m.group(2))
            return (
                AttemptOutcome.NO_EFFECT if counter == expected else AttemptOutcome.PAYLOAD_FAULT
            )
        return AttemptOutcome.CRASH
    if isinstance(payload, SramPattern):
        m = _SRAM_RE.match(output)
        if m:
            return (
                AttemptOutcome.NO_EFFECT if int(m.group(1)) == 0 else AttemptOutcome.PAYLOAD_FAULT
            )
        return AttemptOutcome.CRASH
    if isinstance(payload, ArkVerify):
        if output == "OFFCHIP BL EXEC":
            return AttemptOutcome.BYPASS_SUCCESS
        if output in ("ARK OK", "ARK FAIL HALT"):
            return AttemptOutcome.NO_EFFECT
        return AttemptOutcome.CRASH
    return AttemptOutcome.CRASH
