"""EM pulse generator control: config limits, arm/charge state machine,
simulated discharge waveform, and the KEY=VALUE serial protocol.

The simulated waveform is an underdamped series-RLC discharge truncated
when the switch opens at the configured width. Per-tip component values
are chosen so the 4 mm tip yields a longer pulse and a higher peak
current than the 1 mm tip; exact peak current is model-derived, not a
measured value.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np

from .clock import Clock
from .errors import ParseError, RangeError, StateError, ValidationError

MAX_VOLTAGE_V = 500.0
# Device datasheet floor is 80 ns but 40 ns settings are in active use;
# the validator accepts down to 15 ns.
MIN_WIDTH_NS = 15.0
MAX_WIDTH_NS = 960.0

DEFAULT_CHARGE_LATENCY_S = 0.05

WINDINGS = ("CW", "CCW")


@dataclass(frozen=True)
class ProbeTip:
    """Injection coil geometry: ferrite diameter and winding sense."""

    diameter_mm: float
    winding: str

    def __post_init__(self):
        if self.diameter_mm <= 0:
            raise ValidationError(f"tip diameter must be > 0, got {self.diameter_mm}")
        if self.winding not in WINDINGS:
            raise ValidationError(f"winding must be one of {WINDINGS}, got {self.winding!r}")

    @property
    def ident(self) -> str:
        d = self.diameter_mm
        return f"{d:g}mm-{self.winding}"


@dataclass(frozen=True)
class PulseConfig:
    voltage: float
    width_ns: float
    probe: ProbeTip

    def __post_init__(self):
        if not math.isfinite(self.voltage) or not 0 < self.voltage <= MAX_VOLTAGE_V:
            raise RangeError(
                f"pulse voltage must be in (0, {MAX_VOLTAGE_V:g}] V, got {self.voltage}"
            )
        if not math.isfinite(self.width_ns) or not MIN_WIDTH_NS <= self.width_ns <= MAX_WIDTH_NS:
            raise RangeError(
                f"pulse width must be in [{MIN_WIDTH_NS:g}, {MAX_WIDTH_NS:g}] ns,"
                f" got {self.width_ns}"
            )


class PulseGenState(str, Enum):
    DISARMED = "Disarmed"
    ARMED = "Armed"
    CHARGING = "Charging"
    READY = "Ready"
    FAULTED = "Faulted"


def _tip_rlc(tip: ProbeTip) -> tuple[float, float, float]:
    """(L, C, R) of the discharge loop for a tip diameter, SI units."""
    d = tip.diameter_mm
    inductance = 50e-9 * (1.0 + d)
    capacitance = 1e-9 * d
    resistance = 4.0 / math.sqrt(d)
    return inductance, capacitance, resistance


@dataclass(eq=False)
class PulseWaveform:
    """Sampled discharge trace plus derived pulse metrics."""

    time_ns: np.ndarray
    voltage_v: np.ndarray
    current_a: np.ndarray
    peak_voltage: float
    peak_current: float
    rise_time_ns: float
    fall_time_ns: float
    width_ns: float


def simulate_waveform(cfg: PulseConfig, dt_ns: float = 0.25) -> PulseWaveform:
    """Synthesize the coil voltage/current trace for one discharge."""
    L, C, R = _tip_rlc(cfg.probe)
    alpha = R / (2 * L)
    omega0 = 1.0 / math.sqrt(L * C)
    if alpha >= omega0:
        raise ValidationError("tip RLC model must be underdamped")
    omega_d = math.sqrt(omega0**2 - alpha**2)
    polarity = 1.0 if cfg.probe.winding == "CW" else -1.0

    tau_rise_ns = 0.5
    tau_off_ns = 5.0
    t_end_ns = cfg.width_ns + 12 * tau_off_ns
    t_ns = np.arange(-20.0, t_end_ns, dt_ns)
    t = np.where(t_ns > 0, t_ns, 0.0) * 1e-9

    rise = 1.0 - np.exp(-np.where(t_ns > 0, t_ns, 0.0) / tau_rise_ns)
    over = np.clip(t_ns - cfg.width_ns, 0.0, None)
    switch_off = np.exp(-over / tau_off_ns)
    envelope = rise * np.exp(-alpha * t) * switch_off

    v = cfg.voltage * envelope * np.cos(omega_d * t)
    i = polarity * (cfg.voltage / (omega_d * L)) * envelope * np.sin(omega_d * t)
    v[t_ns <= 0] = 0.0
    i[t_ns <= 0] = 0.0

    mag = np.abs(v)
    peak_v = float(mag.max())
    peak_i = float(np.abs(i).max())

    def crossings(level: float) -> tuple[float, float]:
        idx = np.nonzero(mag >= level)[0]
        return float(t_ns[idx[0]]), float(t_ns[idx[-1]])

    t10_first, t10_last = crossings(0.1 * peak_v)
    t90_first, t90_last = crossings(0.9 * peak_v)
    t50_first, t50_last = crossings(0.5 * peak_v)

    return PulseWaveform(
        time_ns=t_ns,
        voltage_v=v,
        current_a=i,
        peak_voltage=peak_v,
        peak_current=peak_i,
        rise_time_ns=t90_first - t10_first,
        fall_time_ns=t10_last - t90_last,
        width_ns=t50_last - t50_first,
    )


class PulseGenerator:
    """Simulated ChipShouter-style generator with arm/charge discipline.

    Firing is permitted only in Ready. Campaign pulses arrive through
    hw_trigger() (the hardware-trigger edge); fire() is the bench path
    that also synthesizes the waveform.
    """

    def __init__(
        self,
        clock: Clock,
        charge_latency_s: float = DEFAULT_CHARGE_LATENCY_S,
        interlock=None,
    ):
        self._clock = clock
        self._charge_latency = charge_latency_s
        self._interlock = interlock
        self._state = PulseGenState.DISARMED
        self._ready_at = 0.0
        self._config: Optional[PulseConfig] = None
        self.fault_reason: Optional[str] = None

    @property
    def state(self) -> PulseGenState:
        if self._state is PulseGenState.CHARGING and self._clock.now() >= self._ready_at:
            self._state = PulseGenState.READY
        return self._state

    def _require(self, *allowed: PulseGenState) -> PulseGenState:
        st = self.state
        if st not in allowed:
            raise StateError(
                f"operation not permitted in state {st.value};"
                f" requires {' or '.join(a.value for a in allowed)}"
            )
        return st

    def set_config(self, cfg: PulseConfig) -> None:
        self._require(PulseGenState.DISARMED, PulseGenState.ARMED)
        self._config = cfg

    def get_config(self) -> Optional[PulseConfig]:
        return self._config

    def arm(self) -> None:
        self._require(PulseGenState.DISARMED)
        if self._config is None:
            raise StateError("cannot arm without an active pulse config")
        self._state = PulseGenState.ARMED
        if self._interlock is not None:
            self._interlock.set_pulse_armed(True)

    def disarm(self) -> None:
        self._state = PulseGenState.DISARMED
        self.fault_reason = None
        if self._interlock is not None:
            self._interlock.set_pulse_armed(False)

    def charge(self) -> None:
        self._require(PulseGenState.ARMED)
        self._state = PulseGenState.CHARGING
        self._ready_at = self._clock.now() + self._charge_latency

    def wait_ready(self) -> None:
        """Advance the clock until the capacitor bank reports Ready."""
        if self.state is PulseGenState.CHARGING:
            self._clock.sleep(max(0.0, self._ready_at - self._clock.now()))
        self._require(PulseGenState.READY)

    def fire(self) -> PulseWaveform:
        self._require(PulseGenState.READY)
        waveform = simulate_waveform(self._config)
        self._state = PulseGenState.ARMED
        return waveform

    def hw_trigger(self) -> None:
        """Discharge on the hardware trigger edge; no waveform capture."""
        self._require(PulseGenState.READY)
        self._state = PulseGenState.ARMED

    def inject_fault(self, reason: str) -> None:
        self._state = PulseGenState.FAULTED
        self.fault_reason = reason


# ---------------------------------------------------------------------------
# Serial text protocol: SET VOLT=<int> / SET WIDTH=<int> / ARM / DISARM /
# CHARGE / FIRE / STATUS?  ->  OK | ERR <code> | STATE=<name> ...

_SET_RE = re.compile(r"^SET (VOLT|WIDTH)=(\d+)$")


class PulseProtocolAdapter:
    """Device-side line handler exposing a PulseGenerator over text."""

    def __init__(self, generator: PulseGenerator, probe: ProbeTip):
        self.generator = generator
        self.probe = probe
        self._volt: Optional[int] = None
        self._width: Optional[int] = None
        cfg = generator.get_config()
        if cfg is not None:
            self._volt = int(round(cfg.voltage))
            self._width = int(round(cfg.width_ns))

    def _apply(self) -> str:
        if self._volt is None or self._width is None:
            return "OK"
        try:
            self.generator.set_config(PulseConfig(float(self._volt), float(self._width), self.probe))
        except RangeError:
            return "ERR RANGE"
        except StateError:
            return "ERR STATE"
        return "OK"

    def handle_line(self, line: str) -> str:
        line = line.strip()
        m = _SET_RE.match(line)
        if m:
            key, value = m.group(1), int(m.group(2))
            if key == "VOLT":
                if not 0 < value <= MAX_VOLTAGE_V:
                    return "ERR RANGE"
                self._volt = value
            else:
                if not MIN_WIDTH_NS <= value <= MAX_WIDTH_NS:
                    return "ERR RANGE"
                self._width = value
            return self._apply()
        if line == "ARM":
            return self._simple(self.generator.arm)
        if line == "DISARM":
            return self._simple(self.generator.disarm)
        if line == "CHARGE":
            return self._simple(self.generator.charge)
        if line == "FIRE":
            return self._simple(self.generator.hw_trigger)
        if line == "STATUS?":
            volt = "" if self._volt is None else f" VOLT={self._volt}"
            width = "" if self._width is None else f" WIDTH={self._width}"
            return f"STATE={self.generator.state.value}{volt}{width}"
        return "ERR PARSE"

    @staticmethod
    def _simple(op) -> str:
        try:
            op()
        except StateError:
            return "ERR STATE"
        return "OK"


def parse_status(line: str) -> dict:
    """Parse a STATUS? response into {state, volt?, width?}."""
    if not line.startswith("STATE="):
        raise ParseError("expected STATE= response", 0)
    out: dict = {}
    for field in line.split():
        key, _, value = field.partition("=")
        if not value:
            raise ParseError(f"malformed field {field!r}", line.index(field))
        if key == "STATE":
            out["state"] = value
        elif key in ("VOLT", "WIDTH"):
            out[key.lower()] = int(value)
    return out
