"""Trigger microcontroller duties: SPI-anchored pulse delay, supply-rail
commands, and PS_ON/PWR_SW power sequencing.

Wait cycles convert to time through a configurable cycles-per-microsecond
constant; the default of 50 makes a 3000-cycle brute-force range span a
60 us window, comfortably covering the 53 us verification interval.
"""

from __future__ import annotations

import random
import re
from dataclasses import dataclass
from typing import Callable, Optional

from .clock import Clock
from .dut import SimulatedDut
from .errors import DeviceTimeout, RangeError, ValidationError
from .model import SupplyVoltages, TriggerPlan

DEFAULT_CYCLES_PER_US = 50.0

SVI2_MIN_V = 0.3
SVI2_MAX_V = 1.5


@dataclass(frozen=True)
class Svi2Command:
    rail: str  # "Soc" or "Core"
    setpoint: float

    def __post_init__(self):
        if self.rail not in ("Soc", "Core"):
            raise ValidationError(f"rail must be 'Soc' or 'Core', got {self.rail!r}")
        if not SVI2_MIN_V <= self.setpoint <= SVI2_MAX_V:
            raise RangeError(
                f"setpoint must be in [{SVI2_MIN_V}, {SVI2_MAX_V}] V, got {self.setpoint}"
            )


@dataclass(frozen=True)
class PowerState:
    ps_on: bool = False
    pwr_sw: bool = False

    @property
    def target_on(self) -> bool:
        return self.ps_on and self.pwr_sw


@dataclass(frozen=True)
class TriggerPowerConfig:
    cycles_per_us: float = DEFAULT_CYCLES_PER_US
    power_step_delay_s: float = 0.15
    power_off_settle_s: float = 1.0


class TriggerPowerUnit:
    """Single synchronized facade over trigger, SVI2 and power duties.

    `on_trigger(effective_delay_cycles)` is invoked when the hardware
    trigger edge fires, i.e. the sampled delay after the SPI boot event.
    """

    def __init__(
        self,
        clock: Clock,
        dut: Optional[SimulatedDut] = None,
        config: TriggerPowerConfig = TriggerPowerConfig(),
        seed: int = 0,
    ):
        self.clock = clock
        self.dut = dut
        self.config = config
        self.plan: Optional[TriggerPlan] = None
        self.supplies = SupplyVoltages(v_soc=0.9, v_core=1.1)
        self.power = PowerState()
        self.on_trigger: Optional[Callable[[int], None]] = None
        self.on_spi: Optional[Callable[[float], None]] = None
        self.rng = random.Random(f"trigger:{seed}")
        self.last_effective_delay: Optional[int] = None
        self.pin_trace: list[tuple[float, str]] = []

    # -- trigger --------------------------------------------------------

    def configure_trigger(self, plan: TriggerPlan) -> None:
        self.plan = plan

    def sample_effective_delay(self, rng: Optional[random.Random] = None) -> int:
        if self.plan is None:
            raise ValidationError("no trigger plan configured")
        rng = rng if rng is not None else self.rng
        return rng.randint(self.plan.lo, self.plan.hi)

    def cycles_to_seconds(self, cycles: int) -> float:
        return cycles / self.config.cycles_per_us * 1e-6

    def await_spi_event(self, timeout_s: float = 5.0) -> float:
        """Block until the boot SPI event, then emit the trigger edge after
        the sampled delay. Returns the event timestamp (virtual seconds)."""
        if self.plan is None:
            raise ValidationError("no trigger plan configured")
        t_event = self.dut.spi_event_time() if self.dut is not None else None
        now = self.clock.now()
        if t_event is None or t_event > now + timeout_s:
            self.clock.sleep(timeout_s)
            raise DeviceTimeout("no SPI event within timeout")
        if t_event > now:
            self.clock.sleep(t_event - now)
        if self.on_spi is not None:
            self.on_spi(t_event)
        effective = self.sample_effective_delay(self.rng)
        self.last_effective_delay = effective
        self.clock.sleep(self.cycles_to_seconds(effective))
        if self.on_trigger is not None:
            self.on_trigger(effective)
        return t_event

    # -- SVI2 -----------------------------------------------------------

    def set_supply(self, cmd: Svi2Command) -> None:
        if cmd.rail == "Soc":
            self.supplies = SupplyVoltages(v_soc=cmd.setpoint, v_core=self.supplies.v_core)
        else:
            self.supplies = SupplyVoltages(v_soc=self.supplies.v_soc, v_core=cmd.setpoint)

    # -- power sequencing -------------------------------------------------

    def _pin(self, name: str) -> None:
        self.pin_trace.append((self.clock.now(), name))

    def power_on(self) -> None:
        """Assert PS_ON, then PWR_SW after the inter-step delay."""
        if self.power.target_on:
            return
        self._pin("ps_on")
        self.power = PowerState(ps_on=True, pwr_sw=False)
        self.clock.sleep(self.config.power_step_delay_s)
        self._pin("pwr_sw")
        self.power = PowerState(ps_on=True, pwr_sw=True)
        if self.dut is not None:
            self.dut.set_power(True, self.supplies.v_soc)

    def power_off(self) -> None:
        """Deassert PS_ON; cutting power also clears the board's latch."""
        if not self.power.ps_on and not self.power.pwr_sw:
            return
        self._pin("ps_off")
        self.power = PowerState()
        if self.dut is not None:
            self.dut.set_power(False)
        self.clock.sleep(self.config.power_off_settle_s)


# -- text protocol ------------------------------------------------------

_TRIG_RE = re.compile(r"^TRIG DELAY=(\d+) WINDOW=(\d+)$")
_VSET_RE = re.compile(r"^VSET (SOC|CORE)=(\d+)$")


class TriggerProtocolAdapter:
    """Device-side handler for the configuration text protocol."""

    def __init__(self, unit: TriggerPowerUnit):
        self.unit = unit

    def handle_line(self, line: str) -> str:
        line = line.strip()
        m = _TRIG_RE.match(line)
        if m:
            try:
                self.unit.configure_trigger(TriggerPlan(int(m.group(1)), int(m.group(2))))
            except ValidationError:
                return "ERR RANGE"
            return "OK"
        m = _VSET_RE.match(line)
        if m:
            rail = "Soc" if m.group(1) == "SOC" else "Core"
            try:
                self.unit.set_supply(Svi2Command(rail, int(m.group(2)) / 1000.0))
            except (RangeError, ValidationError):
                return "ERR RANGE"
            return "OK"
        if line == "PWR ON":
            self.unit.power_on()
            return "OK"
        if line == "PWR OFF":
            self.unit.power_off()
            return "OK"
        return "ERR PARSE"
