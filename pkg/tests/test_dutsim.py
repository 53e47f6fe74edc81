"""Simulated DUT: boot thresholds, fault sampling, payload outputs."""

import math
import random

import pytest

from emfi_rig.clock import SimClock
from emfi_rig.dut import (
    BypassWindow,
    DutConfig,
    DutState,
    FaultBlob,
    FaultEffect,
    FaultModel,
    SimulatedDut,
    VsocGate,
    classify_response,
    default_fault_model,
    load_fault_model,
    save_fault_model,
)
from emfi_rig.errors import StateError, ValidationError
from emfi_rig.model import ArkVerify, AttemptOutcome, CounterLoop, SramPattern
from emfi_rig.pulse import ProbeTip, PulseConfig
from emfi_rig.stats import confidence_interval
from emfi_rig.model import SuccessStats

PULSE_500 = PulseConfig(500, 73, ProbeTip(4, "CW"))
PULSE_WEAK = PulseConfig(100, 73, ProbeTip(4, "CW"))


def single_blob_model(p_max=0.3, effect=FaultEffect.LOOP_FAULT, center=(10.0, 5.0), sigma=0.7):
    return FaultModel(
        blobs=(FaultBlob(center=center, sigma=sigma, p_max=p_max, effect=effect),),
        voltage_knee=350.0,
        vsoc_gate=VsocGate(threshold=0.60, multiplier=0.0),
        bypass_windows=(BypassWindow(2364, 4),),
        seed=11,
    )


def booted_dut(model=None, v_soc=0.59, payload=CounterLoop(), config=DutConfig()):
    clock = SimClock()
    dut = SimulatedDut(clock, model or single_blob_model(), config, payload)
    dut.set_power(True, v_soc)
    clock.sleep(config.boot_latency_s)
    assert dut.state is DutState.RUNNING_PAYLOAD
    return clock, dut


class TestBoot:
    def test_below_threshold_halts_without_spi(self):
        clock = SimClock()
        dut = SimulatedDut(clock, single_blob_model())
        dut.set_power(True, 0.55)
        assert dut.state is DutState.HALTED
        assert dut.halt_outcome is AttemptOutcome.BOOT_FAILURE
        assert dut.spi_event_time() is None

    def test_just_above_threshold_boots_reliably(self):
        clock = SimClock()
        dut = SimulatedDut(clock, single_blob_model())
        booted = 0
        for _ in range(1000):
            dut.set_power(True, 0.59)
            if dut.state is DutState.BOOTING and dut.spi_event_time() is not None:
                booted += 1
            dut.set_power(False)
        assert booted == 1000

    def test_boot_from_running_is_state_error(self):
        _, dut = booted_dut()
        with pytest.raises(StateError):
            dut.boot(0.9)

    def test_no_spi_events_when_off_or_halted(self):
        clock = SimClock()
        dut = SimulatedDut(clock, single_blob_model())
        assert dut.spi_event_time() is None
        _, dut2 = booted_dut()
        dut2.run_payload_to_completion()
        assert dut2.state is DutState.HALTED
        dut2.power_cut()
        assert dut2.spi_event_time() is None


class TestApplyPulse:
    def test_blob_center_rate_within_wilson_ci_of_p_max(self):
        """Monte-Carlo oracle: empirical rate at the blob center must sit
        inside the 99% Wilson interval around the planted p_max."""
        p_max = 0.3
        model = single_blob_model(p_max=p_max)
        clock = SimClock()
        rng = random.Random(202)
        hits = 0
        n = 10000
        dut = SimulatedDut(clock, model, DutConfig(), CounterLoop())
        for _ in range(n):
            dut.set_power(True, 0.59)
            clock.sleep(dut.config.boot_latency_s)
            if dut.apply_pulse((10.0, 5.0), PULSE_500, 0, rng) is not None:
                hits += 1
            dut.set_power(False)
        low, high = confidence_interval(SuccessStats(hits, n), 0.99)
        assert low <= p_max <= high

    def test_gaussian_falloff(self):
        model = single_blob_model(p_max=0.4, sigma=0.7)
        blob = model.blobs[0]
        assert blob.probability_at(10.0, 5.0) == pytest.approx(0.4)
        assert blob.probability_at(10.7, 5.0) == pytest.approx(0.4 * math.exp(-0.5))

    def test_below_voltage_knee_never_faults(self):
        clock, dut = booted_dut()
        rng = random.Random(1)
        assert all(
            dut.apply_pulse((10.0, 5.0), PULSE_WEAK, 0, rng) is None for _ in range(5000)
        )

    def test_nominal_vsoc_suppresses_all_faults(self):
        clock, dut = booted_dut(v_soc=0.9)
        rng = random.Random(2)
        assert all(
            dut.apply_pulse((10.0, 5.0), PULSE_500, 0, rng) is None for _ in range(5000)
        )

    def test_bypass_requires_window(self):
        model = single_blob_model(p_max=1.0, effect=FaultEffect.ARK_BYPASS)
        _, dut = booted_dut(model=model, payload=ArkVerify())
        rng = random.Random(3)
        for _ in range(10000):
            assert dut.apply_pulse((10.0, 5.0), PULSE_500, 100, rng) is None
        assert dut.apply_pulse((10.0, 5.0), PULSE_500, 2364, rng) is FaultEffect.ARK_BYPASS

    def test_pulse_while_off_is_recorded_no_effect(self):
        clock = SimClock()
        dut = SimulatedDut(clock, single_blob_model())
        assert dut.apply_pulse((10.0, 5.0), PULSE_500, 0, random.Random(4)) is None

    def test_effect_payload_compatibility(self):
        # A loop-fault blob cannot disturb the SRAM payload.
        model = single_blob_model(p_max=1.0, effect=FaultEffect.LOOP_FAULT)
        _, dut = booted_dut(model=model, payload=SramPattern())
        assert dut.apply_pulse((10.0, 5.0), PULSE_500, 0, random.Random(5)) is None

    def test_default_model_contrast_across_vsoc(self):
        """The stock model is silent at nominal rail voltage and active
        once the rail is lowered below the gate."""
        model = default_fault_model()
        center = model.blobs[0].center
        for v_soc, expect_any in ((0.9, False), (0.59, True)):
            clock = SimClock()
            dut = SimulatedDut(clock, model, DutConfig(), CounterLoop())
            rng = random.Random(55)
            effects = 0
            for _ in range(2000):
                dut.set_power(True, v_soc)
                clock.sleep(dut.config.boot_latency_s)
                if dut.apply_pulse(center, PULSE_500, 0, rng) is not None:
                    effects += 1
                dut.set_power(False)
            assert (effects > 0) is expect_any

    def test_reproducible_under_seeds(self):
        def effect_sequence():
            clock = SimClock()
            dut = SimulatedDut(clock, single_blob_model(), DutConfig(), CounterLoop())
            rng = random.Random(77)
            out = []
            for _ in range(500):
                dut.set_power(True, 0.59)
                clock.sleep(dut.config.boot_latency_s)
                out.append(dut.apply_pulse((10.3, 5.2), PULSE_500, 0, rng))
                dut.set_power(False)
            return out

        assert effect_sequence() == effect_sequence()


class TestPayloads:
    def test_unfaulted_counter_loop(self):
        _, dut = booted_dut(payload=CounterLoop(1000))
        assert dut.run_payload_to_completion() == "COUNTER 1000 EXPECTED 1000"

    def test_forced_loop_fault_changes_counter(self):
        _, dut = booted_dut(payload=CounterLoop(1000))
        dut.force_effect(FaultEffect.LOOP_FAULT)
        out = dut.run_payload_to_completion()
        counter = int(out.split()[1])
        assert counter != 1000
        assert classify_response(out, CounterLoop(1000)) is AttemptOutcome.PAYLOAD_FAULT

    def test_forced_sram_flip_prints_one_differing_word(self):
        _, dut = booted_dut(payload=SramPattern(0xDEADBEEF, 64))
        dut.force_effect(FaultEffect.SRAM_FLIP)
        out = dut.run_payload_to_completion()
        assert out.startswith("SRAM FAULTS 1 ")
        index_str, word_str = out.split()[3].split(":")
        assert 0 <= int(index_str) < 64
        flipped = int(word_str, 16)
        assert bin(flipped ^ 0xDEADBEEF).count("1") == 1

    def test_unfaulted_sram(self):
        _, dut = booted_dut(payload=SramPattern())
        assert dut.run_payload_to_completion() == "SRAM FAULTS 0"

    def test_ark_fail_halt_without_fault(self):
        _, dut = booted_dut(payload=ArkVerify())
        assert dut.run_payload_to_completion() == "ARK FAIL HALT"

    def test_ark_ok_with_valid_key(self):
        _, dut = booted_dut(payload=ArkVerify(), config=DutConfig(ark_key_valid=True))
        assert dut.run_payload_to_completion() == "ARK OK"

    def test_bypass_marker(self):
        _, dut = booted_dut(payload=ArkVerify())
        dut.force_effect(FaultEffect.ARK_BYPASS)
        assert dut.run_payload_to_completion() == "OFFCHIP BL EXEC"

    def test_crash_produces_no_output(self):
        _, dut = booted_dut()
        dut.force_effect(FaultEffect.CRASH)
        assert dut.run_payload_to_completion() is None
        assert dut.halt_outcome is AttemptOutcome.CRASH

    def test_payload_runtime_elapses(self):
        clock, dut = booted_dut()
        before = clock.now()
        dut.run_payload_to_completion()
        assert clock.now() - before == pytest.approx(dut.config.output_latency_s)

    def test_run_payload_from_off_is_state_error(self):
        clock = SimClock()
        dut = SimulatedDut(clock, single_blob_model())
        with pytest.raises(StateError):
            dut.run_payload_to_completion()


class TestClassify:
    def test_counter_match(self):
        assert classify_response("COUNTER 1000 EXPECTED 1000", CounterLoop()) is AttemptOutcome.NO_EFFECT

    def test_counter_mismatch(self):
        assert classify_response("COUNTER 998 EXPECTED 1000", CounterLoop()) is AttemptOutcome.PAYLOAD_FAULT

    def test_sram_counts(self):
        assert classify_response("SRAM FAULTS 0", SramPattern()) is AttemptOutcome.NO_EFFECT
        assert classify_response("SRAM FAULTS 2 0001:0 0002:0", SramPattern()) is AttemptOutcome.PAYLOAD_FAULT

    def test_bypass_marker(self):
        assert classify_response("OFFCHIP BL EXEC", ArkVerify()) is AttemptOutcome.BYPASS_SUCCESS

    def test_ark_halt_is_no_effect(self):
        assert classify_response("ARK FAIL HALT", ArkVerify()) is AttemptOutcome.NO_EFFECT

    def test_unrecognized_output_is_crash(self):
        assert classify_response("garbage", CounterLoop()) is AttemptOutcome.CRASH
        assert classify_response("garbage", ArkVerify()) is AttemptOutcome.CRASH

    def test_missing_output_depends_on_power(self):
        assert classify_response(None, CounterLoop(), powered=True) is AttemptOutcome.CRASH
        assert classify_response(None, CounterLoop(), powered=False) is AttemptOutcome.TIMEOUT


class TestModelFile:
    def test_round_trip(self, tmp_path):
        model = default_fault_model(seed=9)
        path = tmp_path / "model.json"
        save_fault_model(model, path)
        assert load_fault_model(path) == model

    def test_version_enforced(self, tmp_path):
        path = tmp_path / "model.json"
        path.write_text('{"version": 99, "blobs": []}')
        with pytest.raises(ValidationError):
            load_fault_model(path)

    def test_blob_validation(self):
        with pytest.raises(ValidationError):
            FaultBlob(center=(0, 0), sigma=0, p_max=0.5, effect=FaultEffect.CRASH)
        with pytest.raises(ValidationError):
            FaultBlob(center=(0, 0), sigma=1, p_max=1.5, effect=FaultEffect.CRASH)
