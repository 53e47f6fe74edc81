"""Core domain types and statistics."""

import math

import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import binom

from emfi_rig.errors import UndefinedRateError, ValidationError
from emfi_rig.model import (
    AttemptOutcome,
    AttemptRecord,
    CounterLoop,
    GridSpec,
    ScanResult,
    SramPattern,
    StagePosition,
    SuccessStats,
    SupplyVoltages,
    TriggerPlan,
    generate_grid,
    payload_from_dict,
    payload_to_dict,
)
from emfi_rig.pulse import ProbeTip, PulseConfig
from emfi_rig.stats import confidence_interval, estimate_campaign_duration, format_rate, success_rate


def brute_force_lattice(spec: GridSpec) -> set[tuple[float, float, float]]:
    """Independent double-loop enumeration of the inclusive lattice."""
    points = set()
    i = 0
    while i * spec.pitch <= spec.width + 1e-9:
        j = 0
        while j * spec.pitch <= spec.height + 1e-9:
            points.add(
                (spec.origin.x + i * spec.pitch, spec.origin.y + j * spec.pitch, spec.z)
            )
            j += 1
        i += 1
    return points


def grid(width, height, pitch, origin=(0.0, 0.0, 0.0), z=5.0):
    return GridSpec(origin=StagePosition(*origin), width=width, height=height, pitch=pitch, z=z)


class TestGenerateGrid:
    def test_inclusive_lattice_count_4x3(self):
        assert len(generate_grid(grid(4, 3, 1))) == 20

    def test_3x3_lattice(self):
        assert len(generate_grid(grid(1, 1, 0.5))) == 9

    def test_pitch_halving_quadruples_against_enumerator(self):
        coarse = grid(6, 4, 1.0)
        fine = grid(6, 4, 0.5)
        coarse_pts = generate_grid(coarse)
        fine_pts = generate_grid(fine)
        assert set((p.x, p.y, p.z) for p in coarse_pts) == brute_force_lattice(coarse)
        assert set((p.x, p.y, p.z) for p in fine_pts) == brute_force_lattice(fine)
        ratio = len(fine_pts) / len(coarse_pts)
        assert 3.3 < ratio < 4.0  # 13*9 / (7*5) = 3.34; -> 4 as extent grows

    def test_serpentine_order_minimizes_travel(self):
        pts = generate_grid(grid(3, 2, 1))
        # Row 0 left-to-right, row 1 right-to-left, ...
        assert [(p.x, p.y) for p in pts[:4]] == [(0, 0), (1, 0), (2, 0), (3, 0)]
        assert [(p.x, p.y) for p in pts[4:8]] == [(3, 1), (2, 1), (1, 1), (0, 1)]
        # No step ever longer than one pitch in a single axis.
        for a, b in zip(pts, pts[1:]):
            assert abs(a.x - b.x) + abs(a.y - b.y) == pytest.approx(1.0)

    def test_invalid_pitch_rejected(self):
        with pytest.raises(ValidationError):
            grid(4, 3, 0)
        with pytest.raises(ValidationError):
            grid(4, 3, -1)
        with pytest.raises(ValidationError):
            grid(-1, 3, 1)

    @given(
        width=st.floats(0, 8),
        height=st.floats(0, 8),
        pitch=st.sampled_from([0.25, 0.5, 1.0, 1.5, 2.0]),
    )
    @settings(max_examples=60)
    def test_matches_brute_force_enumeration(self, width, height, pitch):
        spec = grid(width, height, pitch)
        pts = generate_grid(spec)
        assert set((p.x, p.y, p.z) for p in pts) == brute_force_lattice(spec)
        assert len(pts) == len(set(pts))


class TestSuccessRate:
    def test_known_rates(self):
        assert success_rate(SuccessStats(2206, 10000)) == pytest.approx(0.2206)
        assert success_rate(SuccessStats(158, 10000)) == pytest.approx(0.0158)

    def test_zero_successes(self):
        assert success_rate(SuccessStats(0, 100)) == 0.0

    def test_zero_attempts_undefined(self):
        with pytest.raises(UndefinedRateError):
            success_rate(SuccessStats(0, 0))

    def test_format(self):
        assert format_rate(SuccessStats(2206, 10000)) == "22.06%"
        assert format_rate(SuccessStats(68, 10000)) == "0.68%"

    @given(n=st.integers(1, 1000), data=st.data())
    @settings(max_examples=50)
    def test_monotone_in_successes(self, n, data):
        k = data.draw(st.integers(0, n - 1))
        assert success_rate(SuccessStats(k, n)) < success_rate(SuccessStats(k + 1, n))


def clopper_pearson(k: int, n: int, level: float) -> tuple[float, float]:
    """Exact interval via bisection on the binomial CDF (test oracle)."""
    alpha = 1 - level

    def bisect(predicate):
        lo, hi = 0.0, 1.0
        for _ in range(80):
            mid = (lo + hi) / 2
            if predicate(mid):
                lo = mid
            else:
                hi = mid
        return (lo + hi) / 2

    lower = 0.0 if k == 0 else bisect(lambda p: 1 - binom.cdf(k - 1, n, p) <= alpha / 2)
    upper = 1.0 if k == n else bisect(lambda p: binom.cdf(k, n, p) >= alpha / 2)
    return lower, upper


class TestConfidenceInterval:
    def test_zero_successes_lower_bound_is_zero(self):
        low, high = confidence_interval(SuccessStats(0, 100), 0.95)
        assert low == 0.0
        assert 0 < high < 0.1

    def test_large_sample_cross_checked_against_clopper_pearson(self):
        stats = SuccessStats(2206, 10000)
        low, high = confidence_interval(stats, 0.95)
        assert low < 0.2206 < high
        assert high - low < 0.02
        cp_low, cp_high = clopper_pearson(2206, 10000, 0.95)
        assert low == pytest.approx(cp_low, abs=5e-4)
        assert high == pytest.approx(cp_high, abs=5e-4)

    def test_small_proportion_interval(self):
        low, high = confidence_interval(SuccessStats(98, 20000), 0.95)
        assert low < 0.0049 < high

    def test_level_validation(self):
        with pytest.raises(ValidationError):
            confidence_interval(SuccessStats(1, 10), 1.0)
        with pytest.raises(UndefinedRateError):
            confidence_interval(SuccessStats(0, 0), 0.95)

    @given(
        n=st.integers(1, 5000),
        data=st.data(),
        level=st.sampled_from([0.8, 0.9, 0.95, 0.99]),
    )
    @settings(max_examples=80)
    def test_contains_estimate_within_unit_interval(self, n, data, level):
        k = data.draw(st.integers(0, n))
        low, high = confidence_interval(SuccessStats(k, n), level)
        assert 0.0 <= low <= k / n <= high <= 1.0


class TestDuration:
    def test_full_chip_scan_consistency(self):
        seconds = estimate_campaign_duration(230, 100, 3.9)
        assert seconds == pytest.approx(89700)
        assert 21.25 <= seconds / 3600 <= 28.75  # ~25 h +/- 15%

    def test_single_cycle(self):
        assert estimate_campaign_duration(1, 1, 4.0) == 4.0

    def test_arithmetic_oracle(self):
        assert estimate_campaign_duration(20, 100, 3.9) == pytest.approx(20 * 100 * 3.9)

    def test_positive_inputs_required(self):
        with pytest.raises(ValidationError):
            estimate_campaign_duration(0, 100, 3.9)
        with pytest.raises(ValidationError):
            estimate_campaign_duration(10, 100, -1)


class TestDomainTypes:
    def test_supply_voltage_bounds(self):
        SupplyVoltages(0.9, 1.1)
        with pytest.raises(ValidationError):
            SupplyVoltages(0.0, 1.1)
        with pytest.raises(ValidationError):
            SupplyVoltages(0.9, 1.6)

    def test_trigger_plan_bounds(self):
        plan = TriggerPlan(2364, 4)
        assert (plan.lo, plan.hi) == (2360, 2368)
        with pytest.raises(ValidationError):
            TriggerPlan(-1, 0)
        with pytest.raises(ValidationError):
            TriggerPlan(2, 4)
        with pytest.raises(ValidationError):
            TriggerPlan(2.5, 0)

    def test_success_stats_bounds(self):
        with pytest.raises(ValidationError):
            SuccessStats(5, 4)
        with pytest.raises(ValidationError):
            SuccessStats(-1, 4)

    def test_position_must_be_finite(self):
        with pytest.raises(ValidationError):
            StagePosition(math.nan, 0, 0)

    def test_payload_dict_round_trip(self):
        for payload in (CounterLoop(123), SramPattern(0xABCD, 7)):
            assert payload_from_dict(payload_to_dict(payload)) == payload


def make_record(seq=0) -> AttemptRecord:
    return AttemptRecord(
        seq=seq,
        timestamp="2025-01-01T00:00:03.450000+00:00",
        position=StagePosition(43.55, 34.3, 12.1),
        pulse=PulseConfig(500.0, 73.0, ProbeTip(4, "CW")),
        supplies=SupplyVoltages(0.59, 1.1),
        plan=TriggerPlan(2364, 4),
        effective_delay=2362,
        payload=CounterLoop(1000),
        outcome=AttemptOutcome.PAYLOAD_FAULT,
        response="COUNTER 998 EXPECTED 1000",
        events=(("disarm", 0.0), ("move", 0.1)),
    )


class TestAttemptRecord:
    def test_round_trip_field_equality(self):
        rec = make_record()
        assert AttemptRecord.from_dict(rec.to_dict()) == rec

    def test_schema_version_enforced(self):
        d = make_record().to_dict()
        d["v"] = 2
        with pytest.raises(ValidationError):
            AttemptRecord.from_dict(d)


class TestScanResult:
    def test_argmax_tie_breaks_lowest_y_then_x(self):
        result = ScanResult(attempts_per_position=1)
        for x, y in [(1.0, 1.0), (0.0, 1.0), (1.0, 0.0)]:
            result.add(x, y, AttemptOutcome.PAYLOAD_FAULT)
        assert result.argmax() == (1.0, 0.0)

    def test_histogram_sums(self):
        result = ScanResult(attempts_per_position=3)
        result.add(0.0, 0.0, AttemptOutcome.NO_EFFECT)
        result.add(0.0, 0.0, AttemptOutcome.PAYLOAD_FAULT)
        result.add(0.0, 0.0, AttemptOutcome.CRASH)
        assert result.attempts_at((0.0, 0.0)) == 3
        assert result.stats_at((0.0, 0.0)) == SuccessStats(1, 3)

    def test_all_zero_argmax_is_none(self):
        result = ScanResult(attempts_per_position=1)
        result.add(0.0, 0.0, AttemptOutcome.NO_EFFECT)
        assert result.argmax() is None
