"""Wire protocol and stage controller against the simulated firmware."""

import pytest
from hypothesis import given, settings, strategies as st

from emfi_rig.clock import SimClock
from emfi_rig.errors import (
    DeviceError,
    DeviceTimeout,
    LimitError,
    ParseError,
    SafetyError,
    StateError,
    ValidationError,
)
from emfi_rig.model import StagePosition
from emfi_rig.motion import (
    Home,
    MoveAbsolute,
    MoveRelative,
    MotionLimits,
    ReportPosition,
    SetFanSpeed,
    SimulatedStageFirmware,
    SimulatedTransport,
    StageController,
    decode,
    decode_position_report,
    encode,
    quantize_mm,
)


class TestEncode:
    def test_move_absolute_canonical_line(self):
        cmd = MoveAbsolute(10.5, 2, 3.25, 600)
        assert encode(cmd) == "G1 X10.500 Y2.000 Z3.250 F600"

    def test_home(self):
        assert encode(Home()) == "G28"

    def test_fan(self):
        assert encode(SetFanSpeed(0, 255)) == "M106 P0 S255"

    def test_report(self):
        assert encode(ReportPosition()) == "M114"

    def test_feed_must_be_positive(self):
        with pytest.raises(ValidationError):
            MoveAbsolute(1, 1, 1, 0)
        with pytest.raises(ValidationError):
            MoveRelative(1, 1, 1, -5)

    def test_fan_duty_bounds(self):
        with pytest.raises(ValidationError):
            SetFanSpeed(0, 256)


coords = st.floats(-150, 150, allow_nan=False, allow_infinity=False)
feeds = st.integers(1, 6000)
commands = st.one_of(
    st.just(Home()),
    st.just(ReportPosition()),
    st.builds(MoveAbsolute, coords, coords, coords, feeds),
    st.builds(MoveRelative, coords, coords, coords, feeds),
    st.builds(SetFanSpeed, st.integers(0, 3), st.integers(0, 255)),
)


class TestRoundTrip:
    @given(cmd=commands)
    @settings(max_examples=300)
    def test_decode_inverts_encode(self, cmd):
        assert decode(encode(cmd)) == cmd


class TestDecodePositionReport:
    def test_marlin_style_report(self):
        line = "X:10.50 Y:2.00 Z:3.25 E:0.00 Count X:4200 Y:800 Z:1300"
        assert decode_position_report(line) == (10.5, 2.0, 3.25)

    def test_origin(self):
        assert decode_position_report("X:0.00 Y:0.00 Z:0.00") == (0.0, 0.0, 0.0)

    def test_malformed_line_carries_byte_offset(self):
        with pytest.raises(ParseError) as exc:
            decode_position_report("X:10.50 Yoops")
        assert exc.value.offset == 8

    def test_bad_number_offset(self):
        with pytest.raises(ParseError) as exc:
            decode_position_report("X:abc Y:0 Z:0")
        assert exc.value.offset == 2

    def test_unknown_opcode(self):
        with pytest.raises(ParseError):
            decode("G2 X0.000 Y0.000 Z0.000 F100")


def make_stage(interlock=None, travel=100.0):
    clock = SimClock()
    firmware = SimulatedStageFirmware(clock, travel_mm=travel)
    controller = StageController(
        SimulatedTransport(firmware), MotionLimits(travel_mm=travel), interlock=interlock
    )
    return clock, firmware, controller


class TestController:
    def test_home_establishes_origin(self):
        _, _, stage = make_stage()
        pos = stage.home()
        assert pos == StagePosition(0, 0, 0)
        assert stage.state.homed

    def test_move_requires_home(self):
        _, _, stage = make_stage()
        with pytest.raises(StateError):
            stage.move_to(StagePosition(1, 1, 1))

    def test_out_of_travel_rejected_without_motion(self):
        _, firmware, stage = make_stage()
        stage.home()
        with pytest.raises(LimitError):
            stage.move_to(StagePosition(120, 0, 0))
        assert firmware.position_mm == (0.0, 0.0, 0.0)

    def test_loopback_position_equals_quantized_target(self):
        _, _, stage = make_stage()
        stage.home()
        target = StagePosition(10.5025, 2.0004, 3.25)
        pos = stage.move_to(target)
        assert pos == StagePosition(
            quantize_mm(target.x), quantize_mm(target.y), quantize_mm(target.z)
        )
        assert stage.get_position() == pos

    @given(
        x=st.floats(0, 100),
        y=st.floats(0, 100),
        z=st.floats(0, 100),
    )
    @settings(max_examples=60)
    def test_loopback_quantization_property(self, x, y, z):
        _, _, stage = make_stage()
        stage.home()
        pos = stage.move_to(StagePosition(x, y, z))
        for value, commanded in ((pos.x, x), (pos.y, y), (pos.z, z)):
            # Reported coordinate sits on the step grid...
            assert abs(value * 400 - round(value * 400)) < 1e-6
            # ...and within half a step plus wire rounding of the command.
            assert abs(value - commanded) <= 0.0025 / 2 + 0.0005 + 1e-9

    def test_same_position_move_takes_zero_time(self):
        clock, _, stage = make_stage()
        stage.home()
        stage.move_to(StagePosition(5, 5, 5))
        before = clock.now()
        stage.move_to(StagePosition(5, 5, 5))
        assert clock.now() == before

    def test_ten_mm_at_max_feed_takes_at_least_one_second(self):
        clock, _, stage = make_stage()
        stage.home()
        before = clock.now()
        stage.move_to(StagePosition(10, 0, 0), feed_mm_s=10.0)
        assert clock.now() - before >= 1.0

    def test_duration_at_least_chebyshev_over_max_speed(self):
        clock, _, stage = make_stage()
        stage.home()
        before = clock.now()
        stage.move_to(StagePosition(8, 3, 1), feed_mm_s=99.0)  # feed above cap
        assert clock.now() - before >= 8 / 10.0 - 1e-9

    def test_jog_moves_relative(self):
        _, _, stage = make_stage()
        stage.home()
        stage.move_to(StagePosition(5, 5, 5))
        pos = stage.jog(dx=1.0)
        assert pos == StagePosition(6, 5, 5)

    def test_jog_beyond_travel_rejected(self):
        _, _, stage = make_stage()
        stage.home()
        stage.move_to(StagePosition(99, 0, 0))
        with pytest.raises(LimitError):
            stage.jog(dx=2.0)

    def test_set_fan_reaches_firmware(self):
        _, firmware, stage = make_stage()
        stage.set_fan(0, 255)
        assert firmware.fans[0] == 255

    @given(
        ops=st.lists(
            st.one_of(
                st.tuples(st.just("abs"), coords, coords, coords),
                st.tuples(st.just("jog"), coords, coords, coords),
                st.tuples(st.just("home"), st.just(0.0), st.just(0.0), st.just(0.0)),
            ),
            max_size=12,
        )
    )
    @settings(max_examples=60)
    def test_accepted_commands_never_exceed_limits(self, ops):
        _, firmware, stage = make_stage()
        stage.home()
        for kind, x, y, z in ops:
            try:
                if kind == "abs":
                    stage.move_to(StagePosition(x, y, z))
                elif kind == "jog":
                    stage.jog(x, y, z)
                else:
                    stage.home()
            except LimitError:
                pass
            for coord in firmware.position_mm:
                assert 0.0 <= coord <= 100.0


class Flaky:
    """Transport that times out a fixed number of times per command."""

    def __init__(self, inner, failures):
        self.inner = inner
        self.failures = failures
        self._seen: dict[str, int] = {}

    def write_line(self, line):
        self._pending = line
        self._seen[line] = self._seen.get(line, 0) + 1
        if self._seen[line] <= self.failures:
            self._timeout = True
        else:
            self._timeout = False
            self.inner.write_line(line)

    def read_line(self, timeout_s=1.0):
        if self._timeout:
            raise DeviceTimeout("injected")
        return self.inner.read_line(timeout_s)


class TestRetries:
    def test_single_timeout_retried(self):
        clock = SimClock()
        firmware = SimulatedStageFirmware(clock)
        stage = StageController(Flaky(SimulatedTransport(firmware), failures=1), MotionLimits())
        stage.home()
        assert stage.state.homed

    def test_second_timeout_surfaces_device_error(self):
        clock = SimClock()
        firmware = SimulatedStageFirmware(clock)
        stage = StageController(Flaky(SimulatedTransport(firmware), failures=2), MotionLimits())
        with pytest.raises(DeviceError):
            stage.home()


class ArmedInterlock:
    def check_motion(self):
        raise SafetyError("armed")


class TestInterlock:
    def test_motion_denied_while_armed(self):
        clock = SimClock()
        firmware = SimulatedStageFirmware(clock)
        stage = StageController(
            SimulatedTransport(firmware), MotionLimits(), interlock=ArmedInterlock()
        )
        with pytest.raises(SafetyError):
            stage.home()
        assert firmware.homed is False
