"""Offset calibration math, die-to-stage mapping, Z-depth search."""

import pytest
from hypothesis import given, settings, strategies as st

from emfi_rig.calibration import (
    CalibrationStore,
    DieAnchor,
    OffsetCalibration,
    PixelPoint,
    compute_probe_offset,
    die_to_stage,
    find_z_touch,
    stage_to_die,
)
from emfi_rig.errors import NotFoundError, RigError, ValidationError
from emfi_rig.model import StagePosition

pixels = st.floats(0, 1080)


def offset(probe, camera, scale=10.0):
    return compute_probe_offset(
        PixelPoint(*probe), PixelPoint(*camera), scale, probe_ident="4mm-CW"
    )


class TestProbeOffset:
    def test_coincident_centers(self):
        cal = offset((100, 100), (100, 100), scale=13.7)
        assert (cal.dx, cal.dy) == (0.0, 0.0)

    def test_hundred_pixels_at_ten_um(self):
        cal = offset((200, 100), (100, 100), scale=10.0)
        assert (cal.dx, cal.dy) == (1.0, 0.0)

    def test_scale_must_be_positive(self):
        with pytest.raises(ValidationError):
            offset((0, 0), (0, 0), scale=0)

    def test_centers_must_be_in_frame(self):
        with pytest.raises(ValidationError):
            offset((5000, 0), (0, 0))

    @given(pu=pixels, pv=pixels, cu=pixels, cv=pixels)
    @settings(max_examples=200)
    def test_antisymmetric_under_swap(self, pu, pv, cu, cv):
        a = offset((pu, pv), (cu, cv))
        b = offset((cu, cv), (pu, pv))
        assert a.dx == -b.dx
        assert a.dy == -b.dy

    @given(pu=pixels, pv=pixels, cu=pixels, cv=pixels)
    @settings(max_examples=200)
    def test_pixel_round_trip_within_one_pixel(self, pu, pv, cu, cv):
        scale = 10.0
        cal = offset((pu, pv), (cu, cv), scale)
        # Invert the camera transform: offset back to pixel deltas.
        ru = cu + cal.dx * 1000.0 / scale
        rv = cv + cal.dy * 1000.0 / scale
        assert abs(ru - pu) < 1.0
        assert abs(rv - pv) < 1.0

    def test_offset_magnitude_cap(self):
        with pytest.raises(ValidationError):
            OffsetCalibration(50.0, 10.0, 10.0, "", "4mm-CW")


ANCHOR = DieAnchor(corner=StagePosition(30, 30, 12.1), width=22, height=9)
ZERO_CAL = OffsetCalibration(0.0, 0.0, 10.0, "", "4mm-CW")
CAL = OffsetCalibration(1.0, 0.0, 10.0, "", "4mm-CW")


class TestDieToStage:
    def test_die_origin_zero_offset_is_anchor(self):
        assert die_to_stage((0, 0), ANCHOR, ZERO_CAL) == ANCHOR.corner

    def test_point_plus_offset(self):
        pos = die_to_stage((1, 1), ANCHOR, CAL)
        assert pos == StagePosition(32, 31, 12.1)

    def test_outside_die_rejected_unless_overridden(self):
        with pytest.raises(ValidationError):
            die_to_stage((23, 0), ANCHOR, ZERO_CAL)
        die_to_stage((23, 0), ANCHOR, ZERO_CAL, allow_outside=True)

    def test_z_override(self):
        assert die_to_stage((0, 0), ANCHOR, ZERO_CAL, z=5.0).z == 5.0

    @given(
        ax=st.floats(10, 60),
        ay=st.floats(10, 60),
        x1=st.floats(0, 22),
        y1=st.floats(0, 9),
        x2=st.floats(0, 22),
        y2=st.floats(0, 9),
    )
    @settings(max_examples=100)
    def test_affine_property(self, ax, ay, x1, y1, x2, y2):
        anchor = DieAnchor(StagePosition(ax, ay, 12.0), 22, 9)
        a = die_to_stage((x1, y1), anchor, CAL)
        b = die_to_stage((x2, y2), anchor, CAL)
        assert a.x - b.x == pytest.approx(x1 - x2, abs=1e-9)
        assert a.y - b.y == pytest.approx(y1 - y2, abs=1e-9)

    @given(ax=st.floats(5, 70), ay=st.floats(5, 85))
    @settings(max_examples=100)
    def test_grid_corners_inside_stage_limits_for_valid_anchors(self, ax, ay):
        anchor = DieAnchor(StagePosition(ax, ay, 12.0), 22, 9)
        for corner in [(0, 0), (22, 0), (0, 9), (22, 9)]:
            pos = die_to_stage(corner, anchor, CAL)
            assert -50 < pos.x < 150 and -50 < pos.y < 150

    def test_stage_to_die_inverts(self):
        pos = die_to_stage((3.5, 2.25), ANCHOR, CAL)
        x, y = stage_to_die(pos, ANCHOR, CAL)
        assert (x, y) == (pytest.approx(3.5), pytest.approx(2.25))


def surface_oracle(surface_z):
    return lambda z: z - surface_z


class TestFindZTouch:
    def test_simulated_surface(self):
        z = find_z_touch(20.0, step=0.025, gap_threshold=0.1, gap_oracle=surface_oracle(12.0))
        assert 12.1 - 1e-9 <= z <= 12.1 + 0.025 + 1e-9

    def test_start_below_surface_errors(self):
        with pytest.raises(RigError):
            find_z_touch(11.0, 0.025, 0.1, surface_oracle(12.0))

    def test_zero_threshold_converges_to_surface(self):
        z = find_z_touch(20.0, 0.025, 0.0, surface_oracle(12.0))
        assert 12.0 - 1e-9 <= z <= 12.0 + 0.025 + 1e-9

    def test_travel_exhausted(self):
        with pytest.raises(NotFoundError):
            find_z_touch(20.0, 0.025, 0.1, gap_oracle=lambda z: 5.0)

    def test_step_validation(self):
        with pytest.raises(ValidationError):
            find_z_touch(20.0, 0, 0.1, surface_oracle(12.0))

    @given(
        surface=st.floats(1.0, 15.0),
        threshold=st.floats(0.0, 0.5),
        step=st.sampled_from([0.01, 0.025, 0.1]),
    )
    @settings(max_examples=100)
    def test_never_penetrates_surface(self, surface, threshold, step):
        z = find_z_touch(20.0, step, threshold, surface_oracle(surface))
        assert z >= surface + threshold - 1e-9
        assert z <= surface + threshold + step + 1e-9


class TestStore:
    def test_save_load_invalidate(self, tmp_path):
        store = CalibrationStore(tmp_path)
        cal = OffsetCalibration(1.0, -0.5, 10.0, "2025-01-01T00:00:00+00:00", "4mm-CW")
        store.save(cal)
        assert store.load("4mm-CW") == cal
        store.invalidate("4mm-CW")
        with pytest.raises(NotFoundError):
            store.load("4mm-CW")
