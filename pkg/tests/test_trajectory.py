import csv

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cavformation.errors import NonMonotonic
from cavformation.grid import FormationSpec, PathPlan, RelPoint
from cavformation.trajectory import (WorldPoint, build_schedule, build_segment, formation_gaps,
                                     lane_center, project_point, unproject)

SPEC = FormationSpec()


def test_projection_moves_with_the_formation():
    p = project_point(RelPoint(1, 2), 3, SPEC, lane_width=0.5)
    assert p.x == pytest.approx(0.1 * 3 * 10 + 2 * 0.5)
    assert p.y == pytest.approx(0.75)
    assert unproject(p, 3, SPEC, lane_width=0.5) == (1, 2)


def test_segment_endpoints_and_tangents():
    seg = build_segment(WorldPoint(0, 0), WorldPoint(1.5, 0.46), 10.0)
    assert tuple(seg.point(0.0)) == pytest.approx((0, 0))
    assert tuple(seg.point(1.0)) == pytest.approx((1.5, 0.46))
    # heading along the road at both ends
    assert seg.derivative(0.0)[1] == pytest.approx(0.0)
    assert seg.derivative(1.0)[1] == pytest.approx(0.0)


def test_straight_segment_has_zero_curvature():
    seg = build_segment(WorldPoint(0, 0.23), WorldPoint(1.0, 0.23), 10.0)
    assert np.allclose(seg.curvature(np.linspace(0, 1, 11)), 0.0)
    assert seg.length == pytest.approx(1.0)


def test_x_is_linear_in_parameter():
    seg = build_segment(WorldPoint(0.3, 0), WorldPoint(1.3, 0.46), 10.0)
    for u in np.linspace(0, 1, 9):
        x, y = seg.point(u)
        assert seg.param_at_x(x) == pytest.approx(u)
        assert seg.y_at_x(x) == pytest.approx(y)


def test_lane_change_curve_is_symmetric():
    seg = build_segment(WorldPoint(0, 0), WorldPoint(1.0, 0.46), 10.0)
    assert seg.y_at_x(0.5) == pytest.approx(0.23)
    assert seg.y_at_x(0.25) + seg.y_at_x(0.75) == pytest.approx(0.46)


def test_backward_move_must_still_advance():
    # a backward cell move over one cycle covers v_F*T_F - d_F = 0.5 m
    plan = PathPlan(0, [(0, 0), (0, -1)])
    sched = build_schedule([plan], SPEC)
    assert sched.segments[0][0].dx == pytest.approx(0.5)
    with pytest.raises(NonMonotonic):
        build_segment(WorldPoint(1, 0), WorldPoint(1, 0.46), 10.0)


def test_schedule_pads_and_trims():
    a = PathPlan(0, [(0, 0), (1, 0), (1, 0)])      # trailing wait is dropped
    b = PathPlan(1, [(2, -1)])
    s = build_schedule([a, b], SPEC)
    assert s.n_stages == 1
    assert len(s.segments[1]) == 1 and s.segments[1][0].dx == pytest.approx(1.0)


def test_schedule_csv(tmp_path):
    s = build_schedule([PathPlan(0, [(0, 0), (0, 1)])], SPEC)
    s.to_csv(tmp_path / "s.csv")
    rows = list(csv.reader(open(tmp_path / "s.csv")))
    assert rows[0] == ["vehicle_id", "stage", "t0", "P0x", "P0y", "P1x", "P1y", "P2x", "P2y", "P3x", "P3y"]
    assert len(rows) == 2
    s.sample_csv(tmp_path / "n.csv", rate_hz=1.0)
    assert len(list(csv.reader(open(tmp_path / "n.csv")))) == 1 + 11


def test_gaps_at_cycle_boundaries_are_at_least_one_cell():
    plans = [PathPlan(0, [(2, 0), (1, 0), (1, 1)]), PathPlan(1, [(0, 0), (0, 0), (0, 0)])]
    assert min(formation_gaps(build_schedule(plans, SPEC))) >= min(SPEC.d_F, lane_center(1) - lane_center(0))


@settings(max_examples=100)
@given(st.floats(0.1, 3.0), st.floats(-1.0, 1.0), st.floats(0.0, 1.0))
def test_curve_stays_between_lane_centres(dx, dy, u):
    seg = build_segment(WorldPoint(0, 0), WorldPoint(dx, dy), 10.0)
    y = float(seg.point(u)[1])
    assert min(0, dy) - 1e-12 <= y <= max(0, dy) + 1e-12
