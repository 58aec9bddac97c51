import math

import numpy as np
import pytest

from cavformation.errors import OffTrack, SimFailure
from cavformation.grid import FormationSpec, PathPlan
from cavformation.simulator import (ControllerConfig, LongitudinalRef, SimTrace, VehicleState,
                                    hold_speed, lateral_control, longitudinal_control, run_simulation,
                                    step_vehicle)
from cavformation.trajectory import WorldPoint, build_schedule, build_segment

SPEC = FormationSpec()
CFG = ControllerConfig()


def test_straight_step():
    s = step_vehicle(VehicleState(0, 0, 0.1, 0.5), 0.0, 0.0, 0.01)
    assert s.x == pytest.approx(0.5 * 0.01 * math.cos(0.1))
    assert s.heading == 0.1


def test_stationary_vehicle_only_accelerates():
    s = step_vehicle(VehicleState(1, 2, 0.3, 0.0), 0.4, 0.2, 0.1)
    assert (s.x, s.y, s.heading) == (1, 2, 0.3) and s.speed == pytest.approx(0.02)


def test_speed_never_negative_and_inputs_clamped():
    s = step_vehicle(VehicleState(0, 0, 0, 0.01), 5.0, -10.0, 0.1, steer_limit=0.6, accel_limit=0.5)
    assert s.speed == 0.0
    assert s.heading == pytest.approx(0.01 / 0.12 * math.tan(0.6) * 0.1)


def test_constant_steering_traces_circle():
    delta, v, L, dt = 0.3, 0.2, 0.12, 1e-3
    R = L / math.tan(delta)
    s = VehicleState(0, 0, 0, v, L)
    T = 2.0
    for _ in range(int(T / dt)):
        s = step_vehicle(s, delta, 0.0, dt)
    phi = v * T / R
    ref = (R * math.sin(phi), R * (1 - math.cos(phi)))
    err = math.hypot(s.x - ref[0], s.y - ref[1]) / (R * phi)
    assert err < 1e-3


def test_dt_must_be_positive():
    with pytest.raises(ValueError):
        step_vehicle(VehicleState(0, 0), 0, 0, 0)


def test_gains_validated():
    with pytest.raises(ValueError):
        ControllerConfig(kp=math.inf)
    with pytest.raises(ValueError):
        ControllerConfig(preview=0)


STRAIGHT = build_segment(WorldPoint(0, 0.23), WorldPoint(1.0, 0.23), 10.0)


def test_zero_error_zero_steering():
    assert lateral_control(VehicleState(0.2, 0.23, 0, 0.1), STRAIGHT, CFG) == 0.0


@pytest.mark.parametrize("offset", [0.05, -0.05])
def test_steering_opposes_offset(offset):
    d = lateral_control(VehicleState(0.2, 0.23 + offset, 0, 0.1), STRAIGHT, CFG)
    assert np.sign(d) == -np.sign(offset)


def test_off_track_raises():
    with pytest.raises(OffTrack):
        lateral_control(VehicleState(0.2, 2.0, 0, 0.1), STRAIGHT, CFG, lane_width=0.46)


def test_longitudinal_on_schedule_is_zero():
    ref = LongitudinalRef(0.0, STRAIGHT.length, 10.0)
    s = VehicleState(0.5, 0.23, 0, 0.1)
    assert longitudinal_control(s, STRAIGHT, 5.0, CFG, ref) == pytest.approx(0.0, abs=1e-12)


def test_longitudinal_behind_schedule():
    ref = LongitudinalRef(0.0, STRAIGHT.length, 10.0)
    s = VehicleState(0.4, 0.23, 0, 0.1)
    assert longitudinal_control(s, STRAIGHT, 5.0, CFG, ref) == pytest.approx(0.1 * CFG.k_s)


def test_barrier_wait_returns_to_formation_speed():
    s = VehicleState(0, 0, 0, 0.05)
    for _ in range(2000):
        s = step_vehicle(s, 0.0, hold_speed(s, SPEC.v_F, CFG), 0.01)
    assert s.speed == pytest.approx(SPEC.v_F, abs=1e-4)


def test_all_stay_advects_at_formation_speed():
    sched = build_schedule([PathPlan(0, [(1, 0), (1, 1), (1, 2)])], SPEC)
    tr = run_simulation(sched, CFG)
    x0 = sched.start_point(0).x
    K = sched.n_stages
    assert tr.final_positions()[0, 0] - x0 == pytest.approx(K * SPEC.v_F * SPEC.T_F + 2 * SPEC.d_F, rel=0.01)


def test_straight_tracking_is_exact():
    plans = [PathPlan(0, [(0, 0)]), PathPlan(1, [(2, -2)])]
    sched = build_schedule(plans, SPEC, stages=2)
    tr = run_simulation(sched, CFG)
    x0 = sched.start_point(0).x
    assert tr.final_positions()[0, 0] - x0 == pytest.approx(2 * SPEC.v_F * SPEC.T_F, rel=0.01)
    assert tr.max_lateral_error < 1e-6


def test_single_lane_change_tracking_error():
    sched = build_schedule([PathPlan(0, [(0, 0), (1, 0)])], SPEC)
    tr = run_simulation(sched, CFG)
    assert tr.max_lateral_error < 0.05
    assert tr.stage_releases == pytest.approx([10.0])


def test_trace_shapes_and_barrier():
    plans = [PathPlan(0, [(2, 0), (1, 0), (1, 1)]), PathPlan(1, [(0, 0), (0, 1), (0, 1)])]
    sched = build_schedule(plans, SPEC)
    tr = run_simulation(sched, CFG)
    T = len(tr.times)
    assert tr.states.shape == (2, T, 4)
    assert np.allclose(np.diff(tr.times), tr.dt)
    assert tr.stage_releases == sorted(tr.stage_releases)
    # nobody runs ahead: stage indices always agree
    assert (tr.stages[0] == tr.stages[1]).all()


def test_collision_is_reported():
    a = PathPlan(0, [(0, 0), (0, 0)])
    b = PathPlan(1, [(1, 0), (1, 0)])
    sched = build_schedule([a, b], SPEC, lane_width=0.2, stages=1)   # lanes closer than d_F / 2
    with pytest.raises(SimFailure) as err:
        run_simulation(sched, CFG)
    assert isinstance(err.value.trace, SimTrace) and not err.value.trace.finished
    tr = run_simulation(sched, CFG, raise_on_failure=False)
    assert tr.failure and "collision" in tr.failure


def test_trace_csv(tmp_path):
    sched = build_schedule([PathPlan(0, [(0, 0), (0, 1)])], SPEC)
    tr = run_simulation(sched, CFG, dt=0.1)
    tr.to_csv(tmp_path / "t.csv")
    lines = open(tmp_path / "t.csv").read().splitlines()
    assert lines[0] == "t,vehicle_id,x,y,heading,speed,stage"
    assert len(lines) == 1 + len(tr.times)
