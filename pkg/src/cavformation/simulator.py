"""Closed-loop kinematic simulation of a formation tracking its stage schedule.

Each vehicle is a kinematic bicycle. Steering comes from a PID on the lateral
offset of a preview point, speed from linear feedback on arc-length progress.
A stage ends for a vehicle once it reaches its segment end; the next stage
starts for everyone only when all vehicles are done, and early finishers
cruise at the formation speed meanwhile.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import OffTrack, SimFailure
from .trajectory import StageSchedule, TrajectorySegment


@dataclass(frozen=True)
class VehicleState:
    x: float
    y: float
    heading: float = 0.0
    speed: float = 0.0
    wheelbase: float = 0.12


@dataclass(frozen=True)
class ControllerConfig:
    kp: float = 10.0
    ki: float = 0.2
    kd: float = 0.5
    preview: float = 0.12
    k_s: float = 0.8
    k_v: float = 1.5
    steer_limit: float = 0.6
    accel_limit: float = 0.5
    wheelbase: float = 0.12
    stage_tol: float = 0.02
    # lateral offset that counts as leaving the lane, in lane widths
    offtrack_lanes: float = 2.0

    def __post_init__(self):
        vals = (self.kp, self.ki, self.kd, self.k_s, self.k_v)
        if not all(math.isfinite(v) for v in vals):
            raise ValueError("controller gains must be finite")
        if self.preview <= 0 or self.steer_limit <= 0 or self.accel_limit <= 0:
            raise ValueError("preview distance and limits must be positive")


def _clamp(v: float, lim: float) -> float:
    return max(-lim, min(lim, v))


def step_vehicle(s: VehicleState, steering: float, accel: float, dt: float,
                 steer_limit: float = math.inf, accel_limit: float = math.inf) -> VehicleState:
    """Forward-Euler step of the kinematic bicycle; speed is kept nonnegative."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    steering = _clamp(steering, steer_limit)
    accel = _clamp(accel, accel_limit)
    v = s.speed
    x = s.x + v * math.cos(s.heading) * dt
    y = s.y + v * math.sin(s.heading) * dt
    heading = s.heading + v / s.wheelbase * math.tan(steering) * dt
    speed = max(0.0, v + accel * dt)
    return VehicleState(x, y, heading, speed, s.wheelbase)


@dataclass
class LateralPID:
    """PID on the lateral error of the preview point, reset at each stage."""

    cfg: ControllerConfig
    integral: float = 0.0
    prev_error: Optional[float] = None

    def reset(self) -> None:
        self.integral = 0.0
        self.prev_error = None

    def __call__(self, s: VehicleState, segment: TrajectorySegment, dt: float,
                 lane_width: float = math.inf) -> float:
        return lateral_control(s, segment, self.cfg, self, dt, lane_width)


def lateral_error(s: VehicleState, segment: TrajectorySegment) -> float:
    """Signed offset of the vehicle from the reference (positive: reference to the left)."""
    return segment.y_at_x(s.x) - s.y


def lateral_control(s: VehicleState, segment: TrajectorySegment, cfg: ControllerConfig,
                    state: Optional[LateralPID] = None, dt: float = 0.01,
                    lane_width: float = math.inf) -> float:
    """Steering angle from the preview point's offset to the reference curve.

    The preview point lies ``cfg.preview`` ahead along the heading; its
    error is measured against the curve at the same road coordinate.
    Raises OffTrack outside the capture basin.
    """
    if abs(lateral_error(s, segment)) > cfg.offtrack_lanes * lane_width:
        raise OffTrack(f"lateral error {lateral_error(s, segment):.3f} m at x={s.x:.3f}")
    px = s.x + cfg.preview * math.cos(s.heading)
    py = s.y + cfg.preview * math.sin(s.heading)
    e = segment.y_at_x(px) - py
    de = 0.0
    if state is not None:
        if state.prev_error is not None:
            de = (e - state.prev_error) / dt
        state.integral += e * dt
        state.prev_error = e
        integral = state.integral
    else:
        integral = 0.0
    return _clamp(cfg.kp * e + cfg.ki * integral + cfg.kd * de, cfg.steer_limit)


@dataclass
class LongitudinalRef:
    """Uniform arc-length reference over one stage, anchored at the stage start."""

    s0: float
    length: float
    duration: float

    def s_ref(self, t: float) -> float:
        u = min(max(t / self.duration, 0.0), 1.0)
        return self.s0 + (self.length - self.s0) * u

    def v_ref(self, t: float) -> float:
        return (self.length - self.s0) / self.duration if t < self.duration else 0.0


def longitudinal_control(s: VehicleState, segment: TrajectorySegment, t_in_stage: float,
                         cfg: ControllerConfig, ref: Optional[LongitudinalRef] = None) -> float:
    """Acceleration from progress and speed errors against the stage reference."""
    if ref is None:
        ref = LongitudinalRef(0.0, segment.length, segment.duration)
    s_act = segment.arc_at_x(s.x)
    a = cfg.k_s * (ref.s_ref(t_in_stage) - s_act) + cfg.k_v * (ref.v_ref(t_in_stage) - s.speed)
    return _clamp(a, cfg.accel_limit)


def hold_speed(s: VehicleState, v_target: float, cfg: ControllerConfig) -> float:
    """Acceleration that brings the vehicle back to ``v_target`` (barrier wait)."""
    return _clamp(cfg.k_v * (v_target - s.speed), cfg.accel_limit)


@dataclass
class SimTrace:
    dt: float
    vehicle_ids: list
    times: np.ndarray                 # (T,)
    states: np.ndarray                # (V, T, 4): x, y, heading, speed
    stages: np.ndarray                # (V, T) stage index each vehicle is tracking
    stage_releases: list              # barrier release times, one per stage
    min_distance: float
    max_lateral_error: float
    finished: bool = True
    failure: Optional[str] = None
    lateral_errors: Optional[np.ndarray] = None   # (V, T)

    def final_positions(self) -> np.ndarray:
        return self.states[:, -1, :2].copy()

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "vehicle_id", "x", "y", "heading", "speed", "stage"])
            for k, t in enumerate(self.times):
                for i, vid in enumerate(self.vehicle_ids):
                    x, y, h, v = self.states[i, k]
                    w.writerow([f"{t:.3f}", vid, f"{x:.6f}", f"{y:.6f}", f"{h:.6f}", f"{v:.6f}",
                                int(self.stages[i, k])])


def _min_pair_distance(xy: np.ndarray) -> float:
    if len(xy) < 2:
        return math.inf
    d = np.hypot(xy[:, None, 0] - xy[None, :, 0], xy[:, None, 1] - xy[None, :, 1])
    iu = np.triu_indices(len(xy), 1)
    return float(d[iu].min())


def run_simulation(schedule: StageSchedule, cfg: ControllerConfig = ControllerConfig(), dt: float = 0.01,
                   collision_distance: Optional[float] = None, max_stage_factor: float = 3.0,
                   initial_states: Optional[dict] = None, raise_on_failure: bool = True) -> SimTrace:
    """Drive every vehicle through its segments with the synchronous stage barrier.

    ``collision_distance`` defaults to half the grid cell. Raises SimFailure
    (carrying the partial trace) on a collision, an OffTrack excursion or a
    stage that overruns ``max_stage_factor`` times its duration.
    """
    spec = schedule.spec
    if collision_distance is None:
        collision_distance = spec.d_F / 2.0
    vids = schedule.vehicle_ids
    n_stages = schedule.n_stages
    lane_width = schedule.lane_width

    states = {}
    for vid in vids:
        if initial_states and vid in initial_states:
            states[vid] = initial_states[vid]
        else:
            if n_stages:
                p = schedule.start_point(vid)
            else:
                p = (0.0, 0.0)
            states[vid] = VehicleState(p[0], p[1], 0.0, spec.v_F, cfg.wheelbase)

    pids = {vid: LateralPID(cfg) for vid in vids}
    hist_t = [0.0]
    hist = {vid: [(states[vid].x, states[vid].y, states[vid].heading, states[vid].speed)] for vid in vids}
    hist_stage = {vid: [0] for vid in vids}
    hist_err = {vid: [0.0] for vid in vids}
    releases: list = []
    min_d = _min_pair_distance(np.array([[states[v].x, states[v].y] for v in vids]))
    max_err = 0.0
    tick = 0
    failure = None
    if min_d < collision_distance:
        failure = f"collision at start: distance {min_d:.3f} m < {collision_distance:.3f} m"
        n_stages = 0

    for stage in range(n_stages):
        segs = {vid: schedule.segments[vid][stage] for vid in vids}
        refs = {}
        for vid in vids:
            seg = segs[vid]
            s0 = min(seg.arc_at_x(states[vid].x), seg.length)
            refs[vid] = LongitudinalRef(s0, seg.length, seg.duration)
            pids[vid].reset()
        done = {vid: False for vid in vids}
        stage_tick = 0
        max_ticks = int(math.ceil(max_stage_factor * spec.T_F / dt))
        while not all(done.values()):
            if stage_tick > max_ticks:
                failure = f"stage {stage} did not complete within {max_stage_factor:g} x T_F"
                break
            t_in = stage_tick * dt
            new = {}
            try:
                for vid in vids:
                    s, seg = states[vid], segs[vid]
                    delta = pids[vid](s, seg, dt, lane_width)
                    if done[vid]:
                        acc = hold_speed(s, spec.v_F, cfg)
                    else:
                        acc = longitudinal_control(s, seg, t_in, cfg, refs[vid])
                    new[vid] = step_vehicle(s, delta, acc, dt, cfg.steer_limit, cfg.accel_limit)
            except OffTrack as exc:
                failure = f"vehicle {vid} off track in stage {stage}: {exc}"
                break
            states = new
            tick += 1
            stage_tick += 1
            t_in = stage_tick * dt
            for vid in vids:
                s, seg = states[vid], segs[vid]
                if not done[vid]:
                    gap = math.hypot(s.x - seg.end.x, s.y - seg.end.y)
                    on_time = t_in >= seg.duration - 1e-9
                    if (on_time and gap <= cfg.stage_tol) or s.x >= seg.end.x:
                        done[vid] = True
                err = abs(lateral_error(s, seg))
                max_err = max(max_err, err)
                hist[vid].append((s.x, s.y, s.heading, s.speed))
                hist_stage[vid].append(stage)
                hist_err[vid].append(err)
            hist_t.append(tick * dt)
            d = _min_pair_distance(np.array([[states[v].x, states[v].y] for v in vids]))
            min_d = min(min_d, d)
            if d < collision_distance:
                failure = f"collision in stage {stage}: distance {d:.3f} m < {collision_distance:.3f} m"
                break
        if failure:
            break
        releases.append(tick * dt)

    trace = SimTrace(
        dt=dt,
        vehicle_ids=list(vids),
        times=np.array(hist_t),
        states=np.array([hist[v] for v in vids]).reshape(len(vids), len(hist_t), 4),
        stages=np.array([hist_stage[v] for v in vids]),
        stage_releases=releases,
        min_distance=min_d,
        max_lateral_error=max_err,
        finished=failure is None,
        failure=failure,
        lateral_errors=np.array([hist_err[v] for v in vids]),
    )
    if failure and raise_on_failure:
        raise SimFailure(failure, trace)
    return trace


def final_cells(trace: SimTrace, schedule: StageSchedule) -> dict:
    """Grid cell each vehicle ends in, by back-projection at the final stage."""
    from .trajectory import WorldPoint, unproject

    out = {}
    k = schedule.n_stages
    for i, vid in enumerate(trace.vehicle_ids):
        x, y = trace.states[i, -1, :2]
        out[vid] = unproject(WorldPoint(float(x), float(y)), k, schedule.spec,
                             schedule.origin_x, schedule.lane_width)
    return out
