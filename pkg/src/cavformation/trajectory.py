"""Projection of grid plans to the road frame and cubic Bezier segments."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .errors import NonMonotonic
from .grid import FormationSpec, PathPlan, RelPoint, pad_plans

DEFAULT_LANE_WIDTH = 0.46


class WorldPoint(NamedTuple):
    x: float
    y: float


def lane_center(lane: int, lane_width: float = DEFAULT_LANE_WIDTH) -> float:
    return (lane + 0.5) * lane_width


def project_point(p: RelPoint, cycle: int, spec: FormationSpec, origin_x: float = 0.0,
                  lane_width: float = DEFAULT_LANE_WIDTH) -> WorldPoint:
    """Road-frame position of cell ``p`` at ``cycle``; the grid travels at ``v_F``."""
    x = origin_x + spec.v_F * cycle * spec.T_F + p.row * spec.d_F
    return WorldPoint(x, lane_center(p.lane, lane_width))


def unproject(w: WorldPoint, cycle: int, spec: FormationSpec, origin_x: float = 0.0,
              lane_width: float = DEFAULT_LANE_WIDTH) -> RelPoint:
    """Nearest grid cell to a road-frame point at ``cycle``."""
    row = round((w.x - origin_x - spec.v_F * cycle * spec.T_F) / spec.d_F)
    return RelPoint(int(np.floor(w.y / lane_width)), int(row))


@dataclass(frozen=True)
class TrajectorySegment:
    """Cubic Bezier piece driven during one synchronous cycle."""

    control: tuple  # four WorldPoints
    stage: int
    duration: float

    @property
    def start(self) -> WorldPoint:
        return self.control[0]

    @property
    def end(self) -> WorldPoint:
        return self.control[3]

    @property
    def dx(self) -> float:
        return self.control[3].x - self.control[0].x

    def point(self, u):
        """Curve point(s) at parameter ``u`` in [0, 1]."""
        u = np.asarray(u, dtype=float)
        P = np.asarray(self.control, dtype=float)
        m = 1.0 - u
        b = np.stack([m ** 3, 3 * m * m * u, 3 * m * u * u, u ** 3], axis=-1)
        return b @ P

    def derivative(self, u):
        u = np.asarray(u, dtype=float)
        P = np.asarray(self.control, dtype=float)
        m = 1.0 - u
        d = np.stack([3 * m * m, 6 * m * u, 3 * u * u], axis=-1)
        return d @ np.diff(P, axis=0)

    def second_derivative(self, u):
        u = np.asarray(u, dtype=float)
        P = np.asarray(self.control, dtype=float)
        d2 = np.diff(P, n=2, axis=0)
        return np.stack([6 * (1 - u), 6 * u], axis=-1) @ d2

    def curvature(self, u):
        d1 = self.derivative(u)
        d2 = self.second_derivative(u)
        cross = d1[..., 0] * d2[..., 1] - d1[..., 1] * d2[..., 0]
        return cross / np.hypot(d1[..., 0], d1[..., 1]) ** 3

    def param_at_x(self, x: float) -> float:
        """Curve parameter whose point has longitudinal coordinate ``x`` (unclamped).

        Exact because the inner control points sit at one and two thirds of
        the longitudinal gap, which makes x linear in the parameter.
        """
        return (x - self.control[0].x) / self.dx

    def y_at_x(self, x: float) -> float:
        """Reference lateral position at ``x``; straight lane extensions beyond the ends."""
        u = self.param_at_x(x)
        if u <= 0.0:
            return self.control[0].y
        if u >= 1.0:
            return self.control[3].y
        m = 1.0 - u
        P = self.control
        return m ** 3 * P[0].y + 3 * m * m * u * P[1].y + 3 * m * u * u * P[2].y + u ** 3 * P[3].y

    @cached_property
    def _arc_table(self):
        u = np.linspace(0.0, 1.0, 257)
        pts = self.point(u)
        seg = np.hypot(*np.diff(pts, axis=0).T)
        return u, np.concatenate([[0.0], np.cumsum(seg)])

    @property
    def length(self) -> float:
        return float(self._arc_table[1][-1])

    def arc_at_x(self, x: float) -> float:
        """Arc length travelled when the curve reaches ``x``; linear extension outside."""
        u = self.param_at_x(x)
        if u <= 0.0:
            return x - self.control[0].x
        if u >= 1.0:
            return self.length + (x - self.control[3].x)
        us, s = self._arc_table
        return float(np.interp(u, us, s))

    def sample(self, n: int = 50) -> np.ndarray:
        return self.point(np.linspace(0.0, 1.0, n))


def build_segment(a: WorldPoint, b: WorldPoint, duration: float, stage: int = 0) -> TrajectorySegment:
    """Cubic Bezier from ``a`` to ``b`` with tangents along the road at both ends."""
    a, b = WorldPoint(*a), WorldPoint(*b)
    dx = b.x - a.x
    if dx <= 0:
        raise NonMonotonic(f"segment {stage} does not advance: dx = {dx:.6g} m")
    p1 = WorldPoint(a.x + dx / 3.0, a.y)
    p2 = WorldPoint(b.x - dx / 3.0, b.y)
    return TrajectorySegment((a, p1, p2, b), stage, duration)


@dataclass(frozen=True)
class StageSchedule:
    segments: dict          # vehicle_id -> list[TrajectorySegment]
    spec: FormationSpec
    lane_width: float = DEFAULT_LANE_WIDTH
    origin_x: float = 0.0

    @property
    def vehicle_ids(self) -> list[int]:
        return sorted(self.segments)

    @property
    def n_stages(self) -> int:
        return max((len(s) for s in self.segments.values()), default=0)

    def start_point(self, vid: int) -> WorldPoint:
        return self.segments[vid][0].start

    def position(self, vid: int, t: float) -> WorldPoint:
        """Nominal position at time ``t`` (stage k occupies ``[k T_F, (k+1) T_F]``)."""
        segs = self.segments[vid]
        T = self.spec.T_F
        k = min(int(t // T), len(segs) - 1)
        u = min(max((t - k * T) / T, 0.0), 1.0)
        x, y = segs[k].point(u)
        return WorldPoint(float(x), float(y))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["vehicle_id", "stage", "t0",
                        "P0x", "P0y", "P1x", "P1y", "P2x", "P2y", "P3x", "P3y"])
            for vid in self.vehicle_ids:
                for seg in self.segments[vid]:
                    row = [vid, seg.stage, f"{seg.stage * seg.duration:.6g}"]
                    for p in seg.control:
                        row += [f"{p.x:.6f}", f"{p.y:.6f}"]
                    w.writerow(row)

    def sample_csv(self, path, rate_hz: float = 10.0) -> None:
        """Nominal trajectories sampled at ``rate_hz``: rows of (t, vehicle_id, x, y)."""
        t_end = self.n_stages * self.spec.T_F
        ts = np.arange(0.0, t_end + 1e-9, 1.0 / rate_hz)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "vehicle_id", "x", "y"])
            for t in ts:
                for vid in self.vehicle_ids:
                    p = self.position(vid, t)
                    w.writerow([f"{t:.4f}", vid, f"{p.x:.6f}", f"{p.y:.6f}"])


def build_schedule(plans: Sequence[PathPlan], spec: FormationSpec, lane_width: float = DEFAULT_LANE_WIDTH,
                   origin_x: float = 0.0, stages: int = 0) -> StageSchedule:
    """One Bezier segment per cycle per vehicle through the projected cells.

    Trailing waits are dropped, then plans are padded to a common length so
    every vehicle has the same number of stages (the makespan); a padded hold
    is a straight segment of length ``v_F * T_F``. ``stages`` asks for at
    least that many stages (cruising at the end).
    """
    plans = [p.trimmed() for p in plans]
    if plans and stages + 1 > max(len(p) for p in plans):
        plans[0] = plans[0].padded(stages + 1)
    plans = pad_plans(plans)
    segments = {}
    for plan in plans:
        pts = [project_point(c, k, spec, origin_x, lane_width) for k, c in enumerate(plan.cells)]
        segments[plan.vehicle_id] = [
            build_segment(a, b, spec.T_F, stage=k) for k, (a, b) in enumerate(zip(pts, pts[1:]))
        ]
    return StageSchedule(segments, spec, lane_width, origin_x)


def formation_gaps(schedule: StageSchedule) -> Iterable[float]:
    """Pairwise distances between nominal positions at every cycle boundary."""
    vids = schedule.vehicle_ids
    for k in range(schedule.n_stages + 1):
        pts = []
        for v in vids:
            segs = schedule.segments[v]
            pts.append(segs[k].start if k < len(segs) else segs[-1].end)
        for i in range(len(pts)):
            for j in range(i + 1, len(pts)):
                yield float(np.hypot(pts[i].x - pts[j].x, pts[i].y - pts[j].y))
