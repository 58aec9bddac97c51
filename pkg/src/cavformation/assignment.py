"""Target generation and preference-weighted vehicle-to-target assignment."""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import InfeasiblePreferences, InfeasibleTargets
from .grid import FormationSpec, GridMap, RelPoint, lane_column

DEFAULT_M = 1e6


class Label(str, Enum):
    L = "L"  # turning left
    S = "S"  # going straight
    R = "R"  # turning right

    def lane(self, width: int) -> int:
        """Lane a label maps to: L is the leftmost lane, R lane 0, S the middle."""
        if self is Label.R:
            return 0
        if self is Label.L:
            return width - 1
        return width // 2


@dataclass(frozen=True)
class LanePreference:
    vehicle_id: int
    preferred_lane: Optional[int] = None
    label: Optional[Label] = None
    # pin to the front-most target of the preferred lane (emergency exit)
    front_most: bool = False

    @classmethod
    def from_label(cls, vehicle_id: int, label, width: int = 3) -> "LanePreference":
        label = Label(label)
        return cls(vehicle_id, label.lane(width), label)


@dataclass
class AssignmentProblem:
    cost: np.ndarray
    preference: np.ndarray
    M: float = DEFAULT_M

    def __post_init__(self):
        self.cost = np.asarray(self.cost, dtype=float)
        self.preference = np.asarray(self.preference, dtype=float)
        n = self.cost.shape[0]
        if n < 1 or self.cost.shape != (n, n) or self.preference.shape != (n, n):
            raise ValueError("cost and preference must be square matrices of equal size")
        if (self.cost < 0).any():
            raise ValueError("costs must be nonnegative")
        if not np.isin(self.preference, (1.0, self.M)).all():
            raise ValueError("preference entries must be 1 or M")
        check_penalty(self.M, self.cost)

    @property
    def weights(self) -> np.ndarray:
        """Cost of allowed pairs; forbidden pairs cost ``M`` on top.

        A plain product ``c * p`` would let a zero-cost pair (vehicle already
        on the cell) through for free even when the pair is forbidden.
        """
        return np.where(self.preference == 1.0, self.cost, self.M + self.cost)


@dataclass(frozen=True)
class Assignment:
    target_of: tuple
    total: float

    def matrix(self) -> np.ndarray:
        n = len(self.target_of)
        a = np.zeros((n, n), dtype=int)
        a[np.arange(n), list(self.target_of)] = 1
        return a


def check_penalty(M: float, cost) -> None:
    cost = np.asarray(cost, dtype=float)
    n = cost.shape[0]
    if not M > n * max(float(cost.max(initial=0.0)), 1.0):
        raise ValueError(f"penalty M={M} must exceed N*max(c) = {n * cost.max()}")


def _distribute(prefs: Sequence[LanePreference], lanes: Sequence[int]) -> dict[int, int]:
    counts = {lane: 0 for lane in lanes}
    free = 0
    for p in prefs:
        if p.preferred_lane is None:
            free += 1
        else:
            counts[p.preferred_lane] += 1
    # unpreferred vehicles go to the emptiest lane, lowest index on ties
    for _ in range(free):
        lane = min(lanes, key=lambda l: (counts[l], l))
        counts[lane] += 1
    return counts


def generate_targets(prefs: Sequence[LanePreference], g: GridMap, front_row: int = 0,
                     spec: Optional[FormationSpec] = None) -> list[RelPoint]:
    """One target per vehicle, interlaced on each lane from ``front_row`` backward.

    Lanes hold as many targets as vehicles preferring them; vehicles without a
    preference fill the drivable lanes evenly. Targets come back front-to-back,
    left-to-right.
    """
    lanes = g.drivable_lanes()
    if not lanes:
        raise InfeasibleTargets("no drivable lane")
    for p in prefs:
        if p.preferred_lane is not None and p.preferred_lane not in lanes:
            raise InfeasibleTargets(f"vehicle {p.vehicle_id} prefers undrivable lane {p.preferred_lane}")
    counts = _distribute(prefs, lanes)
    targets = []
    for lane, k in counts.items():
        targets.extend(lane_column(lane, k, front_row))
    targets.sort(key=lambda c: (-c.row, -c.lane))
    return targets


def build_cost_matrix(starts: Sequence[RelPoint], targets: Sequence[RelPoint]) -> np.ndarray:
    """Manhattan distance in cells: the fewest moves from each start to each target."""
    if len(starts) != len(targets):
        raise ValueError("need as many targets as starts")
    s = np.asarray(starts, dtype=float).reshape(-1, 2)
    t = np.asarray(targets, dtype=float).reshape(-1, 2)
    return np.abs(s[:, None, :] - t[None, :, :]).sum(axis=2)


def build_preference_matrix(prefs: Sequence[LanePreference], targets: Sequence[RelPoint],
                            M: float = DEFAULT_M) -> np.ndarray:
    n = len(targets)
    P = np.full((len(prefs), n), M, dtype=float)
    front = {}
    for j, t in enumerate(targets):
        if t.lane not in front or t.row > targets[front[t.lane]].row:
            front[t.lane] = j
    for i, p in enumerate(prefs):
        if p.preferred_lane is None:
            P[i, :] = 1.0
        elif p.front_most:
            j = front.get(p.preferred_lane)
            if j is not None:
                P[i, j] = 1.0
        else:
            for j, t in enumerate(targets):
                if t.lane == p.preferred_lane:
                    P[i, j] = 1.0
    return P


def hungarian(weights) -> tuple[list[int], float]:
    """Minimum-weight perfect matching on a square matrix, O(n^3).

    Returns the column assigned to each row and the total weight.
    """
    w = np.asarray(weights, dtype=float)
    n = w.shape[0]
    if w.shape != (n, n):
        raise ValueError("weights must be square")
    rows, cols = linear_sum_assignment(w)
    return [int(c) for c in cols], float(w[rows, cols].sum())


def solve_assignment(prob: AssignmentProblem) -> Assignment:
    """Bijection of least total weight (see ``AssignmentProblem.weights``).

    Raises InfeasiblePreferences when every bijection uses a penalised pair.
    """
    target_of, total = hungarian(prob.weights)
    if total >= prob.M:
        raise InfeasiblePreferences(f"no assignment honours every preference (best total {total:g})")
    return Assignment(tuple(target_of), total)


def squared_displacement(starts: Sequence[RelPoint], targets: Sequence[RelPoint]) -> np.ndarray:
    s = np.asarray(starts, dtype=float).reshape(-1, 2)
    t = np.asarray(targets, dtype=float).reshape(-1, 2)
    return ((s[:, None, :] - t[None, :, :]) ** 2).sum(axis=2)


def solve_with_tiebreak(prob: AssignmentProblem, secondary) -> Assignment:
    """Minimum-weight assignment; among ties, the smallest ``secondary`` total.

    The secondary matrix is scaled so that its whole sum stays below one,
    which cannot override a difference in the integer primary costs.
    """
    S = np.asarray(secondary, dtype=float)
    n = S.shape[0]
    eps = 1.0 / (n * max(float(S.max(initial=0.0)), 1.0) + 1.0)
    target_of, _ = hungarian(prob.weights + eps * S)
    total = float(sum(prob.weights[i, j] for i, j in enumerate(target_of)))
    if total >= prob.M:
        raise InfeasiblePreferences(f"no assignment honours every preference (best total {total:g})")
    return Assignment(tuple(target_of), total)


def assign(starts: Sequence[RelPoint], targets: Sequence[RelPoint],
           prefs: Sequence[LanePreference], M: float = DEFAULT_M) -> list[RelPoint]:
    """Goal cell for each vehicle, in ``starts`` order.

    Ties in Manhattan cost go to the smallest squared displacement, which
    keeps vehicles sharing a lane in their current order.
    """
    C = build_cost_matrix(starts, targets)
    P = build_preference_matrix(prefs, targets, M)
    sol = solve_with_tiebreak(AssignmentProblem(C, P, M), squared_displacement(starts, targets))
    return [targets[j] for j in sol.target_of]
