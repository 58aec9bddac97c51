"""Relative coordinate system: grid map, cells, synchronous moves and conflicts.

Lane 0 is the rightmost lane; rows grow in the driving direction.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from itertools import combinations
from typing import Iterable, Mapping, NamedTuple, Optional, Sequence

from .errors import Blocked, OutOfBounds


class RelPoint(NamedTuple):
    lane: int
    row: int

    def __str__(self) -> str:
        return f"({self.lane},{self.row})"


class Action(Enum):
    STAY = (0, 0)
    FORWARD = (0, 1)
    BACKWARD = (0, -1)
    LEFT = (1, 0)
    RIGHT = (-1, 0)

    @property
    def delta(self) -> tuple[int, int]:
        return self.value

    @classmethod
    def between(cls, a: RelPoint, b: RelPoint) -> "Action":
        """Return the action that moves ``a`` onto ``b``."""
        d = (b.lane - a.lane, b.row - a.row)
        for act in cls:
            if act.value == d:
                return act
        raise ValueError(f"{a} -> {b} is not a single move")


class Structure(str, Enum):
    INTERLACED = "interlaced"
    PARALLEL = "parallel"


@dataclass(frozen=True)
class FormationSpec:
    """Formation geometry and timing.

    ``d_F`` is the longitudinal cell size (m), ``T_F`` the duration of one
    synchronous cycle (s) and ``v_F`` the formation cruise speed (m/s).
    """

    structure: Structure = Structure.INTERLACED
    lane_count: int = 3
    d_F: float = 0.5
    T_F: float = 10.0
    v_F: float = 0.1

    def __post_init__(self):
        if self.d_F <= 0 or self.T_F <= 0 or self.v_F < 0:
            raise ValueError("need d_F > 0, T_F > 0, v_F >= 0")
        if self.lane_count < 1:
            raise ValueError("lane_count must be >= 1")


@dataclass(frozen=True)
class GridMap:
    """Bounded grid of ``width`` lanes by ``row_min..row_max`` rows.

    ``blocked`` holds ``(lane, row, cycle)`` entries; ``cycle=None`` blocks the
    cell at every cycle. ``closed_lanes`` maps a lane to the first cycle from
    which the whole lane is undrivable.
    """

    width: int
    row_min: int
    row_max: int
    blocked: frozenset = field(default_factory=frozenset)
    closed_lanes: Mapping[int, int] = field(default_factory=dict)

    def __post_init__(self):
        if self.width < 1 or self.row_min > self.row_max:
            raise ValueError(f"bad grid bounds: width={self.width} rows=[{self.row_min},{self.row_max}]")
        object.__setattr__(self, "blocked", frozenset(self.blocked))
        object.__setattr__(self, "closed_lanes", dict(self.closed_lanes))
        for lane, row, cycle in self.blocked:
            if not self.in_bounds(RelPoint(lane, row)):
                raise ValueError(f"blocked cell ({lane},{row}) outside grid")
            if cycle is not None and cycle < 0:
                raise ValueError("blocked cycle must be >= 0")
        for lane in self.closed_lanes:
            if not 0 <= lane < self.width:
                raise ValueError(f"closed lane {lane} outside grid")
        # hashing a frozen dataclass with a dict field fails; cache lookups instead
        object.__setattr__(self, "_static", frozenset((l, r) for l, r, c in self.blocked if c is None))
        object.__setattr__(self, "_timed", frozenset((l, r, c) for l, r, c in self.blocked if c is not None))

    def __hash__(self):
        return hash((self.width, self.row_min, self.row_max, self.blocked,
                     tuple(sorted(self.closed_lanes.items()))))

    @property
    def has_dynamic_blocks(self) -> bool:
        return bool(self._timed) or bool(self.closed_lanes)

    def in_bounds(self, p: RelPoint) -> bool:
        return 0 <= p[0] < self.width and self.row_min <= p[1] <= self.row_max

    def is_blocked(self, p: RelPoint, cycle: Optional[int] = None) -> bool:
        """Whether ``p`` is unavailable at ``cycle`` (``None``: at any cycle)."""
        if (p[0], p[1]) in self._static:
            return True
        if cycle is None:
            return p[0] in self.closed_lanes or any(
                (l, r) == (p[0], p[1]) for l, r, _ in self._timed)
        closed_from = self.closed_lanes.get(p[0])
        if closed_from is not None and cycle >= closed_from:
            return True
        return (p[0], p[1], cycle) in self._timed

    def free_forever_from(self, p: RelPoint, cycle: int) -> bool:
        """True if ``p`` is never blocked at ``cycle`` or later."""
        if (p[0], p[1]) in self._static or p[0] in self.closed_lanes:
            return False
        return not any(l == p[0] and r == p[1] and c >= cycle for l, r, c in self._timed)

    def drivable_lanes(self) -> list[int]:
        """Lanes that are not closed and not statically blocked along their full length."""
        rows = range(self.row_min, self.row_max + 1)
        return [
            lane for lane in range(self.width)
            if lane not in self.closed_lanes
            and not all((lane, r) in self._static for r in rows)
        ]

    def cells(self) -> Iterable[RelPoint]:
        for row in range(self.row_max, self.row_min - 1, -1):
            for lane in range(self.width):
                yield RelPoint(lane, row)

    def neighbours(self, p: RelPoint) -> list[RelPoint]:
        """Cells reachable from ``p`` in one cycle (``p`` itself included), ignoring blocks."""
        out = []
        for act in Action:
            dl, dr = act.value
            q = RelPoint(p[0] + dl, p[1] + dr)
            if self.in_bounds(q):
                out.append(q)
        return out


def grid_around(points: Iterable[RelPoint], width: int, margin: int = 0, **kw) -> GridMap:
    """Smallest grid of ``width`` lanes that holds every point, padded by ``margin`` rows."""
    rows = [p.row for p in points]
    return GridMap(width, min(rows) - margin, max(rows) + margin, **kw)


def apply_action(p: RelPoint, a: Action, g: GridMap, cycle: Optional[int] = None) -> RelPoint:
    dl, dr = a.value
    q = RelPoint(p.lane + dl, p.row + dr)
    if not g.in_bounds(q):
        raise OutOfBounds(f"{a.name} from {p} leaves the grid at {q}")
    if g.is_blocked(q, cycle):
        raise Blocked(f"{a.name} from {p} enters blocked cell {q}")
    return q


def _pattern_top(lane: int, front_row: int) -> int:
    # highest row <= front_row with (row + lane) even
    return front_row if (front_row + lane) % 2 == 0 else front_row - 1


def interlaced_cells(lane_count: int, n: int, front_row: int = 0,
                     lanes: Optional[Sequence[int]] = None) -> list[RelPoint]:
    """First ``n`` cells of the interlaced pattern, front-to-back and left-to-right.

    A cell belongs to the pattern iff ``(row + lane)`` is even. ``lanes``
    restricts the pattern to a subset of lanes (default: all ``lane_count``).
    """
    if lane_count < 1 or n < 1:
        raise ValueError("lane_count and n must be >= 1")
    lanes = sorted(range(lane_count) if lanes is None else lanes, reverse=True)
    out: list[RelPoint] = []
    row = front_row
    while len(out) < n:
        for lane in lanes:
            if (row + lane) % 2 == 0:
                out.append(RelPoint(lane, row))
                if len(out) == n:
                    break
        row -= 1
    return out


def parallel_cells(lane_count: int, n: int, front_row: int = 0,
                   lanes: Optional[Sequence[int]] = None) -> list[RelPoint]:
    """Side-by-side structure: every lane filled in each row, spaced two rows apart."""
    lanes = sorted(range(lane_count) if lanes is None else lanes, reverse=True)
    out: list[RelPoint] = []
    row = front_row
    while len(out) < n:
        for lane in lanes:
            out.append(RelPoint(lane, row))
            if len(out) == n:
                break
        row -= 2
    return out


def lane_column(lane: int, n: int, front_row: int = 0) -> list[RelPoint]:
    """``n`` parity-consistent cells stacked on one lane, front to back."""
    top = _pattern_top(lane, front_row)
    return [RelPoint(lane, top - 2 * k) for k in range(n)]


@dataclass(frozen=True)
class PathPlan:
    vehicle_id: int
    cells: tuple

    def __post_init__(self):
        object.__setattr__(self, "cells", tuple(RelPoint(*c) for c in self.cells))
        if not self.cells:
            raise ValueError("a plan needs at least its start cell")

    def __len__(self):
        return len(self.cells)

    @property
    def start(self) -> RelPoint:
        return self.cells[0]

    @property
    def target(self) -> RelPoint:
        return self.cells[-1]

    def at(self, k: int) -> RelPoint:
        """Cell at cycle ``k``; a vehicle holds its target after the plan ends."""
        return self.cells[k] if k < len(self.cells) else self.cells[-1]

    def actions(self) -> list[Action]:
        return [Action.between(a, b) for a, b in zip(self.cells, self.cells[1:])]

    @property
    def arrival(self) -> int:
        """Cycle of the final arrival at the target (terminal waits excluded)."""
        k = len(self.cells) - 1
        while k > 0 and self.cells[k - 1] == self.cells[-1]:
            k -= 1
        return k

    def padded(self, length: int) -> "PathPlan":
        if length < len(self.cells):
            raise ValueError("cannot pad below current length")
        return PathPlan(self.vehicle_id, self.cells + (self.cells[-1],) * (length - len(self.cells)))

    def trimmed(self) -> "PathPlan":
        return PathPlan(self.vehicle_id, self.cells[: self.arrival + 1])

    def check(self, g: GridMap) -> None:
        """Raise if the plan leaves the grid, hits a block or makes an illegal move."""
        for k, c in enumerate(self.cells):
            if not g.in_bounds(c):
                raise OutOfBounds(f"vehicle {self.vehicle_id} at {c} (cycle {k})")
            if k > 0 and g.is_blocked(c, k):
                raise Blocked(f"vehicle {self.vehicle_id} at {c} (cycle {k})")
        self.actions()


def pad_plans(plans: Sequence[PathPlan]) -> list[PathPlan]:
    n = max(len(p) for p in plans)
    return [p.padded(n) for p in plans]


class ConflictKind(str, Enum):
    VERTEX = "vertex"
    EDGE = "edge"


@dataclass(frozen=True)
class Conflict:
    """Two vehicles meeting in a cell (vertex) or swapping cells (edge).

    ``cycle`` is the arrival cycle of the clash: for a vertex conflict the
    shared cell is ``cells[0]``; for an edge conflict vehicle ``a`` moves
    ``cells[0] -> cells[1]`` between ``cycle - 1`` and ``cycle``.
    """

    a: int
    b: int
    kind: ConflictKind
    cycle: int
    cells: tuple

    @property
    def vehicles(self) -> frozenset:
        return frozenset((self.a, self.b))

    def sort_key(self):
        return (self.cycle, 0 if self.kind is ConflictKind.VERTEX else 1, min(self.a, self.b), max(self.a, self.b))


def _conflicts_between(p: PathPlan, q: PathPlan, horizon: int):
    for k in range(horizon):
        a, b = p.at(k), q.at(k)
        if a == b:
            yield Conflict(p.vehicle_id, q.vehicle_id, ConflictKind.VERTEX, k, (a,))
        if k + 1 < horizon:
            a2, b2 = p.at(k + 1), q.at(k + 1)
            if a2 == b and b2 == a and a != b:
                yield Conflict(p.vehicle_id, q.vehicle_id, ConflictKind.EDGE, k + 1, (a, a2))


def validate_plan_set(plans: Sequence[PathPlan], g: Optional[GridMap] = None) -> list[Conflict]:
    """Every vertex and edge conflict in a synchronous plan set, ordered by cycle.

    Shorter plans are treated as parked on their target. When ``g`` is given,
    each plan is also checked against the grid (raising on violations).
    """
    if not plans:
        return []
    if g is not None:
        for p in plans:
            p.check(g)
    horizon = max(len(p) for p in plans)
    ordered = sorted(plans, key=lambda p: p.vehicle_id)
    found = []
    for p, q in combinations(ordered, 2):
        found.extend(_conflicts_between(p, q, horizon))
    found.sort(key=Conflict.sort_key)
    return found


def count_conflicts(plans: Sequence[PathPlan]) -> int:
    """Number of conflicting vehicle pairs-by-cycle, via a per-cycle occupancy scan."""
    if not plans:
        return 0
    horizon = max(len(p) for p in plans)
    total = 0
    for k in range(horizon):
        seen: dict = {}
        for p in plans:
            c = p.at(k)
            total += seen.get(c, 0)
            seen[c] = seen.get(c, 0) + 1
        if k + 1 < horizon:
            moves = {}
            for p in plans:
                a, b = p.at(k), p.at(k + 1)
                if a != b:
                    moves[(a, b)] = moves.get((a, b), 0) + 1
            for (a, b), m in moves.items():
                total += m * moves.get((b, a), 0) if (a < b) else 0
    return total


def first_conflict(plans: Sequence[PathPlan]) -> Optional[Conflict]:
    """Earliest conflict: lower cycle first, vertex before edge, then lowest id pair."""
    if len(plans) < 2:
        return None
    horizon = max(len(p) for p in plans)
    ordered = sorted(plans, key=lambda p: p.vehicle_id)
    for k in range(horizon):
        # vertex conflicts at cycle k
        best = None
        seen: dict = {}
        for p in ordered:
            c = p.at(k)
            if c in seen:
                cand = Conflict(seen[c], p.vehicle_id, ConflictKind.VERTEX, k, (c,))
                if best is None or cand.sort_key() < best.sort_key():
                    best = cand
            else:
                seen[c] = p.vehicle_id
        if best is not None:
            return best
        if k == 0:
            continue
        moves = {}
        for p in ordered:
            a, b = p.at(k - 1), p.at(k)
            if a != b:
                moves[(a, b)] = p.vehicle_id
        for (a, b), vid in moves.items():
            other = moves.get((b, a))
            if other is not None and vid < other:
                cand = Conflict(vid, other, ConflictKind.EDGE, k, (a, b))
                if best is None or cand.sort_key() < best.sort_key():
                    best = cand
        if best is not None:
            return best
    return None
