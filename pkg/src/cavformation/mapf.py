"""Synchronous multi-vehicle path planning on the relative grid.

Three planners share one space-time A* core:

* :func:`astar_single` - one vehicle under CBS-style constraints.
* :func:`plan_priority_astar` - front vehicles first, earlier paths become
  moving obstacles (the benchmark baseline).
* :func:`plan_cbs` - Conflict-Based Search with a wall-clock bound. Every
  expansion also tries a greedy priority completion under the node's
  constraints so that a feasible incumbent can be returned on timeout.

Costs follow the usual MAPF convention: a vehicle pays one per cycle until
its final arrival at the target; waiting there afterwards is free.
"""
from __future__ import annotations

import heapq
import itertools
import math
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Optional, Sequence

from .errors import NoPath
from .grid import (Conflict, ConflictKind, GridMap, PathPlan, RelPoint, count_conflicts,
                   first_conflict, validate_plan_set)

_MOVES = ((0, 0), (0, 1), (0, -1), (1, 0), (-1, 0))


@dataclass(frozen=True)
class Constraint:
    """Forbids ``vehicle_id`` from a cell (vertex) or a move (edge) at ``cycle``.

    For an edge constraint the vehicle may not move ``cells[0] -> cells[1]``
    arriving at ``cycle``.
    """

    vehicle_id: int
    kind: ConflictKind
    cycle: int
    cells: tuple

    @classmethod
    def vertex(cls, vid: int, cell, cycle: int) -> "Constraint":
        return cls(vid, ConflictKind.VERTEX, cycle, (RelPoint(*cell),))

    @classmethod
    def edge(cls, vid: int, a, b, cycle: int) -> "Constraint":
        return cls(vid, ConflictKind.EDGE, cycle, (RelPoint(*a), RelPoint(*b)))


class Status(str, Enum):
    SOLVED = "Solved"
    SOLVED_INCUMBENT = "SolvedIncumbent"
    NO_SOLUTION = "NoSolution"
    TIMEOUT = "Timeout"

    @property
    def ok(self) -> bool:
        return self in (Status.SOLVED, Status.SOLVED_INCUMBENT)


@dataclass
class PlanResult:
    status: Status
    plans: Optional[list] = None
    makespan: int = 0
    sum_of_costs: int = 0
    wall_time: float = 0.0
    expanded: int = 0
    snapshots: dict = field(default_factory=dict)

    @classmethod
    def from_plans(cls, status: Status, plans: Sequence[PathPlan], wall_time: float = 0.0,
                   expanded: int = 0) -> "PlanResult":
        arrivals = [p.arrival for p in plans]
        return cls(status, list(plans), max(arrivals, default=0), sum(arrivals), wall_time, expanded)


@dataclass
class _Table:
    """Per-vehicle lookup of forbidden cells and moves."""

    vertex: set = field(default_factory=set)   # (lane, row, t)
    edge: set = field(default_factory=set)     # (l1, r1, l2, r2, t)
    parked: dict = field(default_factory=dict)  # (lane, row) -> first cycle occupied for good

    def add(self, c: Constraint) -> None:
        if c.kind is ConflictKind.VERTEX:
            (cell,) = c.cells
            self.vertex.add((cell[0], cell[1], c.cycle))
        else:
            a, b = c.cells
            self.edge.add((a[0], a[1], b[0], b[1], c.cycle))

    def reserve(self, plan: PathPlan) -> None:
        """Treat ``plan`` as a moving obstacle, parked on its target once it ends."""
        cells = plan.cells
        last = len(cells) - 1
        for t, c in enumerate(cells[:last]):
            self.vertex.add((c[0], c[1], t))
        for t in range(1, last + 1):
            a, b = cells[t - 1], cells[t]
            if a != b:
                # a follower may not take the reverse move in the same cycle
                self.edge.add((b[0], b[1], a[0], a[1], t))
        tgt = (cells[last][0], cells[last][1])
        self.parked[tgt] = min(last, self.parked.get(tgt, last))

    def latest(self) -> int:
        ts = [v[2] for v in self.vertex] + [e[4] for e in self.edge] + list(self.parked.values())
        return max(ts, default=0)


def _table_for(vid: int, constraints: Iterable[Constraint]) -> _Table:
    tab = _Table()
    for c in constraints:
        if c.vehicle_id == vid:
            tab.add(c)
    return tab


def _search(start: RelPoint, goal: RelPoint, g: GridMap, tab: _Table,
            horizon: Optional[int]) -> Optional[list]:
    """Space-time A*; returns the cell sequence up to final arrival or None."""
    gl, gr = goal
    if (gl, gr) in g._static or gl in g.closed_lanes:
        return None
    if (gl, gr) in tab.parked:
        return None
    goal_from = 0
    for l, r, t in tab.vertex:
        if l == gl and r == gr and t >= goal_from:
            goal_from = t + 1
    if g.has_dynamic_blocks:
        goal_from = max(goal_from, _goal_free_from(g, goal))
    if horizon is None:
        horizon = max(tab.latest(), goal_from) + g.width * (g.row_max - g.row_min + 1) + 1

    width, rmin, rmax = g.width, g.row_min, g.row_max
    vertex, edge, parked = tab.vertex, tab.edge, tab.parked
    dynamic = g.has_dynamic_blocks
    static = g._static
    sl, sr = start
    h0 = abs(sl - gl) + abs(sr - gr)
    if h0 > horizon:
        return None
    counter = itertools.count()
    # (f, -t, tie, lane, row, t)
    open_ = [(h0, 0, next(counter), sl, sr, 0)]
    parent = {(sl, sr, 0): None}
    closed = set()
    while open_:
        f, negt, _, l, r, t = heapq.heappop(open_)
        key = (l, r, t)
        if key in closed:
            continue
        closed.add(key)
        if l == gl and r == gr and t >= goal_from:
            out = []
            while key is not None:
                out.append(RelPoint(key[0], key[1]))
                key = parent[key]
            out.reverse()
            return out
        nt = t + 1
        if nt > horizon:
            continue
        for dl, dr in _MOVES:
            nl, nr = l + dl, r + dr
            if nl < 0 or nl >= width or nr < rmin or nr > rmax:
                continue
            if (nl, nr) in static:
                continue
            if dynamic and g.is_blocked(RelPoint(nl, nr), nt):
                continue
            if (nl, nr, nt) in vertex:
                continue
            p = parked.get((nl, nr))
            if p is not None and nt >= p:
                continue
            if (dl or dr) and (l, r, nl, nr, nt) in edge:
                continue
            nkey = (nl, nr, nt)
            if nkey in closed or nkey in parent:
                continue
            parent[nkey] = key
            h = abs(nl - gl) + abs(nr - gr)
            heapq.heappush(open_, (nt + h, -nt, next(counter), nl, nr, nt))
    return None


def _goal_free_from(g: GridMap, goal: RelPoint) -> int:
    ts = [c for l, r, c in g._timed if (l, r) == (goal[0], goal[1])]
    return max(ts) + 1 if ts else 0


def path_cost(cells: Sequence[RelPoint]) -> int:
    """Cycles spent before the final arrival at the last cell."""
    return PathPlan(0, cells).arrival


def astar_single(start: RelPoint, goal: RelPoint, g: GridMap,
                 constraints: Iterable[Constraint] = (), horizon: Optional[int] = None,
                 vehicle_id: int = 0) -> PathPlan:
    """Cheapest space-time path for one vehicle obeying its constraints.

    Raises NoPath if the goal cannot be reached (and held) within ``horizon``.
    """
    start, goal = RelPoint(*start), RelPoint(*goal)
    tab = _table_for(vehicle_id, constraints)
    cells = _search(start, goal, g, tab, horizon)
    if cells is None:
        raise NoPath(f"vehicle {vehicle_id}: no path {start} -> {goal}")
    return PathPlan(vehicle_id, cells)


def default_horizon(starts: Sequence[RelPoint], goals: Sequence[RelPoint], g: GridMap) -> int:
    """Row span of the grid plus two cycles of slack per vehicle."""
    return (g.row_max - g.row_min) + 2 * len(starts)


def priority_order(starts: Sequence[RelPoint]) -> list[int]:
    """Front-most vehicles first; ties go to the lower lane, then the lower id."""
    return sorted(range(len(starts)), key=lambda i: (-starts[i].row, starts[i].lane, i))


def _check_inputs(starts, goals):
    if len(starts) != len(goals):
        raise ValueError("need one goal per start")
    if len(set(starts)) != len(starts) or len(set(goals)) != len(goals):
        raise ValueError("starts and goals must be pairwise distinct")


def _prioritized(starts, goals, g, horizon, tables) -> Optional[list]:
    order = priority_order(starts)
    plans: list = [None] * len(starts)
    reserved = _Table()
    for i in order:
        tab = tables[i] if tables is not None else None
        if tab is not None:
            merged = _Table(reserved.vertex | tab.vertex, reserved.edge | tab.edge, dict(reserved.parked))
        else:
            merged = reserved
        cells = _search(starts[i], goals[i], g, merged, horizon)
        if cells is None:
            return None
        plans[i] = PathPlan(i, cells)
        reserved.reserve(plans[i])
    return plans


def plan_priority_astar(starts: Sequence[RelPoint], goals: Sequence[RelPoint], g: GridMap,
                        horizon: Optional[int] = None) -> PlanResult:
    starts = [RelPoint(*s) for s in starts]
    goals = [RelPoint(*s) for s in goals]
    _check_inputs(starts, goals)
    if horizon is None:
        horizon = default_horizon(starts, goals, g)
    t0 = time.perf_counter()
    plans = _prioritized(starts, goals, g, horizon, None)
    dt = time.perf_counter() - t0
    if plans is None:
        return PlanResult(Status.NO_SOLUTION, wall_time=dt)
    return PlanResult.from_plans(Status.SOLVED, plans, dt)


@dataclass
class ConstraintTreeNode:
    constraints: tuple          # per-vehicle frozenset of Constraint
    solution: list              # PathPlan per vehicle
    cost: int
    n_conflicts: int = 0
    first_conflict: Optional[Conflict] = None
    parent: Optional["ConstraintTreeNode"] = None

    def all_constraints(self) -> set:
        return set().union(*self.constraints) if self.constraints else set()


def _children_constraints(conf: Conflict) -> list[Constraint]:
    if conf.kind is ConflictKind.VERTEX:
        (cell,) = conf.cells
        return [Constraint.vertex(conf.a, cell, conf.cycle), Constraint.vertex(conf.b, cell, conf.cycle)]
    src, dst = conf.cells
    return [Constraint.edge(conf.a, src, dst, conf.cycle), Constraint.edge(conf.b, dst, src, conf.cycle)]


def plan_cbs(starts: Sequence[RelPoint], goals: Sequence[RelPoint], g: GridMap,
             horizon: Optional[int] = None, time_bound: float = math.inf,
             incumbent: bool = True, checkpoints: Sequence[float] = ()) -> PlanResult:
    """Optimal sum-of-costs planning by Conflict-Based Search.

    Nodes are expanded best-first on ``(cost, makespan, conflicts, insertion
    order)``. With ``incumbent`` on, each expansion also runs the prioritized
    planner seeded with the node's constraints and keeps the cheapest
    conflict-free result; it is returned as ``SolvedIncumbent`` if the bound
    expires first. Pass ``horizon=-1`` for an unbounded horizon.

    The search is deterministic, so a shorter bound only truncates it.
    ``checkpoints`` lists such shorter bounds; the outcome each would have
    produced is stored in ``result.snapshots``.
    """
    starts = [RelPoint(*s) for s in starts]
    goals = [RelPoint(*s) for s in goals]
    _check_inputs(starts, goals)
    if horizon is None:
        horizon = default_horizon(starts, goals, g)
    elif horizon < 0:
        horizon = None
    t0 = time.perf_counter()
    deadline = t0 + time_bound
    n = len(starts)

    best: Optional[list] = None
    best_cost = math.inf
    expanded = 0
    pending = sorted(c for c in checkpoints if c < time_bound)
    snapshots = {}

    def stopped(now: float, timeout: bool) -> PlanResult:
        if best is not None:
            return PlanResult.from_plans(Status.SOLVED_INCUMBENT, best, now - t0, expanded)
        return PlanResult(Status.TIMEOUT if timeout else Status.NO_SOLUTION,
                          wall_time=now - t0, expanded=expanded)

    def done(res: PlanResult) -> PlanResult:
        for c in pending:
            snapshots[c] = res
        res.snapshots = snapshots
        return res

    empty = frozenset()
    root_paths = []
    for i in range(n):
        cells = _search(starts[i], goals[i], g, _Table(), horizon)
        if cells is None:
            return done(PlanResult(Status.NO_SOLUTION, wall_time=time.perf_counter() - t0))
        root_paths.append(PathPlan(i, cells))
    root = ConstraintTreeNode((empty,) * n, root_paths, sum(p.arrival for p in root_paths))
    root.first_conflict = first_conflict(root_paths)
    root.n_conflicts = count_conflicts(root_paths) if root.first_conflict else 0

    counter = itertools.count()
    open_ = [(root.cost, max(x.arrival for x in root_paths), root.n_conflicts, next(counter), root)]
    timed_out = False
    while open_:
        now = time.perf_counter()
        while pending and now > t0 + pending[0]:
            snapshots[pending.pop(0)] = stopped(now, True)
        if now > deadline:
            timed_out = True
            break
        *_, node = heapq.heappop(open_)
        if node.first_conflict is None:
            return done(PlanResult.from_plans(Status.SOLVED, node.solution,
                                              time.perf_counter() - t0, expanded))
        expanded += 1
        if incumbent and node.cost < best_cost:
            tables = [_table_for(i, node.constraints[i]) for i in range(n)]
            plans = _prioritized(starts, goals, g, horizon, tables)
            if plans is not None:
                cost = sum(p.arrival for p in plans)
                if cost < best_cost:
                    best, best_cost = plans, cost
        for con in _children_constraints(node.first_conflict):
            vid = con.vehicle_id
            cons = list(node.constraints)
            if con in cons[vid]:
                continue
            cons[vid] = cons[vid] | {con}
            tab = _Table()
            for c in cons[vid]:
                tab.add(c)
            cells = _search(starts[vid], goals[vid], g, tab, horizon)
            if cells is None:
                continue
            sol = list(node.solution)
            sol[vid] = PathPlan(vid, cells)
            child = ConstraintTreeNode(tuple(cons), sol, node.cost - node.solution[vid].arrival + sol[vid].arrival,
                                       parent=node)
            child.first_conflict = first_conflict(sol)
            child.n_conflicts = count_conflicts(sol) if child.first_conflict else 0
            heapq.heappush(open_, (child.cost, max(x.arrival for x in sol), child.n_conflicts, next(counter), child))
    return done(stopped(time.perf_counter(), timed_out))


def detect_first_conflict(plans: Sequence[PathPlan]) -> Optional[Conflict]:
    return first_conflict(plans)


def joint_state_oracle(starts: Sequence[RelPoint], goals: Sequence[RelPoint], g: GridMap,
                       horizon: Optional[int] = None) -> Optional[int]:
    """Exact optimal sum-of-costs by Dijkstra over joint configurations.

    A vehicle standing on its goal may commit to stay there for good, after
    which it costs nothing; uncommitted vehicles pay one per cycle. Returns
    None when no collision-free joint plan exists (within ``horizon`` cycles
    when one is given). Only meant for tiny instances.
    """
    starts = tuple(RelPoint(*s) for s in starts)
    goals = tuple(RelPoint(*s) for s in goals)
    n = len(starts)
    if n > 3:
        raise ValueError("oracle limited to 3 vehicles")
    full = (1 << n) - 1
    timed = horizon is not None or g.has_dynamic_blocks

    def commits(pos, mask, t):
        # every way of committing uncommitted vehicles that sit on their goal
        opts = [i for i in range(n) if not mask >> i & 1 and pos[i] == goals[i]
                and (not g.has_dynamic_blocks or g.free_forever_from(goals[i], t))]
        for k in range(len(opts) + 1):
            for sub in itertools.combinations(opts, k):
                m = mask
                for i in sub:
                    m |= 1 << i
                yield m

    start_t = 0
    dist = {}
    heap = []
    for m in commits(starts, 0, 0):
        key = (starts, m, start_t if timed else 0)
        dist[key] = 0
        heap.append((0, next(_tie), starts, m, 0))
    heapq.heapify(heap)
    while heap:
        d, _, pos, mask, t = heapq.heappop(heap)
        key = (pos, mask, t if timed else 0)
        if dist.get(key, math.inf) < d:
            continue
        if mask == full:
            return d
        if horizon is not None and t >= horizon:
            continue
        nt = t + 1
        step = n - bin(mask).count("1")
        choices = []
        for i in range(n):
            if mask >> i & 1:
                choices.append((pos[i],))
                continue
            opts = [q for q in g.neighbours(pos[i]) if not g.is_blocked(q, nt if timed else None)]
            choices.append(tuple(opts))
        for nxt in itertools.product(*choices):
            if len(set(nxt)) < n:
                continue
            swap = False
            for i in range(n):
                for j in range(i + 1, n):
                    if nxt[i] == pos[j] and nxt[j] == pos[i] and pos[i] != pos[j]:
                        swap = True
            if swap:
                continue
            for m in commits(nxt, mask, nt):
                nd = d + step
                k2 = (nxt, m, nt if timed else 0)
                if nd < dist.get(k2, math.inf):
                    dist[k2] = nd
                    heapq.heappush(heap, (nd, next(_tie), nxt, m, nt))
    return None


_tie = itertools.count()


def check_solution(result: PlanResult, g: Optional[GridMap] = None) -> list[Conflict]:
    """Conflicts in a result's plans (empty for a valid solved result)."""
    if not result.plans:
        return []
    return validate_plan_set(result.plans, g)
