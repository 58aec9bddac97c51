import itertools
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cavformation.errors import Blocked, OutOfBounds
from cavformation.grid import (Action, ConflictKind, GridMap, PathPlan, RelPoint, apply_action,
                               count_conflicts, first_conflict, interlaced_cells, lane_column,
                               pad_plans, parallel_cells, validate_plan_set)


def test_interlaced_five_on_three_lanes():
    # front-to-back, left-to-right; (row + lane) even
    assert interlaced_cells(3, 5, 0) == [(2, 0), (0, 0), (1, -1), (2, -2), (0, -2)]


def test_interlaced_six_and_parity():
    cells = interlaced_cells(3, 6, 0)
    assert cells[-1] == (1, -3)
    assert all((c.lane + c.row) % 2 == 0 for c in cells)


def test_interlaced_restricted_lanes_is_a_column():
    assert interlaced_cells(3, 3, 0, lanes=[0]) == lane_column(0, 3, 0) == [(0, 0), (0, -2), (0, -4)]


def test_lane_column_respects_parity():
    assert lane_column(1, 2, 0) == [(1, -1), (1, -3)]


def test_parallel_rows_side_by_side():
    assert parallel_cells(3, 4, 0) == [(2, 0), (1, 0), (0, 0), (2, -2)]


@pytest.mark.parametrize("bad", [(0, 5), (1, 0)])
def test_interlaced_rejects_empty(bad):
    with pytest.raises(ValueError):
        interlaced_cells(*bad)


def test_actions_and_bounds():
    g = GridMap(3, -2, 2)
    p = RelPoint(0, 0)
    assert apply_action(p, Action.LEFT, g) == (1, 0)
    assert apply_action(p, Action.FORWARD, g) == (0, 1)
    with pytest.raises(OutOfBounds):
        apply_action(p, Action.RIGHT, g)
    assert Action.between(RelPoint(1, 1), RelPoint(1, 0)) is Action.BACKWARD
    with pytest.raises(ValueError):
        Action.between(RelPoint(0, 0), RelPoint(1, 1))


def test_blocked_cells_and_closed_lanes():
    g = GridMap(3, -2, 2, blocked={(1, 0, None), (0, 1, 3)}, closed_lanes={2: 1})
    assert g.is_blocked((1, 0), 0)
    assert g.is_blocked((0, 1), 3) and not g.is_blocked((0, 1), 2)
    assert not g.is_blocked((2, 0), 0) and g.is_blocked((2, 0), 1)
    assert g.drivable_lanes() == [0, 1]
    with pytest.raises(Blocked):
        apply_action(RelPoint(0, 0), Action.LEFT, g, cycle=1)


def test_bad_grid():
    with pytest.raises(ValueError):
        GridMap(0, 0, 1)
    with pytest.raises(ValueError):
        GridMap(2, 0, 1, blocked={(5, 0, None)})


def test_plan_arrival_ignores_terminal_waits():
    p = PathPlan(0, [(0, 0), (0, 0), (0, 1), (0, 1), (0, 1)])
    assert p.arrival == 2
    assert p.trimmed().cells == ((0, 0), (0, 0), (0, 1))
    assert p.at(10) == (0, 1)
    assert [a.name for a in p.actions()] == ["STAY", "FORWARD", "STAY", "STAY"]
    assert len(pad_plans([p, PathPlan(1, [(1, 0)])])[1]) == 5


def test_vertex_conflict_found():
    a = PathPlan(0, [(0, 0), (1, 0)])
    b = PathPlan(1, [(2, 0), (1, 0)])
    (c,) = validate_plan_set([a, b])
    assert c.kind is ConflictKind.VERTEX and c.cycle == 1 and c.cells == ((1, 0),)


def test_swap_is_edge_conflict_at_arrival_cycle():
    a = PathPlan(0, [(0, 0), (1, 0)])
    b = PathPlan(1, [(1, 0), (0, 0)])
    (c,) = validate_plan_set([a, b])
    assert c.kind is ConflictKind.EDGE and c.cycle == 1


def test_following_is_not_a_conflict():
    a = PathPlan(0, [(0, 1), (0, 2)])
    b = PathPlan(1, [(0, 0), (0, 1)])
    assert validate_plan_set([a, b]) == []


def test_parked_vehicle_conflicts_after_its_plan_ends():
    a = PathPlan(0, [(0, 0)])
    b = PathPlan(1, [(0, 2), (0, 1), (0, 0)])
    (c,) = validate_plan_set([a, b])
    assert c.cycle == 2


def test_first_conflict_prefers_vertex_then_low_ids():
    a = PathPlan(0, [(0, 0), (1, 0)])
    b = PathPlan(1, [(1, 0), (0, 0)])          # swap with a at cycle 1
    c = PathPlan(2, [(2, 1), (2, 0)])
    d = PathPlan(3, [(2, -1), (2, 0)])         # vertex with c at cycle 1
    fc = first_conflict([a, b, c, d])
    assert fc.kind is ConflictKind.VERTEX and fc.vehicles == {2, 3}


# brute-force reference: explicit cycle-by-cycle pair check
def _brute(plans):
    T = max(len(p) for p in plans)
    out = set()
    for p, q in itertools.combinations(plans, 2):
        for k in range(T):
            if p.at(k) == q.at(k):
                out.add((min(p.vehicle_id, q.vehicle_id), max(p.vehicle_id, q.vehicle_id), "v", k))
            if k and p.at(k) == q.at(k - 1) and q.at(k) == p.at(k - 1) and p.at(k) != q.at(k):
                out.add((min(p.vehicle_id, q.vehicle_id), max(p.vehicle_id, q.vehicle_id), "e", k))
    return out


def _random_plans(rng):
    n = rng.randint(2, 5)
    g = GridMap(3, 0, 4)
    plans = []
    for vid in range(n):
        c = RelPoint(rng.randrange(3), rng.randrange(5))
        cells = [c]
        for _ in range(rng.randint(0, 5)):
            nb = g.neighbours(cells[-1])
            cells.append(rng.choice(nb))
        plans.append(PathPlan(vid, cells))
    return plans


def test_conflict_detection_matches_brute_force_500_sets():
    rng = random.Random(7)
    for _ in range(500):
        plans = _random_plans(rng)
        got = {(c.a, c.b, "v" if c.kind is ConflictKind.VERTEX else "e", c.cycle)
               for c in validate_plan_set(plans)}
        ref = _brute(plans)
        assert got == ref
        assert count_conflicts(plans) >= (1 if ref else 0)
        fc = first_conflict(plans)
        if ref:
            first = min(ref, key=lambda t: (t[3], t[2] != "v", t[0], t[1]))
            assert (fc.a, fc.b, "v" if fc.kind is ConflictKind.VERTEX else "e", fc.cycle) == first
        else:
            assert fc is None and count_conflicts(plans) == 0


@settings(max_examples=200)
@given(st.integers(1, 4), st.integers(1, 12), st.integers(-5, 5))
def test_interlaced_cells_are_distinct_and_ordered(lanes, n, front):
    cells = interlaced_cells(lanes, n, front)
    assert len(set(cells)) == n
    assert all((c.lane + c.row) % 2 == 0 for c in cells)
    assert cells == sorted(cells, key=lambda c: (-c.row, -c.lane))
    assert max(c.row for c in cells) <= front
