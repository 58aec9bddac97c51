import pytest
import yaml

from cavformation.assignment import assign
from cavformation.errors import InfeasibleScenario
from cavformation.grid import interlaced_cells, lane_column
from cavformation.mapf import plan_cbs
from cavformation.runner import StageError, solve_scenario
from cavformation.scenario import (builtin_scenarios, compile_scenario, load_scenario,
                                   load_scenario_file, scenario_from_dict)

NAMES = ["one_to_three", "three_to_two", "two_to_one", "onramp", "offramp", "emergency", "coop_lane_change"]


def test_seven_builtins_ship_as_files():
    assert list(builtin_scenarios()) == NAMES


@pytest.mark.parametrize("alias,name", [("lane_drop", "three_to_two"), ("route_lanes", "coop_lane_change"),
                                        ("d", "onramp"), ("a", "one_to_three")])
def test_aliases(alias, name):
    assert load_scenario(alias).name == name


def test_unknown_scenario():
    with pytest.raises(KeyError, match="scenario not found"):
        load_scenario("nope")


def test_lane_drop_problem():
    grid, starts, prefs, targets = compile_scenario(load_scenario("lane_drop"))
    assert starts == interlaced_cells(3, 5, 0)
    assert grid.closed_lanes == {2: 1}
    assert {t.lane for t in targets} == {0, 1}
    assert all(p.preferred_lane is None for p in prefs)


def test_route_lanes_problem_has_per_vehicle_lanes():
    _, starts, prefs, _ = compile_scenario(load_scenario("route_lanes"))
    assert len(starts) == 6
    assert [p.preferred_lane for p in prefs] == [1, 0, 2, 2, 1, 0]


def test_onramp_adds_a_vehicle_on_the_rightmost_lane():
    _, starts, _, targets = compile_scenario(load_scenario("onramp"))
    assert starts[:5] == interlaced_cells(3, 5, 0)
    assert len(starts) == 6 and starts[5].lane == 0
    assert sorted(targets) == sorted(interlaced_cells(3, 6, max(t.row for t in targets)))


def test_leaving_and_emergency_vehicles_pinned_to_exit_lane():
    for name in ("offramp", "emergency"):
        prob = compile_scenario(load_scenario(name))
        goals = assign(prob.starts, prob.targets, prob.prefs)
        assert goals[3].lane == 0
    prob = compile_scenario(load_scenario("emergency"))
    goals = assign(prob.starts, prob.targets, prob.prefs)
    assert goals[3].row == max(t.row for t in prob.targets if t.lane == 0)


@pytest.mark.parametrize("name", ["lane_drop", "route_lanes"])
def test_worked_examples_take_two_steps(name):
    res = solve_scenario(load_scenario(name), "cbs")
    assert res.stages == 2
    assert res.trace.min_distance > 0.25


@pytest.mark.parametrize("name", NAMES)
def test_every_scenario_plans_and_simulates(name):
    res = solve_scenario(load_scenario(name), "cbs")
    assert res.plan.status.ok and res.stages <= 4
    assert res.trace.finished and res.trace.min_distance > 0.25
    assert [tuple(res.final[i]) for i in range(len(res.goals))] == [tuple(g) for g in res.goals]


def test_a_then_b_then_c_returns_to_single_lane():
    cells = None
    for name in ("one_to_three", "three_to_two", "two_to_one"):
        res = solve_scenario(load_scenario(name), "cbs", starts=cells)
        cells = [res.final[i] for i in range(len(res.goals))]
    assert {c.lane for c in cells} == {0}
    rows = sorted((c.row for c in cells), reverse=True)
    assert rows == [c.row for c in lane_column(0, 5, rows[0])]


def test_yaml_round_trip(tmp_path):
    doc = {"name": "custom", "lanes": 2, "initial": {"structure": "cells", "cells": [[0, 0], [1, -1]]},
           "preferences": [{"vehicle": 1, "lane": 0}], "target_front_row": 0, "margin": 0}
    path = tmp_path / "custom.yaml"
    path.write_text(yaml.safe_dump(doc))
    s = load_scenario_file(path)
    assert load_scenario(str(path)) == s
    grid, starts, prefs, targets = compile_scenario(s)
    assert starts == [(0, 0), (1, -1)] and prefs[1].preferred_lane == 0
    assert sorted(targets) == [(0, 0), (1, -1)]


def test_bad_scenarios():
    with pytest.raises(ValueError):
        scenario_from_dict({"name": "x", "colour": "red"})
    clash = scenario_from_dict({"name": "x", "initial": {"structure": "cells", "cells": [[0, 0], [0, 0]]}})
    with pytest.raises(InfeasibleScenario):
        compile_scenario(clash)
    closed = scenario_from_dict({"name": "x", "closed_lanes": {0: 0, 1: 0, 2: 0}, "initial": {"lanes": [0]}})
    with pytest.raises(InfeasibleScenario):
        compile_scenario(closed)
    wrong = scenario_from_dict({"name": "x", "expected_lanes": [0]})
    with pytest.raises(InfeasibleScenario):
        compile_scenario(wrong)
    with pytest.raises(StageError, match="compile"):
        solve_scenario(wrong)


def test_compiled_problem_is_plannable_with_cbs():
    prob = compile_scenario(load_scenario("two_to_one"))
    goals = assign(prob.starts, prob.targets, prob.prefs)
    assert plan_cbs(prob.starts, goals, prob.grid, time_bound=10).status.ok
