"""End-to-end scenario pipeline: compile, assign, plan, build trajectories, simulate."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

from .assignment import assign
from .config import RunConfig
from .errors import FormationError
from .grid import GridMap, PathPlan, validate_plan_set
from .mapf import PlanResult, plan_cbs, plan_priority_astar
from .scenario import PlanningProblem, ScenarioDef, compile_scenario, load_scenario
from .simulator import SimTrace, final_cells, run_simulation
from .trajectory import StageSchedule, build_schedule


class StageError(FormationError):
    """A pipeline stage failed; ``stage`` names it."""

    def __init__(self, stage: str, msg: str):
        super().__init__(f"stage '{stage}' failed: {msg}")
        self.stage = stage


@dataclass
class RunResult:
    scenario: ScenarioDef
    problem: PlanningProblem
    goals: list
    plan: PlanResult
    schedule: StageSchedule
    trace: Optional[SimTrace] = None
    final: dict = field(default_factory=dict)

    @property
    def stages(self) -> int:
        return self.schedule.n_stages

    def report(self) -> dict:
        tr = self.trace
        return {
            "scenario": self.scenario.name,
            "vehicles": len(self.goals),
            "plan_status": self.plan.status.value,
            "makespan": self.plan.makespan,
            "sum_of_costs": self.plan.sum_of_costs,
            "plan_wall_time_s": round(self.plan.wall_time, 6),
            "stages": self.stages,
            "stage_releases_s": [round(t, 3) for t in tr.stage_releases] if tr else [],
            "min_distance_m": round(tr.min_distance, 4) if tr else None,
            "max_lateral_error_m": round(tr.max_lateral_error, 4) if tr else None,
            "starts": [list(c) for c in self.problem.starts],
            "targets": [list(c) for c in self.goals],
            "final_cells": [list(self.final[v]) for v in sorted(self.final)],
            "reached_targets": all(tuple(self.final[i]) == tuple(g) for i, g in enumerate(self.goals)),
        }


def plan(problem: PlanningProblem, goals: Sequence, method: str, time_bound: float = math.inf) -> PlanResult:
    if method == "astar":
        return plan_priority_astar(problem.starts, goals, problem.grid)
    if method == "cbs":
        return plan_cbs(problem.starts, goals, problem.grid, time_bound=time_bound)
    raise ValueError(f"unknown method {method!r}")


def solve_scenario(s: ScenarioDef, method: str = "cbs", cfg: RunConfig = RunConfig(),
                   simulate: bool = True, starts: Optional[Sequence] = None) -> RunResult:
    """Run every stage, raising StageError naming the first one to fail."""
    try:
        problem = compile_scenario(s, starts, cfg.M)
    except FormationError as exc:
        raise StageError("compile", str(exc)) from exc
    try:
        goals = assign(problem.starts, problem.targets, problem.prefs, cfg.M)
    except FormationError as exc:
        raise StageError("assign", str(exc)) from exc
    res = plan(problem, goals, method, cfg.time_bound)
    if not res.status.ok:
        raise StageError("plan", f"{method} returned {res.status.value}")
    if validate_plan_set(res.plans, problem.grid):
        raise StageError("plan", "plans contain conflicts")
    try:
        schedule = build_schedule(res.plans, cfg.formation, cfg.lane_width)
    except FormationError as exc:
        raise StageError("trajectory", str(exc)) from exc
    out = RunResult(s, problem, list(goals), res, schedule)
    if not simulate:
        return out
    try:
        out.trace = run_simulation(schedule, cfg.controller, cfg.dt, cfg.collision_threshold)
    except FormationError as exc:
        raise StageError("simulate", str(exc)) from exc
    out.final = final_cells(out.trace, schedule)
    return out


def step_diagram(plans: Sequence[PathPlan], grid: GridMap) -> str:
    """Text grid per cycle: vehicle numbers (1-based), '.' free, '#' closed or blocked.

    Columns run from the leftmost lane to lane 0, rows from front to back.
    """
    plans = list(plans)
    horizon = max(p.trimmed().arrival for p in plans) if plans else 0
    blocks = []
    for k in range(horizon + 1):
        occ = {tuple(p.at(k)): p.vehicle_id + 1 for p in plans}
        lines = [f"cycle {k}"]
        for row in range(grid.row_max, grid.row_min - 1, -1):
            cells = []
            for lane in range(grid.width - 1, -1, -1):
                if (lane, row) in occ:
                    cells.append(f"{occ[(lane, row)]:>2}")
                elif grid.is_blocked((lane, row), k):
                    cells.append(" #")
                else:
                    cells.append(" .")
            lines.append(f"{row:>4} |" + " ".join(cells))
        blocks.append("\n".join(lines))
    return "\n\n".join(blocks)


def run_scenario(name: str, method: str = "cbs", cfg: RunConfig = RunConfig(), out_dir=None) -> RunResult:
    """``solve_scenario`` plus artifacts: trace, schedule, SVG and report in ``out_dir``."""
    from .plotting import plot_trajectories

    try:
        s = load_scenario(name)
    except KeyError as exc:
        raise StageError("load", exc.args[0]) from exc
    res = solve_scenario(s, method, cfg)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        res.trace.to_csv(out / "trace.csv")
        res.schedule.to_csv(out / "schedule.csv")
        plot_trajectories(out / "trajectories.svg", res.schedule, res.trace, s.lanes,
                          title=f"{s.name} ({method})")
        (out / "steps.txt").write_text(step_diagram(res.plan.plans, res.problem.grid) + "\n")
        (out / "report.json").write_text(json.dumps(res.report(), indent=2) + "\n")
    return res
