"""Declarative formation-switching scenarios and their compilation to planning problems.

A scenario file is one YAML document::

    name: three_to_two            # unique name, also the file stem
    aliases: [lane_drop, b]       # optional extra names
    description: free text
    lanes: 3                      # grid width
    closed_lanes: {2: 1}          # lane -> first cycle it is undrivable (post-event)
    initial:
      structure: interlaced       # interlaced | parallel | cells
      vehicles: 5
      lanes: [0, 1, 2]            # lanes the initial structure uses (default: all)
      front_row: 0
      cells: [[0, 0], [1, -1]]    # only for structure: cells
    joining: [[0, -4]]            # extra vehicles entering the formation (on-ramp)
    preferences:                  # post-event lane demands
      - {vehicle: 3, lane: 0, front_most: true}
      - {vehicle: 0, label: L}
    expected_lanes: [0, 1]        # lanes the final formation must occupy
    target_front_row: auto        # or an integer
    margin: 1                     # spare rows around starts and targets

Vehicle ids are the order of the initial structure followed by joiners.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import NamedTuple, Optional, Sequence, Union

import yaml

from .assignment import (DEFAULT_M, AssignmentProblem, Label, LanePreference, build_cost_matrix,
                         build_preference_matrix, generate_targets, hungarian)
from .errors import FormationError, InfeasibleScenario
from .grid import GridMap, RelPoint, grid_around, interlaced_cells, parallel_cells

_STRUCTURES = ("interlaced", "parallel", "cells")


@dataclass(frozen=True)
class ScenarioDef:
    name: str
    lanes: int = 3
    structure: str = "interlaced"
    vehicles: int = 5
    initial_lanes: Optional[tuple] = None
    front_row: int = 0
    cells: tuple = ()
    closed_lanes: dict = field(default_factory=dict)
    joining: tuple = ()
    preferences: tuple = ()           # LanePreference
    expected_lanes: Optional[tuple] = None
    target_front_row: Union[int, str] = "auto"
    margin: int = 1
    description: str = ""
    aliases: tuple = ()

    def __post_init__(self):
        if self.structure not in _STRUCTURES:
            raise ValueError(f"unknown structure {self.structure!r}")
        if self.lanes < 1 or self.margin < 0:
            raise ValueError("lanes must be >= 1 and margin >= 0")
        if self.target_front_row != "auto" and not isinstance(self.target_front_row, int):
            raise ValueError("target_front_row must be an integer or 'auto'")

    def initial_cells(self) -> list[RelPoint]:
        if self.structure == "cells":
            return [RelPoint(*c) for c in self.cells]
        make = interlaced_cells if self.structure == "interlaced" else parallel_cells
        return make(self.lanes, self.vehicles, self.front_row, self.initial_lanes)

    def start_cells(self) -> list[RelPoint]:
        return self.initial_cells() + [RelPoint(*c) for c in self.joining]

    def validate(self) -> None:
        """Raise InfeasibleScenario unless the initial placement is sane."""
        starts = self.start_cells()
        if len(set(starts)) != len(starts):
            raise InfeasibleScenario(f"{self.name}: vehicles share a start cell")
        for c in starts:
            if not 0 <= c.lane < self.lanes:
                raise InfeasibleScenario(f"{self.name}: start {tuple(c)} outside the road")
            if self.closed_lanes.get(c.lane) == 0:
                raise InfeasibleScenario(f"{self.name}: start {tuple(c)} on a closed lane")
        ids = {p.vehicle_id for p in self.preferences}
        if not ids <= set(range(len(starts))) or len(ids) != len(self.preferences):
            raise InfeasibleScenario(f"{self.name}: preferences name unknown or repeated vehicles")


class PlanningProblem(NamedTuple):
    grid: GridMap
    starts: list
    prefs: list
    targets: list


def _prefs_for(s: ScenarioDef, n: int) -> list[LanePreference]:
    given = {p.vehicle_id: p for p in s.preferences}
    return [given.get(i, LanePreference(i)) for i in range(n)]


def _score(starts, targets, prefs, M) -> tuple:
    C = build_cost_matrix(starts, targets)
    P = build_preference_matrix(prefs, targets, M)
    cols, total = hungarian(AssignmentProblem(C, P, M).weights)
    worst = max(C[i, j] for i, j in enumerate(cols))
    return worst, total


def _choose_front_row(starts, prefs, probe: GridMap, M: float) -> int:
    """Front row with the smallest worst-case move, then the smallest total move."""
    top = max(p.row for p in starts)
    span = top - min(p.row for p in starts)
    best = None
    for f in range(top + 1, top - span - 2, -1):
        targets = generate_targets(prefs, probe, f)
        key = (*_score(starts, targets, prefs, M), abs(f - top), -f)
        if best is None or key < best[0]:
            best = (key, f)
    return best[1]


def compile_scenario(s: ScenarioDef, starts: Optional[Sequence[RelPoint]] = None,
                     M: float = DEFAULT_M) -> PlanningProblem:
    """Post-event grid, start cells, preferences and target cells.

    ``starts`` overrides the declared initial placement, which lets a
    scenario continue from where another one ended.
    """
    if starts is None:
        s.validate()
        starts = s.start_cells()
    starts = [RelPoint(*c) for c in starts]
    prefs = _prefs_for(s, len(starts))
    probe = GridMap(s.lanes, -10**6, 10**6, closed_lanes=s.closed_lanes)
    try:
        if s.target_front_row == "auto":
            front = _choose_front_row(starts, prefs, probe, M)
        else:
            front = s.target_front_row
        targets = generate_targets(prefs, probe, front)
    except FormationError as exc:
        raise InfeasibleScenario(f"{s.name}: {exc}") from exc
    if s.expected_lanes is not None and {t.lane for t in targets} != set(s.expected_lanes):
        raise InfeasibleScenario(f"{s.name}: targets occupy lanes {sorted({t.lane for t in targets})}, "
                                 f"expected {sorted(s.expected_lanes)}")
    grid = grid_around(starts + targets, s.lanes, s.margin, closed_lanes=s.closed_lanes)
    return PlanningProblem(grid, starts, prefs, targets)


def _pref_from_yaml(d: dict, width: int) -> LanePreference:
    vid = int(d["vehicle"])
    front = bool(d.get("front_most", False))
    if "label" in d:
        label = Label(d["label"])
        return LanePreference(vid, label.lane(width), label, front)
    return LanePreference(vid, int(d["lane"]), None, front)


def scenario_from_dict(d: dict) -> ScenarioDef:
    d = dict(d)
    init = dict(d.pop("initial", {}) or {})
    width = int(d.get("lanes", 3))
    known = {"name", "aliases", "description", "lanes", "closed_lanes", "joining", "preferences",
             "expected_lanes", "target_front_row", "margin"}
    extra = set(d) - known
    if extra:
        raise ValueError(f"unknown scenario keys: {sorted(extra)}")
    lanes = init.get("lanes")
    exp = d.get("expected_lanes")
    return ScenarioDef(
        name=str(d["name"]),
        lanes=width,
        structure=init.get("structure", "interlaced"),
        vehicles=int(init.get("vehicles", len(init.get("cells", ())) or 5)),
        initial_lanes=tuple(lanes) if lanes is not None else None,
        front_row=int(init.get("front_row", 0)),
        cells=tuple(tuple(c) for c in init.get("cells", ())),
        closed_lanes={int(k): int(v) for k, v in (d.get("closed_lanes") or {}).items()},
        joining=tuple(tuple(c) for c in d.get("joining") or ()),
        preferences=tuple(_pref_from_yaml(p, width) for p in d.get("preferences") or ()),
        expected_lanes=tuple(exp) if exp is not None else None,
        target_front_row=d.get("target_front_row", "auto"),
        margin=int(d.get("margin", 1)),
        description=str(d.get("description", "")).strip(),
        aliases=tuple(str(a) for a in d.get("aliases") or ()),
    )


def load_scenario_file(path) -> ScenarioDef:
    with open(Path(path)) as fh:
        return scenario_from_dict(yaml.safe_load(fh))


def builtin_dir():
    return resources.files("cavformation") / "scenarios"


def builtin_scenarios() -> dict[str, ScenarioDef]:
    """Shipped scenarios keyed by name, in file order."""
    out = {}
    for entry in sorted(builtin_dir().iterdir(), key=lambda p: p.name):
        if entry.name.endswith(".yaml"):
            s = scenario_from_dict(yaml.safe_load(entry.read_text()))
            out[s.name] = s
    return out


def load_scenario(name_or_path: str) -> ScenarioDef:
    """A built-in by name or alias, or a YAML file path."""
    p = Path(name_or_path)
    if p.suffix in (".yaml", ".yml") and p.exists():
        return load_scenario_file(p)
    for s in builtin_scenarios().values():
        if name_or_path == s.name or name_or_path in s.aliases:
            return s
    raise KeyError(f"scenario not found: {name_or_path}")
