"""Run configuration loaded from YAML.

Every key is optional; missing keys fall back to the defaults below::

    formation: {d_F: 0.5, v_F: 0.1, T_F: 10.0}
    lane_width: 0.46
    dt: 0.01
    M: 1.0e6
    time_bound: 10.0        # CBS wall-clock bound in seconds, null for none
    controller: {kp: 10.0, ki: 0.2, kd: 0.5, preview: 0.12, k_s: 0.8, k_v: 1.5,
                 steer_limit: 0.6, accel_limit: 0.5, wheelbase: 0.12, stage_tol: 0.02}
    collision_distance: null  # null means d_F / 2
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Optional

import yaml

from .assignment import DEFAULT_M
from .grid import FormationSpec
from .simulator import ControllerConfig
from .trajectory import DEFAULT_LANE_WIDTH


@dataclass(frozen=True)
class RunConfig:
    formation: FormationSpec = field(default_factory=FormationSpec)
    controller: ControllerConfig = field(default_factory=ControllerConfig)
    lane_width: float = DEFAULT_LANE_WIDTH
    dt: float = 0.01
    M: float = DEFAULT_M
    time_bound: float = 10.0
    collision_distance: Optional[float] = None

    def __post_init__(self):
        if self.lane_width <= 0 or self.dt <= 0:
            raise ValueError("lane_width and dt must be positive")
        if self.time_bound <= 0:
            raise ValueError("time_bound must be positive")

    @property
    def collision_threshold(self) -> float:
        if self.collision_distance is None:
            return self.formation.d_F / 2.0
        return self.collision_distance

    def to_dict(self) -> dict:
        d = asdict(self)
        d["formation"] = {k: d["formation"][k] for k in ("d_F", "v_F", "T_F")}
        d["time_bound"] = None if math.isinf(self.time_bound) else self.time_bound
        return d


def _pick(cls, raw: dict, what: str) -> dict:
    """Check keys against ``cls`` and coerce numbers (YAML reads ``1e6`` as a string)."""
    types = {f.name: f.type for f in fields(cls)}
    extra = set(raw) - set(types)
    if extra:
        raise ValueError(f"unknown {what} keys: {sorted(extra)}")
    out = {}
    for k, v in raw.items():
        t = types[k]
        if v is not None and t in ("float", "Optional[float]"):
            v = float(v)
        elif v is not None and t == "int":
            v = int(v)
        out[k] = v
    return out


def config_from_dict(raw: Optional[dict]) -> RunConfig:
    raw = dict(raw or {})
    cfg = RunConfig()
    formation = _pick(FormationSpec, raw.pop("formation", None) or {}, "formation")
    controller = _pick(ControllerConfig, raw.pop("controller", None) or {}, "controller")
    tb = raw.pop("time_bound", cfg.time_bound)
    raw["time_bound"] = math.inf if tb is None else float(tb)
    raw = _pick(RunConfig, raw, "config")
    return replace(cfg, formation=replace(cfg.formation, **formation),
                   controller=replace(cfg.controller, **controller), **raw)


def load_config(path) -> RunConfig:
    with open(Path(path)) as fh:
        return config_from_dict(yaml.safe_load(fh))
