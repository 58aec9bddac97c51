"""Exhaustive lane-preference sweep comparing the prioritized and CBS planners.

Every case starts from the three-lane interlaced structure with front row 0.
Case ``k`` takes its preference labels from the base-3 digits of ``k``
(most significant digit is vehicle 0; 0 = L, 1 = S, 2 = R). Targets are
generated per label with front row 0, assigned, then planned on the
smallest grid holding starts and goals.
"""
from __future__ import annotations

import csv
import hashlib
import math
import os
import statistics
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

from .assignment import DEFAULT_M, Label, LanePreference, assign, generate_targets
from .grid import GridMap, grid_around, interlaced_cells
from .mapf import PlanResult, Status, plan_cbs, plan_priority_astar

LABELS = (Label.L, Label.S, Label.R)
RECORD_HEADER = ("vehicle_count", "case_id", "method", "status", "makespan", "sum_of_costs", "wall_time_s")
SUMMARY_HEADER = ("vehicle_count", "total", "method", "failed", "success_rate", "max_steps",
                  "total_steps", "time_s", "averaged_over")


def method_name(method: str, time_bound: float = math.inf) -> str:
    """``astar``, or ``cbs(2s)`` style names carrying the bound."""
    if method == "astar":
        return "astar"
    if method != "cbs":
        raise ValueError(f"unknown method {method!r}")
    return "cbs(inf)" if math.isinf(time_bound) else f"cbs({time_bound:g}s)"


def case_labels(case_id: int, n: int) -> tuple:
    if not 0 <= case_id < 3 ** n:
        raise ValueError(f"case_id {case_id} out of range for {n} vehicles")
    digits = []
    for _ in range(n):
        case_id, d = divmod(case_id, 3)
        digits.append(LABELS[d])
    return tuple(reversed(digits))


def case_id_of(labels: Sequence) -> int:
    k = 0
    for lab in labels:
        k = 3 * k + LABELS.index(Label(lab))
    return k


@dataclass(frozen=True)
class BenchCase:
    case_id: int
    labels: tuple
    starts: list
    goals: list
    grid: GridMap
    assign_time: float


def build_case(n: int, case_id: int, M: float = DEFAULT_M) -> BenchCase:
    labels = case_labels(case_id, n)
    t0 = time.perf_counter()
    starts = interlaced_cells(3, n, 0)
    prefs = [LanePreference.from_label(i, lab, 3) for i, lab in enumerate(labels)]
    road = GridMap(3, -4 * n, 0)
    targets = generate_targets(prefs, road, 0)
    goals = assign(starts, targets, prefs, M)
    grid = grid_around(list(starts) + list(goals), 3, 0)
    return BenchCase(case_id, labels, starts, goals, grid, time.perf_counter() - t0)


@dataclass(frozen=True)
class BenchRecord:
    vehicle_count: int
    case_id: int
    method: str
    status: str
    makespan: Optional[int]
    sum_of_costs: Optional[int]
    wall_time_s: float
    assign_time_s: float = 0.0
    plan_digest: str = ""

    def __post_init__(self):
        if not 0 <= self.case_id < 3 ** self.vehicle_count:
            raise ValueError("case_id out of range")

    @property
    def ok(self) -> bool:
        return Status(self.status).ok


def _digest(res: PlanResult) -> str:
    if not res.plans:
        return ""
    text = ";".join(",".join(f"{c.lane}:{c.row}" for c in p.cells) for p in res.plans)
    return hashlib.sha1(text.encode()).hexdigest()[:16]


def _record(n, case, method, res: PlanResult) -> BenchRecord:
    ok = res.status.ok
    return BenchRecord(n, case.case_id, method, res.status.value,
                       res.makespan if ok else None, res.sum_of_costs if ok else None,
                       res.wall_time, case.assign_time, _digest(res))


def run_case(n: int, case_id: int, method: str, time_bound: float = math.inf,
             extra_bounds: Sequence[float] = ()) -> list[BenchRecord]:
    """One case; ``extra_bounds`` adds CBS records for shorter bounds from the same search."""
    case = build_case(n, case_id)
    if method == "astar":
        return [_record(n, case, "astar", plan_priority_astar(case.starts, case.goals, case.grid))]
    res = plan_cbs(case.starts, case.goals, case.grid, time_bound=time_bound, checkpoints=extra_bounds)
    out = [_record(n, case, method_name("cbs", time_bound), res)]
    for b in sorted(extra_bounds):
        snap = res.snapshots.get(b, res) if b < time_bound else res
        out.append(_record(n, case, method_name("cbs", b), snap))
    return out


def _chunk(args):
    n, ids, method, time_bound, extra = args
    return [run_case(n, k, method, time_bound, extra) for k in ids]


def bench_sweep(vehicle_count: int, method: str = "cbs", time_bound: float = math.inf,
                extra_bounds: Sequence[float] = (), workers: Optional[int] = None,
                progress=None) -> dict[str, list[BenchRecord]] | list[BenchRecord]:
    """Every preference tuple for ``vehicle_count`` vehicles, in case-id order.

    Returns the records of the requested method, or with ``extra_bounds`` a
    dict from method name to records. ``workers`` > 1 runs cases in a process
    pool; the bound is wall-clock time inside each worker.
    """
    if not 1 <= vehicle_count <= 8:
        raise ValueError("vehicle_count must be in [1, 8]")
    if method not in ("astar", "cbs"):
        raise ValueError(f"unknown method {method!r}")
    total = 3 ** vehicle_count
    workers = workers or 1
    step = max(1, min(64, total // (4 * workers) or 1))
    jobs = [(vehicle_count, range(i, min(i + step, total)), method, time_bound, tuple(extra_bounds))
            for i in range(0, total, step)]
    rows: list[list[BenchRecord]] = []
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            for part in pool.map(_chunk, jobs):
                rows.extend(part)
                if progress:
                    progress(len(rows), total)
    else:
        for job in jobs:
            rows.extend(_chunk(job))
            if progress:
                progress(len(rows), total)
    if not extra_bounds or method == "astar":
        return [r[0] for r in rows]
    out: dict[str, list[BenchRecord]] = {}
    for recs in rows:
        for r in recs:
            out.setdefault(r.method, []).append(r)
    return out


@dataclass(frozen=True)
class BenchSummary:
    vehicle_count: int
    method: str
    total: int
    failed: int
    success_rate: float
    mean_makespan: float
    mean_sum_of_costs: float
    mean_wall_time: float
    averaged_over: int
    shared: Optional[dict] = field(default=None, compare=False)

    def row(self) -> list:
        return [self.vehicle_count, self.total, self.method, self.failed, f"{100 * self.success_rate:.2f}",
                f"{self.mean_makespan:.2f}", f"{self.mean_sum_of_costs:.2f}",
                f"{self.mean_wall_time:.4f}", self.averaged_over]


def _mean(xs) -> float:
    xs = list(xs)
    return statistics.fmean(xs) if xs else math.nan


def summarize(records: Sequence[BenchRecord], other: Optional[Sequence[BenchRecord]] = None) -> BenchSummary:
    """Table-style aggregate; step means are over successful cases only.

    With ``other`` (the same cases under another method) the summary also
    carries ``shared``: step means of both methods on cases both solved.
    """
    if not records:
        raise ValueError("no records")
    keys = {(r.vehicle_count, r.method) for r in records}
    if len(keys) != 1:
        raise ValueError(f"records mix settings: {sorted(keys)}")
    (n, method), = keys
    good = [r for r in records if r.ok]
    shared = None
    if other is not None:
        theirs = {r.case_id: r for r in other if r.ok}
        both = [(r, theirs[r.case_id]) for r in good if r.case_id in theirs]
        shared = {
            "cases": len(both),
            "makespan": (_mean(a.makespan for a, _ in both), _mean(b.makespan for _, b in both)),
            "sum_of_costs": (_mean(a.sum_of_costs for a, _ in both), _mean(b.sum_of_costs for _, b in both)),
        }
    failed = len(records) - len(good)
    return BenchSummary(n, method, len(records), failed, 1.0 - failed / len(records),
                        _mean(r.makespan for r in good), _mean(r.sum_of_costs for r in good),
                        _mean(r.wall_time_s for r in records), len(good), shared)


def write_records(path, records: Iterable[BenchRecord], timing: bool = True) -> None:
    """Records CSV. ``timing=False`` blanks the wall-time column for byte-stable output."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(RECORD_HEADER)
        for r in records:
            w.writerow([r.vehicle_count, r.case_id, r.method, r.status,
                        "" if r.makespan is None else r.makespan,
                        "" if r.sum_of_costs is None else r.sum_of_costs,
                        f"{r.wall_time_s:.6f}" if timing else ""])


def read_records(path) -> list[BenchRecord]:
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            out.append(BenchRecord(
                int(row["vehicle_count"]), int(row["case_id"]), row["method"], row["status"],
                int(row["makespan"]) if row["makespan"] else None,
                int(row["sum_of_costs"]) if row["sum_of_costs"] else None,
                float(row["wall_time_s"]) if row["wall_time_s"] else 0.0))
    return out


def write_summary(path, summaries: Iterable[BenchSummary]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SUMMARY_HEADER)
        for s in summaries:
            w.writerow(s.row())


def default_workers() -> int:
    return max(1, len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else os.cpu_count() or 1)
