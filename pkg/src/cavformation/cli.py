"""Command-line entry point (``cavformation``)."""
from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

from .bench import (bench_sweep, default_workers, method_name, summarize, write_records,
                    write_summary)
from .config import RunConfig, load_config
from .errors import FormationError
from .runner import StageError, plan, run_scenario, step_diagram
from .scenario import builtin_scenarios, compile_scenario, load_scenario


def _bound(text: str) -> float:
    v = float(text)
    if v <= 0:
        raise argparse.ArgumentTypeError("time bound must be positive")
    return v


def _cmd_bench(a) -> int:
    out = Path(a.out)
    out.mkdir(parents=True, exist_ok=True)
    workers = a.workers or default_workers()

    def progress(done, total):
        if a.verbose:
            print(f"\r{done}/{total}", end="", file=sys.stderr, flush=True)

    extra = tuple(b for b in a.extra_bounds if b < a.time_bound) if a.method == "cbs" else ()
    res = bench_sweep(a.vehicles, a.method, a.time_bound, extra, workers, progress)
    if a.verbose:
        print(file=sys.stderr)
    groups = res if isinstance(res, dict) else {method_name(a.method, a.time_bound): res}
    baseline = None
    if a.compare and a.method == "cbs":
        baseline = bench_sweep(a.vehicles, "astar", workers=workers)
        groups = {"astar": baseline, **groups}
    records = [r for recs in groups.values() for r in recs]
    write_records(out / "records.csv", records, timing=not a.no_timing)
    sums = [summarize(recs, baseline if baseline is not None and m != "astar" else None)
            for m, recs in groups.items()]
    write_summary(out / "summary.csv", sums)
    from .plotting import plot_summary
    plot_summary(out / "summary.svg", sums)
    for s in sums:
        line = (f"N={s.vehicle_count} {s.method:9s} total={s.total} failed={s.failed} "
                f"success={100 * s.success_rate:.2f}% max_steps={s.mean_makespan:.2f} "
                f"total_steps={s.mean_sum_of_costs:.2f} time={s.mean_wall_time:.4f}s "
                f"(steps averaged over {s.averaged_over} successes)")
        print(line)
        if s.shared:
            sh = s.shared
            print(f"  shared successes with astar: {sh['cases']} cases, "
                  f"max_steps {sh['makespan'][0]:.2f} vs {sh['makespan'][1]:.2f}, "
                  f"total_steps {sh['sum_of_costs'][0]:.2f} vs {sh['sum_of_costs'][1]:.2f}")
    return 0


def _config(a) -> RunConfig:
    return load_config(a.config) if a.config else RunConfig()


def _cmd_run(a) -> int:
    cfg = _config(a)
    res = run_scenario(a.scenario, a.method, cfg, a.out)
    rep = res.report()
    print(f"{rep['scenario']}: {rep['plan_status']}, {rep['stages']} stages, "
          f"sum of costs {rep['sum_of_costs']}, min distance {rep['min_distance_m']} m, "
          f"targets reached: {rep['reached_targets']}")
    if a.out:
        print(f"artifacts written to {a.out}")
    return 0 if rep["reached_targets"] else 1


def _cmd_plan(a) -> int:
    from .assignment import assign

    cfg = _config(a)
    try:
        s = load_scenario(a.scenario)
    except KeyError as exc:
        raise StageError("load", exc.args[0]) from exc
    prob = compile_scenario(s, M=cfg.M)
    goals = assign(prob.starts, prob.targets, prob.prefs, cfg.M)
    res = plan(prob, goals, a.method, cfg.time_bound)
    if not res.status.ok:
        raise StageError("plan", f"{a.method} returned {res.status.value}")
    print(f"{s.name}: {res.status.value}, makespan {res.makespan}, sum of costs {res.sum_of_costs}")
    print(step_diagram(res.plans, prob.grid))
    return 0


def _cmd_list(a) -> int:
    for s in builtin_scenarios().values():
        alias = f" ({', '.join(s.aliases)})" if s.aliases else ""
        print(f"{s.name}{alias}: {s.description}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cavformation", description="Multi-lane formation planning and simulation.")
    sub = p.add_subparsers(dest="cmd", required=True)

    b = sub.add_parser("bench", help="exhaustive lane-preference sweep")
    b.add_argument("--vehicles", type=int, required=True, choices=range(5, 9), metavar="N")
    b.add_argument("--method", choices=("astar", "cbs"), required=True)
    b.add_argument("--time-bound", type=_bound, default=math.inf, help="CBS bound in seconds (default: none)")
    b.add_argument("--extra-bounds", type=_bound, nargs="*", default=[],
                   help="shorter CBS bounds recorded from the same search")
    b.add_argument("--compare", action="store_true", help="also sweep astar and compare shared successes")
    b.add_argument("--workers", type=int, default=0, help="process pool size (default: all CPUs)")
    b.add_argument("--no-timing", action="store_true", help="leave wall_time_s blank for reproducible CSVs")
    b.add_argument("--out", required=True)
    b.add_argument("-v", "--verbose", action="store_true")
    b.set_defaults(func=_cmd_bench)

    r = sub.add_parser("run", help="plan and simulate one scenario")
    r.add_argument("--scenario", required=True, help="built-in name or alias, or a YAML path")
    r.add_argument("--method", choices=("astar", "cbs"), default="cbs")
    r.add_argument("--config", help="YAML run configuration")
    r.add_argument("--out", help="directory for trace, schedule, SVG and report")
    r.set_defaults(func=_cmd_run)

    q = sub.add_parser("plan", help="plan one scenario and print the step diagram")
    q.add_argument("--scenario", required=True)
    q.add_argument("--method", choices=("astar", "cbs"), default="cbs")
    q.add_argument("--config")
    q.set_defaults(func=_cmd_plan)

    ls = sub.add_parser("list", help="list built-in scenarios")
    ls.set_defaults(func=_cmd_list)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (FormationError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
