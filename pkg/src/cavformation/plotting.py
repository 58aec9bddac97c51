"""SVG figures: lane geometry with one coloured trajectory per vehicle."""
from __future__ import annotations

from typing import Optional

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .simulator import SimTrace  # noqa: E402
from .trajectory import StageSchedule  # noqa: E402


def plot_trajectories(path, schedule: StageSchedule, trace: Optional[SimTrace] = None,
                      lanes: int = 3, title: str = "") -> None:
    """Driven paths (solid) over nominal Bezier references (dashed) on the lane strip."""
    w = schedule.lane_width
    fig, ax = plt.subplots(figsize=(10, 2.8))
    xs = []
    for vid in schedule.vehicle_ids:
        for seg in schedule.segments[vid]:
            xs += [seg.start.x, seg.end.x]
    if trace is not None:
        xs += [float(trace.states[:, :, 0].min()), float(trace.states[:, :, 0].max())]
    x0, x1 = (min(xs), max(xs)) if xs else (0.0, 1.0)
    pad = 0.05 * (x1 - x0 or 1.0)
    x0, x1 = x0 - pad, x1 + pad
    ax.axhspan(0, lanes * w, color="0.93", zorder=0)
    for k in range(lanes + 1):
        edge = k in (0, lanes)
        ax.plot([x0, x1], [k * w, k * w], color="0.2" if edge else "0.55",
                lw=1.5 if edge else 0.8, ls="-" if edge else (0, (6, 6)), zorder=1)
    cmap = plt.get_cmap("tab10")
    for i, vid in enumerate(schedule.vehicle_ids):
        colour = cmap(i % 10)
        for seg in schedule.segments[vid]:
            pts = seg.sample(40)
            ax.plot(pts[:, 0], pts[:, 1], color=colour, lw=0.8, ls="--", alpha=0.6, zorder=2)
        if trace is not None:
            row = trace.vehicle_ids.index(vid)
            ax.plot(trace.states[row, :, 0], trace.states[row, :, 1], color=colour, lw=1.8,
                    label=f"vehicle {vid + 1}", zorder=3)
            ax.plot(*trace.states[row, -1, :2], "o", color=colour, ms=5, zorder=4)
        else:
            start = schedule.start_point(vid)
            ax.plot(start.x, start.y, "o", color=colour, ms=5, label=f"vehicle {vid + 1}", zorder=4)
    ax.set_xlim(x0, x1)
    ax.set_ylim(-0.1 * w, (lanes + 0.1) * w)
    ax.set_xlabel("x (m)")
    ax.set_ylabel("y (m)")
    if title:
        ax.set_title(title)
    ax.legend(loc="upper left", bbox_to_anchor=(1.01, 1.0), fontsize=8, frameon=False)
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)


def plot_summary(path, summaries, metric: str = "success_rate") -> None:
    """Grouped bars of one summary metric per vehicle count and method."""
    counts = sorted({s.vehicle_count for s in summaries})
    methods = list(dict.fromkeys(s.method for s in summaries))
    fig, ax = plt.subplots(figsize=(6, 3.5))
    width = 0.8 / max(len(methods), 1)
    for j, m in enumerate(methods):
        vals = []
        for n in counts:
            hit = [s for s in summaries if s.vehicle_count == n and s.method == m]
            v = getattr(hit[0], metric) if hit else float("nan")
            vals.append(100 * v if metric == "success_rate" else v)
        ax.bar([i + j * width for i in range(len(counts))], vals, width, label=m)
    ax.set_xticks([i + 0.4 - width / 2 for i in range(len(counts))], [str(n) for n in counts])
    ax.set_xlabel("vehicles")
    ax.set_ylabel("success rate (%)" if metric == "success_rate" else metric)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)
