"""Figure rendering for the CLI report paths.

Figures are written next to the delimited output: a degree-sweep summary
for ``table`` runs and a state/control/cost panel for ``simulate`` runs.
Rendering is headless (Agg backend).
"""

from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .sim import Trajectory

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def _figsize(width: float, panels: int = 1):
    return (width, width * _GOLDEN / panels * 1.2)


def render_table_figure(rows, path: str, title: str) -> None:
    """Two panels over the feedback degree: value series and simulated cost."""
    degrees = [row["degree"] for row in rows]
    values = [row["value_series"] for row in rows]
    fig, (ax_v, ax_c) = plt.subplots(1, 2, figsize=_figsize(9.0, 2))
    ax_v.plot(degrees, values, "o-", color="tab:blue")
    ax_v.set_xlabel("feedback degree d")
    ax_v.set_ylabel("value-function series at x0")
    ax_v.grid(True, alpha=0.3)

    done = [(r["degree"], r["integrated_cost"]) for r in rows if r["status"] == "completed"]
    blown = [r["degree"] for r in rows if r["status"] != "completed"]
    if done:
        ax_c.plot([d for d, _ in done], [c for _, c in done], "s-", color="tab:red")
    for d in blown:
        ax_c.axvline(d, color="gray", linestyle=":", alpha=0.8)
        ax_c.annotate("blow-up", xy=(d, 0.5), xycoords=("data", "axes fraction"),
                      rotation=90, va="center", ha="right", fontsize=8, color="gray")
    ax_c.set_xlabel("feedback degree d")
    ax_c.set_ylabel("integrated running cost")
    ax_c.grid(True, alpha=0.3)

    fig.suptitle(title)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_trajectory_figure(traj: Trajectory, path: str, title: str) -> None:
    """States, controls and accumulated running cost against time."""
    n = traj.states.shape[1]
    m = traj.controls.shape[1]
    panels = 2 + (1 if m else 0)
    fig, axes = plt.subplots(panels, 1, figsize=(8.0, 2.6 * panels), sharex=True)
    axes = list(axes) if panels > 1 else [axes]

    ax = axes[0]
    show = min(n, 12)  # readable cap for large discretizations
    for i in range(show):
        ax.plot(traj.times, traj.states[:, i], lw=0.9)
    ax.set_ylabel(f"states (first {show})" if show < n else "states")
    ax.grid(True, alpha=0.3)

    idx = 1
    if m:
        ax = axes[idx]
        for i in range(m):
            ax.plot(traj.times, traj.controls[:, i], lw=0.9)
        ax.set_ylabel("controls")
        ax.grid(True, alpha=0.3)
        idx += 1

    ax = axes[idx]
    ax.plot(traj.times, traj.running_cost, color="tab:red")
    ax.set_ylabel("accumulated cost")
    ax.set_xlabel("t")
    ax.grid(True, alpha=0.3)
    if traj.status != "completed" and traj.escape_time is not None:
        ax.axvline(traj.escape_time, color="gray", linestyle=":")

    fig.suptitle(title + ("" if traj.status == "completed" else f"  [{traj.status}]"))
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
