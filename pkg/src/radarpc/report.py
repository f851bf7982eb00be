"""Text tables and matplotlib figures for bench, sweep and odometry outputs."""

from __future__ import annotations

import math
from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .se2 import Trajectory  # noqa: E402

STYLE = {
    "figure.dpi": 120,
    "font.size": 9,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "axes.spines.top": False,
    "axes.spines.right": False,
}


def _fmt(v, digits: int) -> str:
    if isinstance(v, float):
        return "nan" if math.isnan(v) else f"{v:.{digits}f}"
    return str(v)


def format_table(rows: Sequence[dict], columns: Sequence[str] | None = None, digits: int = 3) -> str:
    """Fixed-width text table; numbers right-aligned, text left-aligned."""
    if not rows:
        return ""
    cols = list(columns) if columns else list(rows[0])
    cells = [[_fmt(r.get(c, ""), digits) for c in cols] for r in rows]
    widths = [max(len(c), *(len(line[i]) for line in cells)) for i, c in enumerate(cols)]
    numeric = [all(isinstance(r.get(c), (int, float)) for r in rows) for c in cols]

    def line(vals):
        return "  ".join(v.rjust(w) if num else v.ljust(w) for v, w, num in zip(vals, widths, numeric)).rstrip()

    out = [line(cols), "  ".join("-" * w for w in widths)]
    out += [line(vals) for vals in cells]
    return "\n".join(out) + "\n"


def _save(fig, path) -> Path:
    path = Path(path)
    fig.savefig(path, bbox_inches="tight", metadata={"Software": None})
    plt.close(fig)
    return path


def plot_bench(rows: Sequence[dict], path, runtime_ms: Sequence[float] | None = None) -> Path:
    """Drift per extractor, with extraction time against drift when per-row timings are given."""
    names = [r["extractor"] for r in rows]
    ate = np.array([r["ate_percent"] for r in rows], dtype=float)
    with plt.rc_context(STYLE):
        ncols = 2 if runtime_ms is not None else 1
        fig, axes = plt.subplots(1, ncols, figsize=(5.0 * ncols, 3.2), squeeze=False)
        ax = axes[0, 0]
        ax.bar(range(len(names)), ate, color="0.35")
        ax.set_xticks(range(len(names)), names, rotation=45, ha="right")
        ax.set_ylabel("ATE (%)")
        if runtime_ms is not None:
            ax = axes[0, 1]
            ms = np.asarray(runtime_ms, dtype=float)
            ax.scatter(ms, ate, s=14, color="k")
            for n, x, y in zip(names, ms, ate):
                ax.annotate(n, (x, y), fontsize=7, xytext=(3, 2), textcoords="offset points")
            ax.set_xscale("log")
            ax.set_xlabel("mean extraction time (ms)")
            ax.set_ylabel("ATE (%)")
        return _save(fig, path)


def plot_sweep(rows: Sequence[dict], param: str, path) -> Path:
    """ATE against one swept parameter, coarse and fine stages marked separately."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(4.5, 3.0))
        for stage, marker in (("coarse", "o"), ("fine", ".")):
            pts = sorted((r[param], r["ate_percent"]) for r in rows
                         if r["stage"] == stage and not r["failed"])
            if pts:
                x, y = zip(*pts)
                ax.plot(x, y, marker=marker, linestyle="none", label=stage, color="k" if stage == "coarse" else "0.5")
        ax.set_xlabel(param)
        ax.set_ylabel("training ATE (%)")
        ax.legend(frameon=False)
        return _save(fig, path)


def plot_trajectory(gt: Trajectory | None, est: Trajectory, path) -> Path:
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(4.0, 4.0))
        if gt is not None:
            ax.plot(gt.poses[:, 0], gt.poses[:, 1], color="0.6", lw=2, label="ground truth")
        ax.plot(est.poses[:, 0], est.poses[:, 1], color="k", lw=1, label="estimate")
        ax.set_aspect("equal", adjustable="datalim")
        ax.set_xlabel("x (m)")
        ax.set_ylabel("y (m)")
        ax.legend(frameon=False)
        return _save(fig, path)
