"""Figure rendering for pipeline artifacts (headless, file output only)."""

from __future__ import annotations

from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from matplotlib.colors import ListedColormap  # noqa: E402

from .bench import BenchRow, summarize  # noqa: E402
from .octree import FREE, OCCUPIED, UNKNOWN  # noqa: E402
from .traverse import (LBL_FLAT, LBL_RISE, LBL_SLOPE, LBL_SLOPE_EDGE,  # noqa: E402
                       LBL_UNKNOWN, TraversableMap)

_LABEL_CMAP = ListedColormap(
    ["#9e9e9e",   # unknown
     "#f5f5f5",   # flat
     "#7fc97f",   # slope
     "#e6550d",   # slope edge
     "#252525"])  # rise

_STATE_CMAP = ListedColormap(["#9e9e9e", "#f5f5f5", "#252525"])


def _extent(tmap: TraversableMap):
    nx, ny = tmap.shape
    return (tmap.origin[0], tmap.origin[0] + nx * tmap.resolution,
            tmap.origin[1], tmap.origin[1] + ny * tmap.resolution)


def render_traversable(tmap: TraversableMap, path: str | Path,
                       use_labels: bool = True) -> None:
    """Traversable map image; label colors distinguish slope and edge cells."""
    fig, ax = plt.subplots(figsize=(8, 6))
    if use_labels:
        ax.imshow(tmap.labels.T, origin="lower", cmap=_LABEL_CMAP, vmin=0,
                  vmax=4, extent=_extent(tmap), interpolation="nearest")
    else:
        ax.imshow(tmap.state.T, origin="lower", cmap=_STATE_CMAP, vmin=0,
                  vmax=2, extent=_extent(tmap), interpolation="nearest")
    ax.set_xlabel("x [m]")
    ax.set_ylabel("y [m]")
    ax.set_title("traversable map" + (" (labels)" if use_labels else ""))
    fig.savefig(path, dpi=120, bbox_inches="tight")
    plt.close(fig)


def render_plan(tmap: TraversableMap, waypoints: np.ndarray, path: str | Path,
                raw_waypoints: np.ndarray | None = None) -> None:
    """Global plan over the traversable map (raw and shortcut polylines)."""
    fig, ax = plt.subplots(figsize=(8, 6))
    ax.imshow(tmap.state.T, origin="lower", cmap=_STATE_CMAP, vmin=0, vmax=2,
              extent=_extent(tmap), interpolation="nearest")
    if raw_waypoints is not None and len(raw_waypoints) > 1:
        ax.plot(raw_waypoints[:, 0], raw_waypoints[:, 1], "-", color="#fc8d62",
                lw=1.0, label="tree path")
    ax.plot(waypoints[:, 0], waypoints[:, 1], "-o", color="#1f78b4", lw=1.8,
            ms=3, label="path")
    ax.plot(*waypoints[0], "s", color="#33a02c", ms=8, label="start")
    ax.plot(*waypoints[-1], "*", color="#e31a1c", ms=12, label="goal")
    ax.legend(loc="upper right", fontsize=8)
    ax.set_xlabel("x [m]")
    ax.set_ylabel("y [m]")
    ax.set_title("global plan")
    fig.savefig(path, dpi=120, bbox_inches="tight")
    plt.close(fig)


def render_trace(tmap: TraversableMap, trace: np.ndarray, path: str | Path,
                 title: str = "navigation trace") -> None:
    """Driven trajectory over the map; replan ticks marked."""
    fig, ax = plt.subplots(figsize=(8, 6))
    ax.imshow(tmap.state.T, origin="lower", cmap=_STATE_CMAP, vmin=0, vmax=2,
              extent=_extent(tmap), interpolation="nearest")
    if len(trace):
        ax.plot(trace[:, 1], trace[:, 2], "-", color="#1f78b4", lw=1.5)
        replans = trace[trace[:, 7] > 0]
        if len(replans):
            ax.plot(replans[:, 1], replans[:, 2], "x", color="#e31a1c", ms=8,
                    label="replan")
            ax.legend(loc="upper right", fontsize=8)
        ax.plot(trace[0, 1], trace[0, 2], "s", color="#33a02c", ms=8)
        ax.plot(trace[-1, 1], trace[-1, 2], "*", color="#e31a1c", ms=12)
    ax.set_xlabel("x [m]")
    ax.set_ylabel("y [m]")
    ax.set_title(title)
    fig.savefig(path, dpi=120, bbox_inches="tight")
    plt.close(fig)


def render_bench(rows: list[BenchRow], path: str | Path) -> None:
    """Median iterations per planner variant as a bar chart."""
    stats = summarize(rows)
    names = list(stats)
    meds = [stats[n]["median_iterations"] for n in names]
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.bar(range(len(names)), meds, color="#1f78b4")
    ax.set_xticks(range(len(names)))
    ax.set_xticklabels(names, rotation=20, ha="right")
    ax.set_ylabel("median iterations")
    ax.set_title("planner benchmark")
    fig.savefig(path, dpi=120, bbox_inches="tight")
    plt.close(fig)
