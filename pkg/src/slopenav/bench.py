"""Planner benchmark: fixed step sizes versus the variable step planner.

The benchmark map is a large cluttered room: obstacle density is chosen so
that mid-length extensions usually survive while long chords usually clip
a box, making a medium fixed step the sweet spot and leaving the variable
step planner to adapt on its own.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .octree import FREE, OCCUPIED
from .rrt import (PlanFailure, PlanPath, PlannerConfig, PlanSpace, plan_fixed,
                  plan_variable)

BENCH_START = (20.0, 225.0)
BENCH_GOAL = (430.0, 225.0)

CSV_HEADER = ("planner", "sigma", "seed", "success", "iterations", "nodes",
              "time_us", "length")


def make_bench_map(size: int = 450, boxes: int = 200, box: int = 14,
                   seed: int = 2) -> np.ndarray:
    """Scattered square obstacles over a size x size room (1 m cells).

    Start and goal neighbourhoods stay clear. The default layout is fixed
    by seed so benchmark results are reproducible.
    """
    grid = np.full((size, size), FREE, np.int8)
    rng = np.random.default_rng(seed)
    clear = ((20.0, size / 2.0), (size - 20.0, size / 2.0))
    placed = 0
    tries = 0
    while placed < boxes and tries < 100000:
        tries += 1
        x, y = rng.integers(0, size - box, 2)
        cx, cy = x + box / 2.0, y + box / 2.0
        if any((cx - px) ** 2 + (cy - py) ** 2 < 900 for px, py in clear):
            continue
        grid[x:x + box, y:y + box] = OCCUPIED
        placed += 1
    return grid


@dataclass
class BenchRow:
    planner: str
    sigma: float | None
    seed: int
    success: bool
    iterations: int
    nodes: int
    time_us: int
    length: float

    def as_record(self) -> tuple:
        sig = "variable" if self.sigma is None else "%g" % self.sigma
        return (self.planner, sig, self.seed, int(self.success),
                self.iterations, self.nodes, self.time_us,
                "%.3f" % self.length)


def run_bench(sigmas=(10.0, 30.0, 40.0, 90.0), seeds=range(100),
              q_start=BENCH_START, q_goal=BENCH_GOAL,
              grid: np.ndarray | None = None,
              max_iterations: int = 20000) -> list[BenchRow]:
    if grid is None:
        grid = make_bench_map()
    space = PlanSpace(grid, (0.0, 0.0), 1.0)
    rows = []
    for seed in seeds:
        cfg = PlannerConfig(seed=seed, max_iterations=max_iterations,
                            connect_tolerance=1.0)
        for sigma in sigmas:
            r = plan_fixed(space, q_start, q_goal, sigma, cfg)
            rows.append(_row("fixed", sigma, seed, r))
        r = plan_variable(space, q_start, q_goal, cfg)
        rows.append(_row("variable", None, seed, r))
    return rows


def _row(planner: str, sigma, seed: int, result) -> BenchRow:
    if isinstance(result, PlanPath):
        return BenchRow(planner, sigma, seed, True, result.stats.iterations,
                        result.stats.nodes, result.stats.wall_time_us,
                        result.length)
    return BenchRow(planner, sigma, seed, False, result.stats.iterations,
                    result.stats.nodes, result.stats.wall_time_us, math.inf)


def summarize(rows: list[BenchRow]) -> dict:
    """Median iterations/time per planner variant (failures count as inf)."""
    out = {}
    keys = sorted({(r.planner, r.sigma) for r in rows},
                  key=lambda k: (k[0], k[1] if k[1] is not None else -1.0))
    for planner, sigma in keys:
        grp = [r for r in rows if (r.planner, r.sigma) == (planner, sigma)]
        its = [r.iterations if r.success else math.inf for r in grp]
        times = [r.time_us if r.success else math.inf for r in grp]
        name = "variable" if sigma is None else "%s_s%g" % (planner, sigma)
        out[name] = {
            "median_iterations": float(np.median(its)),
            "median_time_us": float(np.median(times)),
            "success_rate": sum(r.success for r in grp) / len(grp),
        }
    return out


def write_csv(rows: list[BenchRow], path: str | Path) -> None:
    with open(path, "w", newline="") as f:
        wr = csv.writer(f)
        wr.writerow(CSV_HEADER)
        for r in rows:
            wr.writerow(r.as_record())
        for name, s in summarize(rows).items():
            wr.writerow(("median", name, "", "",
                         "%g" % s["median_iterations"], "",
                         "%g" % s["median_time_us"],
                         "%.3f" % s["success_rate"]))
