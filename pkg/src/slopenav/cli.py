"""Command line interface: map -> traverse -> plan -> simulate -> bench.

All commands are batch-style and file-based; outputs are deterministic
under (scenario, seed). Wall-clock timings never go into CSV outputs so
reruns stay byte-identical.
"""

from __future__ import annotations

import csv
import json
import sys
from dataclasses import replace
from pathlib import Path

import click
import numpy as np

from . import __version__
from .bench import run_bench, write_csv as write_bench_csv
from .figures import render_bench, render_plan, render_trace, render_traversable
from .navsim import TRACE_COLUMNS, NavParams, RunMetrics, run_task
from .octree import OccupancyOctree
from .pgm import write_pgm
from .pipeline import build_octree, project_stack
from .rrt import (PlanFailure, PlannerConfig, PlanSpace, plan_variable,
                  shortcut)
from .scenario import Scenario, load_scenario
from .traverse import GradientParams, TraversableMap, build_traversable
from .world import SensorIntrinsics, load_environment


def _print_defaults(ctx, param, value):
    if not value or ctx.resilient_parsing:
        return
    click.echo("slopenav %s" % __version__)
    click.echo("octree: resolution=0.05 p_hit=0.7 p_miss=0.4 p_occ=0.7 "
               "clamp=[0.12, 0.97]")
    click.echo("layers: count=4 spacing=0.25 z_base=-0.05")
    click.echo("gradient: theta=20deg edge_width=1")
    click.echo("planner: max_iterations=5000 connect_tolerance=0.3 "
               "goal_bias=0.05")
    nav = NavParams()
    click.echo("nav: dt=%g v_max=%g lookahead=%g robot_radius=%g "
               "costmap=%gx%g max_replans=%d"
               % (nav.dt, nav.v_max, nav.lookahead, nav.robot_radius,
                  nav.costmap_length, nav.costmap_width, nav.max_replans))
    ctx.exit()


@click.group()
@click.option("--version", is_flag=True, callback=_print_defaults,
              expose_value=False, is_eager=True,
              help="Print version and configuration defaults.")
def main():
    """Navigation stack for uneven indoor terrain."""


def _load(scenario_path: str, seed: int | None, theta: float | None) -> Scenario:
    sc = load_scenario(scenario_path)
    if seed is not None:
        sc = replace(sc, seed=seed, planner=replace(sc.planner, seed=seed))
    if theta is not None:
        import math
        sc = replace(sc, theta=math.radians(theta))
    return sc


def _outdir(out: str) -> Path:
    p = Path(out)
    p.mkdir(parents=True, exist_ok=True)
    return p


def _mark_failure(out: Path, stage: str, message: str) -> None:
    (out / "FAILED").write_text("stage: %s\n%s\n" % (stage, message))


def _build_mapping(sc: Scenario, out: Path):
    env = load_environment(sc.environment)
    tree = build_octree(env, sc.sweep, sc.octree, sc.layers)
    stack = project_stack(tree, sc.layers)
    tree.save(out / "octree.bin")
    for k, lg in enumerate(stack.layers):
        write_pgm(out / ("layer_%d.pgm" % k), lg.data)
    return env, tree, stack


def _build_traversable(sc: Scenario, stack, out: Path) -> TraversableMap:
    tmap = build_traversable(stack, GradientParams(sc.theta, sc.octree.resolution))
    write_pgm(out / "traversable.pgm", tmap.state)
    np.save(out / "labels.npy", tmap.labels)
    render_traversable(tmap, out / "traversable.png")
    return tmap


def _write_path_csv(path: Path, waypoints: np.ndarray) -> None:
    with open(path, "w", newline="") as f:
        wr = csv.writer(f)
        wr.writerow(("x", "y"))
        for p in waypoints:
            wr.writerow(("%.6f" % p[0], "%.6f" % p[1]))


def _write_trace_csv(path: Path, trace: np.ndarray) -> None:
    with open(path, "w", newline="") as f:
        wr = csv.writer(f)
        wr.writerow(TRACE_COLUMNS)
        for row in trace:
            wr.writerow(tuple("%.6f" % v for v in row))


def _metrics_doc(m: RunMetrics) -> dict:
    return {
        "task": m.task_id,
        "success": m.success,
        "reason": m.reason,
        "sim_time_s": round(m.sim_time, 4),
        "distance_m": round(m.distance, 4),
        "average_speed_mps": round(m.average_speed, 4),
        "replans": m.replans,
        "plan_times_us": m.plan_times_us,
        "min_clearance_m": (None if m.min_clearance == float("inf")
                            else round(m.min_clearance, 4)),
    }


@main.command("map")
@click.argument("scenario", type=click.Path(exists=True))
@click.option("--out", default="out", show_default=True)
@click.option("--seed", type=int, default=None)
def cmd_map(scenario, out, seed):
    """Run the mapping sweep; write the octree binary and layer PGMs."""
    sc = _load(scenario, seed, None)
    _build_mapping(sc, _outdir(out))


@main.command("traverse")
@click.argument("scenario", type=click.Path(exists=True))
@click.option("--out", default="out", show_default=True)
@click.option("--seed", type=int, default=None)
@click.option("--theta", type=float, default=None, help="Threshold, degrees.")
def cmd_traverse(scenario, out, seed, theta):
    """Mapping plus traversable-map generation."""
    sc = _load(scenario, seed, theta)
    outp = _outdir(out)
    _, _, stack = _build_mapping(sc, outp)
    _build_traversable(sc, stack, outp)


@main.command("plan")
@click.argument("scenario", type=click.Path(exists=True))
@click.option("--out", default="out", show_default=True)
@click.option("--seed", type=int, default=None)
@click.option("--theta", type=float, default=None)
@click.option("--task", "task_id", default=None, help="Plan one task only.")
def cmd_plan(scenario, out, seed, theta, task_id):
    """Global plans for scenario tasks over a freshly built map."""
    sc = _load(scenario, seed, theta)
    outp = _outdir(out)
    _, _, stack = _build_mapping(sc, outp)
    tmap = _build_traversable(sc, stack, outp)
    space = PlanSpace.from_traversable(tmap, inflation_radius=sc.nav.robot_radius)
    failed = False
    for task in sc.tasks:
        if task_id is not None and task.task_id != task_id:
            continue
        result = plan_variable(space, task.start[:2], task.goal, sc.planner)
        if isinstance(result, PlanFailure):
            click.echo("%s: FAILED (%s)" % (task.task_id, result.reason))
            failed = True
            continue
        short = shortcut(result, space)
        _write_path_csv(outp / ("path_%s.csv" % task.task_id), short.waypoints)
        render_plan(tmap, short.waypoints, outp / ("path_%s.png" % task.task_id),
                    raw_waypoints=result.waypoints)
        click.echo("%s: length %.2f m, %d iterations"
                   % (task.task_id, short.length, result.stats.iterations))
    if failed:
        sys.exit(1)


@main.command("simulate")
@click.argument("scenario", type=click.Path(exists=True))
@click.option("--out", default="out", show_default=True)
@click.option("--seed", type=int, default=None)
@click.option("--theta", type=float, default=None)
@click.option("--costmap-w", type=float, default=None, help="Window width, m.")
@click.option("--costmap-l", type=float, default=None, help="Window length, m.")
def cmd_simulate(scenario, out, seed, theta, costmap_w, costmap_l):
    """Closed-loop simulation of every scenario task."""
    sc = _load(scenario, seed, theta)
    outp = _outdir(out)
    env, _, stack = _build_mapping(sc, outp)
    tmap = _build_traversable(sc, stack, outp)
    ok = _simulate_tasks(sc, env, tmap, outp, costmap_w, costmap_l)
    if not ok:
        sys.exit(1)


def _simulate_tasks(sc, env, tmap, outp, costmap_w=None, costmap_l=None) -> bool:
    nav = sc.nav
    if costmap_w is not None:
        nav = replace(nav, costmap_width=costmap_w)
    if costmap_l is not None:
        nav = replace(nav, costmap_length=costmap_l)
    all_ok = True
    metrics = []
    for task in sc.tasks:
        m = run_task(env, tmap, task, nav, sc.planner,
                     obstacles=sc.obstacles.get(task.task_id, []))
        _write_trace_csv(outp / ("trace_%s.csv" % task.task_id), m.trace)
        render_trace(tmap, m.trace, outp / ("trace_%s.png" % task.task_id),
                     title="task %s" % task.task_id)
        metrics.append(_metrics_doc(m))
        click.echo("%s: %s (%s), %.2f m at %.2f m/s, %d replans"
                   % (m.task_id, "ok" if m.success else "FAILED", m.reason,
                      m.distance, m.average_speed, m.replans))
        all_ok &= m.success
    (outp / "metrics.json").write_text(json.dumps(metrics, indent=2) + "\n")
    return all_ok


@main.command("bench")
@click.option("--out", default="out", show_default=True)
@click.option("--seeds", type=int, default=100, show_default=True)
def cmd_bench(out, seeds):
    """Planner benchmark on the cluttered reference map."""
    outp = _outdir(out)
    rows = run_bench(seeds=range(seeds))
    write_bench_csv(rows, outp / "bench.csv")
    render_bench(rows, outp / "bench.png")
    click.echo("wrote %s" % (outp / "bench.csv"))


@main.command("pipeline")
@click.argument("scenario", type=click.Path(exists=True))
@click.option("--out", default="out", show_default=True)
@click.option("--seed", type=int, default=None)
@click.option("--theta", type=float, default=None)
def cmd_pipeline(scenario, out, seed, theta):
    """Full pipeline: map, traverse, plan, simulate. Exit 0 iff all tasks pass."""
    outp = _outdir(out)
    stage = "parse"
    try:
        sc = _load(scenario, seed, theta)
        stage = "map"
        env, _, stack = _build_mapping(sc, outp)
        stage = "traverse"
        tmap = _build_traversable(sc, stack, outp)
        stage = "plan"
        space = PlanSpace.from_traversable(tmap, inflation_radius=sc.nav.robot_radius)
        for task in sc.tasks:
            result = plan_variable(space, task.start[:2], task.goal, sc.planner)
            if not isinstance(result, PlanFailure):
                short = shortcut(result, space)
                _write_path_csv(outp / ("path_%s.csv" % task.task_id),
                                short.waypoints)
        stage = "simulate"
        ok = _simulate_tasks(sc, env, tmap, outp)
    except Exception as e:  # any stage error: marker file + nonzero exit
        _mark_failure(outp, stage, str(e))
        raise SystemExit("pipeline failed at stage %r: %s" % (stage, e))
    if not ok:
        _mark_failure(outp, "simulate", "one or more tasks failed")
        sys.exit(1)


if __name__ == "__main__":
    main()
