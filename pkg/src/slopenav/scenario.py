"""Scenario files: one JSON document binding an environment fixture, the
mapping sweep, classifier/planner parameters, tasks, and the obstacle
schedule. Parsing is strict — unknown keys are rejected and every violation
names the offending field path — so experiment records stay honest.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from .navsim import DynamicObstacle, NavParams, Task
from .rrt import PlannerConfig


class ScenarioError(ValueError):
    pass


@dataclass(frozen=True)
class OctreeParams:
    resolution: float = 0.05
    p_hit: float = 0.7
    p_miss: float = 0.4
    p_occ: float = 0.7


@dataclass(frozen=True)
class LayerParams:
    count: int = 4
    spacing: float = 0.25
    z_base: float = -0.05


@dataclass(frozen=True)
class SweepParams:
    routes: tuple            # tuple of waypoint polylines [[x, y], ...]
    spacing: float = 0.25
    scan_yaws: tuple = (0.0,)   # extra headings scanned at each pose, rad


@dataclass(frozen=True)
class Scenario:
    environment: Path
    seed: int
    theta: float                 # rad
    octree: OctreeParams
    layers: LayerParams
    sweep: SweepParams
    planner: PlannerConfig
    nav: NavParams
    tasks: tuple                 # of Task
    obstacles: dict              # task_id -> list[DynamicObstacle]


def _expect(doc: dict, path: str, allowed: set, required: set) -> None:
    unknown = set(doc) - allowed
    if unknown:
        raise ScenarioError(f"{path}: unknown key {sorted(unknown)[0]!r}")
    missing = required - set(doc)
    if missing:
        raise ScenarioError(f"{path}: missing key {sorted(missing)[0]!r}")


def _number(doc: dict, key: str, path: str, lo=None, hi=None, default=None):
    if key not in doc:
        return default
    v = doc[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ScenarioError(f"{path}.{key}: expected a number")
    if lo is not None and v <= lo:
        raise ScenarioError(f"{path}.{key}: must be > {lo}")
    if hi is not None and v >= hi:
        raise ScenarioError(f"{path}.{key}: must be < {hi}")
    return float(v)


def _point(v, path: str, n: int) -> tuple:
    if (not isinstance(v, (list, tuple)) or len(v) != n
            or any(isinstance(c, bool) or not isinstance(c, (int, float)) for c in v)):
        raise ScenarioError(f"{path}: expected {n} numbers")
    return tuple(float(c) for c in v)


def parse_scenario(doc: dict, base_dir: str | Path = ".") -> Scenario:
    if not isinstance(doc, dict):
        raise ScenarioError("scenario: expected a JSON object")
    _expect(doc, "scenario",
            {"environment", "seed", "theta_deg", "octree", "layers", "sweep",
             "planner", "nav", "tasks", "obstacles"},
            {"environment", "theta_deg", "sweep", "tasks"})

    env = Path(base_dir) / str(doc["environment"])
    if not env.is_file():
        raise ScenarioError(f"environment: file not found: {env}")

    seed = doc.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int):
        raise ScenarioError("seed: expected an integer")

    theta_deg = _number(doc, "theta_deg", "scenario", lo=0.0, hi=90.0)
    if theta_deg is None:
        raise ScenarioError("theta_deg: missing")

    oc = doc.get("octree", {})
    _expect(oc, "octree", {"resolution", "p_hit", "p_miss", "p_occ"}, set())
    octree = OctreeParams(
        resolution=_number(oc, "resolution", "octree", lo=0.0, default=0.05),
        p_hit=_number(oc, "p_hit", "octree", lo=0.5, hi=1.0, default=0.7),
        p_miss=_number(oc, "p_miss", "octree", lo=0.0, hi=0.5, default=0.4),
        p_occ=_number(oc, "p_occ", "octree", lo=0.0, hi=1.0, default=0.7))

    ly = doc.get("layers", {})
    _expect(ly, "layers", {"count", "spacing", "z_base"}, set())
    count = ly.get("count", 4)
    if isinstance(count, bool) or not isinstance(count, int) or count < 2:
        raise ScenarioError("layers.count: expected an integer >= 2")
    layers = LayerParams(
        count=count,
        spacing=_number(ly, "spacing", "layers", lo=0.0, default=0.25),
        z_base=_number(ly, "z_base", "layers", default=-0.05))

    sw = doc["sweep"]
    _expect(sw, "sweep", {"routes", "spacing", "scan_yaws"}, {"routes"})
    routes = sw["routes"]
    if not isinstance(routes, list) or not routes:
        raise ScenarioError("sweep.routes: expected a non-empty list")
    parsed_routes = []
    for i, route in enumerate(routes):
        if not isinstance(route, list) or len(route) < 1:
            raise ScenarioError(f"sweep.routes[{i}]: expected a waypoint list")
        parsed_routes.append(tuple(_point(w, f"sweep.routes[{i}][{j}]", 2)
                                   for j, w in enumerate(route)))
    yaws = sw.get("scan_yaws", [0.0])
    if not isinstance(yaws, list) or not yaws:
        raise ScenarioError("sweep.scan_yaws: expected a non-empty list")
    sweep = SweepParams(
        routes=tuple(parsed_routes),
        spacing=_number(sw, "spacing", "sweep", lo=0.0, default=0.25),
        scan_yaws=tuple(math.radians(_number({"y": v}, "y", f"sweep.scan_yaws[{k}]"))
                        for k, v in enumerate(yaws)))

    pl = doc.get("planner", {})
    _expect(pl, "planner", {"max_iterations", "connect_tolerance", "step_size",
                            "goal_bias"}, set())
    max_it = pl.get("max_iterations", 5000)
    if isinstance(max_it, bool) or not isinstance(max_it, int) or max_it < 1:
        raise ScenarioError("planner.max_iterations: expected an integer >= 1")
    planner = PlannerConfig(
        seed=seed,
        max_iterations=max_it,
        connect_tolerance=_number(pl, "connect_tolerance", "planner", lo=0.0,
                                  default=0.3),
        step_size=_number(pl, "step_size", "planner", lo=0.0, default=1.0),
        goal_bias=_number(pl, "goal_bias", "planner", lo=0.0, hi=1.0,
                          default=0.05))

    nv = doc.get("nav", {})
    _expect(nv, "nav", {"dt", "v_max", "lookahead", "goal_tolerance",
                        "robot_radius", "costmap_width", "costmap_length",
                        "max_replans", "max_time"}, set())
    max_replans = nv.get("max_replans", 3)
    if isinstance(max_replans, bool) or not isinstance(max_replans, int):
        raise ScenarioError("nav.max_replans: expected an integer")
    nav = NavParams(
        dt=_number(nv, "dt", "nav", lo=0.0, default=0.05),
        v_max=_number(nv, "v_max", "nav", lo=0.0, default=1.0),
        lookahead=_number(nv, "lookahead", "nav", lo=0.0, default=0.6),
        goal_tolerance=_number(nv, "goal_tolerance", "nav", lo=0.0, default=0.3),
        robot_radius=_number(nv, "robot_radius", "nav", lo=0.0, default=0.3),
        costmap_width=_number(nv, "costmap_width", "nav", lo=0.0, default=3.0),
        costmap_length=_number(nv, "costmap_length", "nav", lo=0.0, default=4.0),
        max_replans=max_replans,
        max_time=_number(nv, "max_time", "nav", lo=0.0, default=120.0))

    raw_tasks = doc["tasks"]
    if not isinstance(raw_tasks, list) or not raw_tasks:
        raise ScenarioError("tasks: expected a non-empty list")
    tasks = []
    seen = set()
    for i, tk in enumerate(raw_tasks):
        if not isinstance(tk, dict):
            raise ScenarioError(f"tasks[{i}]: expected an object")
        _expect(tk, f"tasks[{i}]", {"id", "start", "goal"}, {"id", "start", "goal"})
        tid = tk["id"]
        if not isinstance(tid, str) or not tid:
            raise ScenarioError(f"tasks[{i}].id: expected a non-empty string")
        if tid in seen:
            raise ScenarioError(f"tasks[{i}].id: duplicate task id {tid!r}")
        seen.add(tid)
        sx, sy, syaw = _point(tk["start"], f"tasks[{i}].start", 3)
        goal = _point(tk["goal"], f"tasks[{i}].goal", 2)
        tasks.append(Task(tid, (sx, sy, math.radians(syaw)), goal))

    obstacles: dict = {}
    for i, ob in enumerate(doc.get("obstacles", [])):
        if not isinstance(ob, dict):
            raise ScenarioError(f"obstacles[{i}]: expected an object")
        _expect(ob, f"obstacles[{i}]", {"task", "center", "radius", "t_appear"},
                {"task", "center", "radius"})
        tid = ob["task"]
        if tid not in seen:
            raise ScenarioError(f"obstacles[{i}].task: unknown task id {tid!r}")
        center = _point(ob["center"], f"obstacles[{i}].center", 2)
        radius = _number(ob, "radius", f"obstacles[{i}]", lo=0.0)
        t_appear = _number(ob, "t_appear", f"obstacles[{i}]", default=0.0)
        obstacles.setdefault(tid, []).append(
            DynamicObstacle(center, radius, t_appear))

    return Scenario(env, seed, math.radians(theta_deg), octree, layers, sweep,
                    planner, nav, tuple(tasks), obstacles)


def load_scenario(path: str | Path) -> Scenario:
    path = Path(path)
    with open(path) as f:
        doc = json.load(f)
    return parse_scenario(doc, path.parent)
