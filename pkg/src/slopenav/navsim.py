"""Closed-loop navigation over a traversable map with dynamic obstacles.

Each control tick rebuilds the rolling local costmap from a fresh laser
scan, re-seeds and relaxes the elastic band over the global path, and
drives a unicycle model with pure pursuit. When the band cannot be built
(a dynamic obstacle closed the corridor) the global planner is re-run with
the obstacle footprint blocked; repeated failures abort the task.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .band import Band, build_band, optimize_band, update_costmap
from .rrt import PlanFailure, PlanSpace, PlannerConfig, plan_variable, shortcut
from .traverse import TraversableMap
from .world import Box, EnvironmentSpec, Pose, SensorIntrinsics, normalize_yaw

TRACE_COLUMNS = ("t", "x", "y", "yaw", "v", "band_length", "clearance",
                 "replan", "goal")


class NavError(ValueError):
    pass


@dataclass(frozen=True)
class NavParams:
    dt: float = 0.05               # s
    v_max: float = 1.0             # m/s
    yaw_rate_max: float = 2.5      # rad/s
    lookahead: float = 0.6         # m
    goal_tolerance: float = 0.3    # m
    robot_radius: float = 0.3      # m
    costmap_width: float = 3.0     # m, lateral
    costmap_length: float = 4.0    # m, longitudinal
    max_replans: int = 3
    max_time: float = 120.0        # s
    band_iterations: int = 10

    def __post_init__(self):
        if self.dt <= 0 or self.v_max <= 0:
            raise NavError("dt and v_max must be positive")


@dataclass(frozen=True)
class RobotState:
    x: float
    y: float
    yaw: float
    v: float = 0.0

    @property
    def position(self) -> np.ndarray:
        return np.array([self.x, self.y])


@dataclass(frozen=True)
class Task:
    task_id: str
    start: tuple[float, float, float]   # x, y, yaw
    goal: tuple[float, float]


@dataclass(frozen=True)
class DynamicObstacle:
    """Square pillar that appears mid-run at a scheduled time."""

    center: tuple[float, float]
    radius: float
    t_appear: float = 0.0
    height: float = 1.0

    def active(self, t: float) -> bool:
        return t >= self.t_appear

    def solid(self) -> Box:
        cx, cy = self.center
        r = self.radius
        return Box((cx - r, cy - r, 0.0), (cx + r, cy + r, self.height))


@dataclass
class RunMetrics:
    task_id: str
    success: bool
    reason: str
    sim_time: float
    distance: float
    replans: int
    plan_times_us: list[int]
    min_clearance: float
    trace: np.ndarray          # rows of TRACE_COLUMNS

    @property
    def average_speed(self) -> float:
        return self.distance / self.sim_time if self.sim_time > 0 else 0.0


def follow_band(state: RobotState, band: Band, goal, params: NavParams,
                clearance: float = math.inf) -> RobotState:
    """One pure-pursuit tick along the band; deterministic.

    Speed is capped at v_max, cut while the heading error exceeds 30
    degrees, scaled down in tight clearance, and zero inside the goal
    tolerance.
    """
    p = state.position
    goal = np.asarray(goal, float)
    to_go = float(np.linalg.norm(goal - p))
    if to_go <= params.goal_tolerance:
        return replace(state, v=0.0)
    target = _pursuit_target(band.centers, p, params.lookahead)
    heading = math.atan2(target[1] - state.y, target[0] - state.x)
    err = normalize_yaw(heading - state.yaw)
    w = max(-params.yaw_rate_max, min(params.yaw_rate_max, 2.0 * err))
    speed = params.v_max
    if abs(err) > math.radians(30.0):
        speed *= 0.2
    if clearance < 2.0 * params.robot_radius:
        speed *= max(clearance, 0.0) / (2.0 * params.robot_radius)
    speed = min(speed, to_go)  # ease into the goal
    return RobotState(
        x=state.x + speed * math.cos(state.yaw) * params.dt,
        y=state.y + speed * math.sin(state.yaw) * params.dt,
        yaw=normalize_yaw(state.yaw + w * params.dt),
        v=speed,
    )


def densify_path(waypoints: np.ndarray, spacing: float = 0.2) -> np.ndarray:
    """Resample a polyline so consecutive points are at most spacing apart."""
    pts = [np.asarray(waypoints[0], float)]
    for i in range(len(waypoints) - 1):
        a = np.asarray(waypoints[i], float)
        b = np.asarray(waypoints[i + 1], float)
        seg = float(np.linalg.norm(b - a))
        n = max(1, int(math.ceil(seg / spacing)))
        for k in range(1, n + 1):
            pts.append(a + (b - a) * (k / n))
    return np.array(pts)


def _progress_index(path: np.ndarray, p: np.ndarray, last: int) -> int:
    """Nearest path index at or after the last progress index."""
    ahead = path[last:]
    d = np.linalg.norm(ahead - p, axis=1)
    return last + int(np.argmin(d))


def _band_seed(path: np.ndarray, p: np.ndarray, idx: int, horizon: float) -> list:
    """Robot position plus path points up to horizon meters ahead."""
    seed = [p]
    acc = 0.0
    prev = p
    for j in range(idx + 1, len(path)):
        acc += float(np.linalg.norm(path[j] - prev))
        if acc > horizon:
            break
        seed.append(path[j])
        prev = path[j]
    return seed


def _pursuit_target(centers: np.ndarray, p: np.ndarray, lookahead: float) -> np.ndarray:
    """Point on the band polyline lookahead meters beyond the closest point."""
    d = np.linalg.norm(centers - p, axis=1)
    i = int(np.argmin(d))
    acc = 0.0
    prev = centers[i]
    for j in range(i + 1, len(centers)):
        step = float(np.linalg.norm(centers[j] - prev))
        if acc + step >= lookahead:
            t = (lookahead - acc) / max(step, 1e-9)
            return prev + t * (centers[j] - prev)
        acc += step
        prev = centers[j]
    return centers[-1]


def _plan_global(tmap: TraversableMap, start, goal, cfg: PlannerConfig,
                 robot_radius: float, extra_blocked=None):
    space = PlanSpace.from_traversable(tmap, inflation_radius=robot_radius,
                                       extra_blocked=extra_blocked)
    # inflation may swallow the robot's own cell right after an obstacle
    # appears; plan from the closest free cell instead
    result = plan_variable(space, space.nearest_free(start), goal, cfg)
    if isinstance(result, PlanFailure):
        return None, result.stats.wall_time_us
    return shortcut(result, space).waypoints, result.stats.wall_time_us


def obstacle_overlay(tmap: TraversableMap, obstacles, margin: float = 0.0) -> np.ndarray | None:
    """Boolean grid of cells covered by active obstacle footprints."""
    if not obstacles:
        return None
    mask = np.zeros(tmap.shape, bool)
    for ob in obstacles:
        r = ob.radius + margin
        c0 = tmap.cell_of(ob.center[0] - r, ob.center[1] - r)
        c1 = tmap.cell_of(ob.center[0] + r, ob.center[1] + r)
        x0, y0 = max(c0[0], 0), max(c0[1], 0)
        x1 = min(c1[0] + 1, tmap.shape[0])
        y1 = min(c1[1] + 1, tmap.shape[1])
        if x1 > x0 and y1 > y0:
            mask[x0:x1, y0:y1] = True
    return mask


def run_task(env: EnvironmentSpec, tmap: TraversableMap, task: Task,
             params: NavParams = NavParams(), cfg: PlannerConfig = PlannerConfig(),
             obstacles=(), sensor: SensorIntrinsics = SensorIntrinsics()) -> RunMetrics:
    """Drive one start-to-goal task; returns metrics and a per-tick trace."""
    state = RobotState(float(task.start[0]), float(task.start[1]),
                       float(task.start[2]))
    goal = np.array(task.goal, float)

    path, t_plan = _plan_global(tmap, (state.x, state.y), goal, cfg,
                                params.robot_radius)
    plan_times = [t_plan]
    if path is None:
        return RunMetrics(task.task_id, False, "no initial global path", 0.0,
                          0.0, 0, plan_times, math.inf,
                          np.empty((0, len(TRACE_COLUMNS))))
    path = densify_path(path)

    t = 0.0
    distance = 0.0
    replans = 0
    min_clear = math.inf
    idx = 0
    trace: list[tuple] = []
    horizon = params.costmap_width / 2.0 + params.lookahead
    reason = "time limit exceeded"
    success = False

    def clamp_xy(x, y):
        return (min(max(x, env.bounds_min[0]), env.bounds_max[0]),
                min(max(y, env.bounds_min[1]), env.bounds_max[1]))

    while t < params.max_time:
        p = state.position
        if float(np.linalg.norm(p - goal)) <= params.goal_tolerance:
            success, reason = True, "goal reached"
            trace.append((t, state.x, state.y, state.yaw, 0.0, 0.0,
                          min_clear, 0.0, 1.0))
            break

        active = [ob for ob in obstacles if ob.active(t)]
        cx, cy = clamp_xy(state.x, state.y)
        z = env.surface_height(cx, cy)
        pose = Pose(cx, cy, z, state.yaw)
        solids = [ob.solid() for ob in active]
        ends, hits = env.laser_endpoints(pose, sensor, extra_solids=solids)
        costmap = update_costmap(p, tmap, ends, hits,
                                 (cx, cy, z + sensor.laser_height),
                                 width=params.costmap_width,
                                 length=params.costmap_length)

        clear = costmap.clearance_at(p)
        min_clear = min(min_clear, clear)
        if clear <= 0.0:
            reason = "collision"
            break

        idx = _progress_index(path, p, idx)
        seed = _band_seed(path, p, idx, horizon)
        band = build_band(seed, costmap, params.robot_radius)
        if band is not None:
            band = optimize_band(band, costmap, iterations=params.band_iterations,
                                 robot_radius=params.robot_radius)

        if band is None:
            replans += 1
            trace.append((t, state.x, state.y, state.yaw, 0.0, 0.0, clear,
                          1.0, 0.0))
            if replans > params.max_replans:
                reason = "replan limit exceeded"
                break
            overlay = obstacle_overlay(tmap, active, params.robot_radius)
            new_path, t_plan = _plan_global(tmap, p, goal, cfg,
                                            params.robot_radius,
                                            extra_blocked=overlay)
            plan_times.append(t_plan)
            if new_path is None:
                reason = "replanning failed"
                break
            path = densify_path(new_path)
            idx = 0
            t += params.dt
            continue

        state = follow_band(state, band, goal, params, clear)
        distance += state.v * params.dt
        trace.append((t, state.x, state.y, state.yaw, state.v, band.length,
                      clear, 0.0, 0.0))
        t += params.dt

    return RunMetrics(task.task_id, success, reason, t, distance, replans,
                      plan_times, min_clear,
                      np.array(trace).reshape(-1, len(TRACE_COLUMNS)))
