"""Global planning on the traversable map.

plan_variable implements the step-size-free bidirectional RRT: a sampled
point is joined to its nearest tree node by an unbounded straight segment,
truncated just short of the first obstacle when blocked, and the start and
goal trees are connected whenever their newest nodes can see each other.
plan_fixed is the classic single-tree RRT baseline with step size sigma.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .octree import FREE, UNKNOWN, OCCUPIED
from .raycast import supercover_2d
from .traverse import TraversableMap


class PlanError(ValueError):
    pass


@dataclass(frozen=True)
class PlannerConfig:
    seed: int = 0
    max_iterations: int = 5000
    connect_tolerance: float = 0.3   # m
    step_size: float = 1.0           # m, fixed-step baseline only
    goal_bias: float = 0.05          # fixed-step baseline only

    def __post_init__(self):
        if self.max_iterations < 1:
            raise PlanError("max_iterations must be >= 1")


@dataclass
class PlanStats:
    iterations: int = 0
    nodes: int = 0
    wall_time_us: int = 0


@dataclass
class PlanPath:
    waypoints: np.ndarray      # (n, 2) metric points
    stats: PlanStats

    @property
    def length(self) -> float:
        if len(self.waypoints) < 2:
            return 0.0
        return float(np.sum(np.linalg.norm(np.diff(self.waypoints, axis=0), axis=1)))


@dataclass
class PlanFailure:
    stats: PlanStats
    reason: str = "max iterations reached"


class PlanSpace:
    """Free/obstacle view of a trinary grid with footprint inflation."""

    def __init__(self, grid: np.ndarray, origin=(0.0, 0.0), resolution: float = 1.0,
                 inflation_radius: float = 0.0):
        if inflation_radius < 0:
            raise PlanError("inflation radius must be >= 0")
        self.origin = (float(origin[0]), float(origin[1]))
        self.resolution = float(resolution)
        self.grid = grid
        blocked = grid != FREE  # occupied and unknown both obstruct
        if inflation_radius > 0:
            cells = int(math.ceil(inflation_radius / resolution))
            ball = _disc(cells)
            blocked = ndimage.binary_dilation(blocked, structure=ball)
        self.blocked = blocked
        self.free_cells = np.argwhere(~blocked)
        if len(self.free_cells) == 0:
            raise PlanError("no free space after inflation")

    @classmethod
    def from_traversable(cls, tmap: TraversableMap, inflation_radius: float = 0.0,
                         extra_blocked: np.ndarray | None = None) -> "PlanSpace":
        grid = tmap.state.copy()
        if extra_blocked is not None:
            grid[extra_blocked] = OCCUPIED
        return cls(grid, tmap.origin, tmap.resolution, inflation_radius)

    # -- coordinates -------------------------------------------------------

    def to_cell(self, p) -> tuple[int, int]:
        return (int(math.floor((p[0] - self.origin[0]) / self.resolution)),
                int(math.floor((p[1] - self.origin[1]) / self.resolution)))

    def cell_center(self, c) -> np.ndarray:
        return np.array([self.origin[0] + (c[0] + 0.5) * self.resolution,
                         self.origin[1] + (c[1] + 0.5) * self.resolution])

    def in_grid(self, c) -> bool:
        return 0 <= c[0] < self.blocked.shape[0] and 0 <= c[1] < self.blocked.shape[1]

    def is_free(self, p) -> bool:
        c = self.to_cell(p)
        return self.in_grid(c) and not self.blocked[c]

    def nearest_free(self, p) -> np.ndarray:
        """p itself when free, else the center of the closest free cell."""
        p = np.asarray(p, float)
        if self.is_free(p):
            return p
        c = np.array(self.to_cell(p))
        d2 = np.sum(np.square(self.free_cells - c), axis=1)
        return self.cell_center(self.free_cells[int(np.argmin(d2))])

    def sample_free(self, rng: np.random.Generator) -> np.ndarray:
        """Uniform over free cells, jittered inside the cell."""
        c = self.free_cells[rng.integers(len(self.free_cells))]
        jitter = rng.uniform(0.05, 0.95, 2)
        return np.array([self.origin[0] + (c[0] + jitter[0]) * self.resolution,
                         self.origin[1] + (c[1] + jitter[1]) * self.resolution])


def _disc(radius_cells: int) -> np.ndarray:
    n = 2 * radius_cells + 1
    yy, xx = np.mgrid[:n, :n] - radius_cells
    return xx * xx + yy * yy <= radius_cells * radius_cells


@dataclass(frozen=True)
class SegmentFree:
    pass


@dataclass(frozen=True)
class SegmentBlocked:
    last_free: np.ndarray | None  # None when no progress is possible


def segment_check(space: PlanSpace, a, b):
    """Walk every supercover cell from a to b.

    SegmentFree when all are free; otherwise SegmentBlocked carrying the
    center of the last free cell backed off one extra cell toward a.
    """
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    if not space.is_free(a):
        raise PlanError("segment start is not in free space")
    ga = (a - space.origin) / space.resolution
    gb = (b - space.origin) / space.resolution
    cells = supercover_2d(ga, gb)
    nx, ny = space.blocked.shape
    inside = ((cells[:, 0] >= 0) & (cells[:, 0] < nx)
              & (cells[:, 1] >= 0) & (cells[:, 1] < ny))
    bad = ~inside
    bad[inside] = space.blocked[cells[inside, 0], cells[inside, 1]]
    if not bad.any():
        return SegmentFree()
    # back off one cell from the obstacle: stop at the last free cell
    j = int(np.argmax(bad)) - 1
    if j < 1:
        return SegmentBlocked(None)
    return SegmentBlocked(space.cell_center(cells[j]))


class PlanTree:
    def __init__(self, root: np.ndarray):
        self.points = np.empty((64, 2))
        self.points[0] = root
        self.parents = [-1]
        self.size = 1

    def add(self, point: np.ndarray, parent: int) -> int:
        if self.size == len(self.points):
            self.points = np.vstack([self.points, np.empty_like(self.points)])
        self.points[self.size] = point
        self.parents.append(parent)
        self.size += 1
        return self.size - 1

    def nearest(self, q) -> int:
        """Index of the closest node; ties go to the earliest insertion."""
        pts = self.points[:self.size]
        d2 = np.square(pts[:, 0] - q[0]) + np.square(pts[:, 1] - q[1])
        return int(np.argmin(d2))  # argmin returns the first minimum

    def node(self, i: int) -> np.ndarray:
        return self.points[i].copy()

    def path_to_root(self, i: int) -> list[np.ndarray]:
        out = []
        while i >= 0:
            out.append(self.points[i].copy())
            i = self.parents[i]
        return out


def nearest(tree: PlanTree, point) -> np.ndarray:
    if tree.size == 0:
        raise PlanError("nearest on an empty tree")
    return tree.node(tree.nearest(np.asarray(point, float)))


def try_connect(tree_a: PlanTree, tree_b: PlanTree, space: PlanSpace,
                tolerance: float, new_index: int | None = None):
    """Join the newest node of tree_a to its nearest node in tree_b.

    Succeeds when they are within tolerance or see each other over a free
    segment; returns the waypoint list from tree_a's root to tree_b's root.
    """
    if tree_a.size == 0 or tree_b.size == 0:
        raise PlanError("try_connect on an empty tree")
    ia = tree_a.size - 1 if new_index is None else new_index
    pa = tree_a.node(ia)
    ib = tree_b.nearest(pa)
    pb = tree_b.node(ib)
    close = float(np.linalg.norm(pa - pb)) <= tolerance
    if not close and not isinstance(segment_check(space, pa, pb), SegmentFree):
        return None
    first = tree_a.path_to_root(ia)[::-1]
    second = tree_b.path_to_root(ib)
    return first + second


def _extend_unbounded(tree: PlanTree, space: PlanSpace, target: np.ndarray) -> int | None:
    """Connect target straight to the tree, truncating at obstacles."""
    ni = tree.nearest(target)
    near = tree.node(ni)
    res = segment_check(space, near, target)
    if isinstance(res, SegmentFree):
        new = target
    elif res.last_free is None:
        return None
    else:
        new = res.last_free
        # the truncated chord can differ from the sampled line; re-verify
        if not isinstance(segment_check(space, near, new), SegmentFree):
            return None
    if float(np.linalg.norm(new - near)) < space.resolution * 0.5:
        return None
    return tree.add(new, ni)


def plan_variable(space: PlanSpace, q_start, q_goal, cfg: PlannerConfig):
    """Bidirectional variable step size RRT (no sigma to tune)."""
    q_s = np.asarray(q_start, float)
    q_g = np.asarray(q_goal, float)
    t0 = time.perf_counter()
    if not space.is_free(q_s):
        raise PlanError("start is not in free space")
    if not space.is_free(q_g):
        raise PlanError("goal is not in free space")
    # direct connection first: l_init free means we are done in 0 iterations
    if isinstance(segment_check(space, q_s, q_g), SegmentFree):
        stats = PlanStats(0, 2, _us_since(t0))
        return PlanPath(np.vstack([q_s, q_g]), stats)

    rng = np.random.default_rng(cfg.seed)
    trees = (PlanTree(q_s), PlanTree(q_g))
    for it in range(1, cfg.max_iterations + 1):
        joined = None
        for i, tree in enumerate(trees):
            sample = space.sample_free(rng)
            new_index = _extend_unbounded(tree, space, sample)
            if new_index is None:
                continue
            other = trees[1 - i]
            joined = try_connect(tree, other, space, cfg.connect_tolerance, new_index)
            if joined is not None:
                if i == 1:  # tree runs goal -> start; flip to start -> goal
                    joined = joined[::-1]
                break
        if joined is not None:
            stats = PlanStats(it, trees[0].size + trees[1].size, _us_since(t0))
            return PlanPath(_dedupe(np.array(joined)), stats)
    stats = PlanStats(cfg.max_iterations, trees[0].size + trees[1].size, _us_since(t0))
    return PlanFailure(stats)


def plan_fixed(space: PlanSpace, q_start, q_goal, sigma: float, cfg: PlannerConfig):
    """Classic RRT with fixed extension step sigma and 5% goal bias."""
    if sigma <= 0:
        raise PlanError("sigma must be positive")
    q_s = np.asarray(q_start, float)
    q_g = np.asarray(q_goal, float)
    t0 = time.perf_counter()
    if not space.is_free(q_s):
        raise PlanError("start is not in free space")
    if not space.is_free(q_g):
        raise PlanError("goal is not in free space")
    rng = np.random.default_rng(cfg.seed)
    tree = PlanTree(q_s)
    for it in range(1, cfg.max_iterations + 1):
        sample = q_g if rng.random() < cfg.goal_bias else space.sample_free(rng)
        ni = tree.nearest(sample)
        near = tree.node(ni)
        delta = sample - near
        dist = float(np.linalg.norm(delta))
        if dist < 1e-12:
            continue
        new = sample if dist <= sigma else near + delta * (sigma / dist)
        if not space.is_free(new):
            continue
        if not isinstance(segment_check(space, near, new), SegmentFree):
            continue
        idx = tree.add(new, ni)
        if (float(np.linalg.norm(new - q_g)) <= cfg.connect_tolerance
                and isinstance(segment_check(space, new, q_g), SegmentFree)):
            pts = tree.path_to_root(idx)[::-1] + [q_g]
            stats = PlanStats(it, tree.size, _us_since(t0))
            return PlanPath(_dedupe(np.array(pts)), stats)
    return PlanFailure(PlanStats(cfg.max_iterations, tree.size, _us_since(t0)))


def shortcut(path: PlanPath, space: PlanSpace) -> PlanPath:
    """Greedy waypoint elision keeping every remaining segment free."""
    pts = [np.asarray(p, float) for p in path.waypoints]
    i = 0
    out = [pts[0]]
    while i < len(pts) - 1:
        j = len(pts) - 1
        while j > i + 1:
            if isinstance(segment_check(space, pts[i], pts[j]), SegmentFree):
                break
            j -= 1
        out.append(pts[j])
        i = j
    return PlanPath(np.array(out), path.stats)


def _dedupe(pts: np.ndarray) -> np.ndarray:
    keep = [0]
    for i in range(1, len(pts)):
        if np.linalg.norm(pts[i] - pts[keep[-1]]) > 1e-9:
            keep.append(i)
    return pts[keep]


def _us_since(t0: float) -> int:
    return int((time.perf_counter() - t0) * 1e6)
