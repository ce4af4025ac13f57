"""Elastic-band local planning over a rolling robot-centered costmap.

The band is a chain of bubbles (center + clearance radius) seeded from the
global path. Consecutive bubbles must overlap; optimization pulls centers
toward their neighbours' midpoint and pushes them away from obstacles
without ever reducing the band's initial minimum clearance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .octree import FREE, OCCUPIED, UNKNOWN
from .raycast import supercover_2d
from .traverse import TraversableMap


class BandError(ValueError):
    pass


@dataclass
class LocalCostmap:
    """Axis-aligned rolling window fused from the static map and fresh laser."""

    data: np.ndarray           # trinary, indexed [ix, iy]
    origin: tuple[float, float]
    resolution: float
    width: float               # lateral extent, m
    length: float              # longitudinal extent, m

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    def to_cell(self, p) -> tuple[int, int]:
        return (int(math.floor((p[0] - self.origin[0]) / self.resolution)),
                int(math.floor((p[1] - self.origin[1]) / self.resolution)))

    def in_window(self, p) -> bool:
        c = self.to_cell(p)
        return 0 <= c[0] < self.data.shape[0] and 0 <= c[1] < self.data.shape[1]

    def clearance_at(self, p) -> float:
        if not self.in_window(p):
            return 0.0
        return float(self._clearance[self.to_cell(p)])

    def clearance_gradient(self, p) -> np.ndarray:
        """Central-difference gradient of the clearance field (per meter)."""
        c = self.to_cell(p)
        f = self._clearance
        nx, ny = f.shape
        x0, x1 = max(c[0] - 1, 0), min(c[0] + 1, nx - 1)
        y0, y1 = max(c[1] - 1, 0), min(c[1] + 1, ny - 1)
        gx = (f[x1, c[1]] - f[x0, c[1]]) / ((x1 - x0) * self.resolution or 1.0)
        gy = (f[c[0], y1] - f[c[0], y0]) / ((y1 - y0) * self.resolution or 1.0)
        return np.array([gx, gy])

    def finalize(self) -> "LocalCostmap":
        self._clearance = clearance_field(self.data, self.resolution)
        return self


def clearance_field(grid: np.ndarray, resolution: float) -> np.ndarray:
    """Exact Euclidean distance (m) to the nearest occupied-or-unknown cell.

    Obstacle cells read 0; a window with no obstacles reads the window
    diagonal everywhere (borders are treated as free).
    """
    if grid.size == 0:
        raise BandError("empty grid")
    blocked = grid != FREE
    diag = math.hypot(*grid.shape) * resolution
    if not blocked.any():
        return np.full(grid.shape, diag)
    dist = ndimage.distance_transform_edt(~blocked) * resolution
    return np.minimum(dist, diag)


def update_costmap(pose_xy, static_map: TraversableMap, laser_endpoints: np.ndarray,
                   laser_hits: np.ndarray, laser_origin, width: float = 3.0,
                   length: float = 4.0) -> LocalCostmap:
    """Re-center the window on the robot and fuse laser returns into it.

    Laser endpoint cells become occupied (overriding static free), cells the
    beam sweeps before its endpoint become free, and statically occupied
    cells always persist. Surfaces that rise through the scan plane (the far
    part of a slope) therefore show up as obstacles inside the window.
    """
    res = static_map.resolution
    half = np.array([length / 2.0, width / 2.0])
    lo = np.asarray(pose_xy, float) - half
    c0 = static_map.cell_of(lo[0] + res / 2, lo[1] + res / 2)
    nx = int(round(length / res))
    ny = int(round(width / res))
    sx, sy = static_map.shape

    window = np.full((nx, ny), UNKNOWN, np.int8)
    x0, y0 = c0
    gx0, gy0 = max(x0, 0), max(y0, 0)
    gx1, gy1 = min(x0 + nx, sx), min(y0 + ny, sy)
    if gx1 > gx0 and gy1 > gy0:
        window[gx0 - x0:gx1 - x0, gy0 - y0:gy1 - y0] = static_map.state[gx0:gx1, gy0:gy1]
    origin = (static_map.origin[0] + x0 * res, static_map.origin[1] + y0 * res)
    static_occ = window == OCCUPIED

    o = (np.asarray(laser_origin, float)[:2] - origin) / res
    swept = np.zeros((nx, ny), bool)
    hit_cells = np.zeros((nx, ny), bool)
    for i in range(len(laser_endpoints)):
        e = (laser_endpoints[i, :2] - origin) / res
        cells = supercover_2d(o, _clip_to_window(o, e, nx, ny))
        inside = ((cells[:, 0] >= 0) & (cells[:, 0] < nx)
                  & (cells[:, 1] >= 0) & (cells[:, 1] < ny))
        cells = cells[inside]
        if len(cells) == 0:
            continue
        swept[cells[:, 0], cells[:, 1]] = True
        if laser_hits[i]:
            ec = (int(math.floor(e[0])), int(math.floor(e[1])))
            if 0 <= ec[0] < nx and 0 <= ec[1] < ny:
                hit_cells[ec] = True

    window[swept] = FREE
    window[hit_cells] = OCCUPIED
    window[static_occ] = OCCUPIED
    return LocalCostmap(window, origin, res, width, length).finalize()


def _clip_to_window(o: np.ndarray, e: np.ndarray, nx: int, ny: int) -> np.ndarray:
    d = e - o
    t = 1.0
    for ax, n in ((0, nx), (1, ny)):
        if d[ax] > 0:
            t = min(t, (n - 1e-9 - o[ax]) / d[ax])
        elif d[ax] < 0:
            t = min(t, (-o[ax] + 1e-9) / d[ax])
    return o + max(t, 0.0) * d


@dataclass
class Bubble:
    center: np.ndarray
    radius: float


@dataclass
class Band:
    bubbles: list[Bubble]

    @property
    def centers(self) -> np.ndarray:
        return np.array([b.center for b in self.bubbles])

    @property
    def length(self) -> float:
        c = self.centers
        if len(c) < 2:
            return 0.0
        return float(np.sum(np.linalg.norm(np.diff(c, axis=0), axis=1)))

    def min_clearance(self) -> float:
        return min(b.radius for b in self.bubbles)


def _overlap(a: Bubble, b: Bubble) -> bool:
    return float(np.linalg.norm(a.center - b.center)) < a.radius + b.radius


def build_band(waypoints, costmap: LocalCostmap, robot_radius: float = 0.3,
               max_bubbles: int = 400) -> Band | None:
    """Seed bubbles on the waypoints and subdivide until neighbours overlap.

    Returns None when any needed bubble has clearance at or below the robot
    radius (the caller should replan).
    """
    pts = [np.asarray(p, float) for p in waypoints]
    pts = [p for p in pts if costmap.in_window(p)]
    if len(pts) < 1:
        return None
    bubbles = []
    for p in pts:
        rho = costmap.clearance_at(p)
        if rho <= robot_radius:
            return None
        bubbles.append(Bubble(p.copy(), rho))
    i = 0
    while i < len(bubbles) - 1:
        if len(bubbles) > max_bubbles:
            return None
        a, b = bubbles[i], bubbles[i + 1]
        if _overlap(a, b):
            i += 1
            continue
        mid = 0.5 * (a.center + b.center)
        rho = costmap.clearance_at(mid)
        if rho <= robot_radius:
            return None
        bubbles.insert(i + 1, Bubble(mid, rho))
    return Band(bubbles)


def band_valid(band: Band | None, costmap: LocalCostmap, robot_radius: float = 0.3) -> bool:
    """Overlap holds everywhere and every bubble still clears the robot."""
    if band is None or not band.bubbles:
        return False
    fresh = [Bubble(b.center, costmap.clearance_at(b.center)) for b in band.bubbles]
    if any(b.radius <= robot_radius for b in fresh):
        return False
    return all(_overlap(fresh[i], fresh[i + 1]) for i in range(len(fresh) - 1))


def optimize_band(band: Band, costmap: LocalCostmap, k_internal: float = 0.4,
                  k_external: float = 0.6, iterations: int = 20,
                  influence: float = 0.8, robot_radius: float = 0.3) -> Band | None:
    """Relax the band: contraction toward neighbours, repulsion from walls.

    Endpoints stay pinned. A move is rejected when it would push a bubble
    below the band's initial minimum clearance (or the robot radius), so the
    minimum clearance never degrades. Stops early once the largest center
    displacement in a sweep drops under 1e-4 m.
    """
    if band is None or len(band.bubbles) < 2:
        return band
    initial_min = band.min_clearance()
    floor_clear = max(robot_radius + 1e-6, min(initial_min, robot_radius + 1e-6))
    for _ in range(iterations):
        max_move = 0.0
        for i in range(1, len(band.bubbles) - 1):
            b = band.bubbles[i]
            prev_c = band.bubbles[i - 1].center
            next_c = band.bubbles[i + 1].center
            internal = k_internal * (0.5 * (prev_c + next_c) - b.center)
            rho = costmap.clearance_at(b.center)
            external = np.zeros(2)
            if rho < influence:
                grad = costmap.clearance_gradient(b.center)
                external = k_external * (influence - rho) * grad
            candidate = b.center + internal + external
            new_rho = costmap.clearance_at(candidate)
            if new_rho <= floor_clear:
                continue
            if new_rho < min(initial_min, rho):
                continue  # never reduce clearance below the starting minimum
            max_move = max(max_move, float(np.linalg.norm(candidate - b.center)))
            b.center = candidate
            b.radius = new_rho
        # restore the overlap chain after the sweep
        rebuilt = build_band([b.center for b in band.bubbles], costmap, robot_radius)
        if rebuilt is None:
            return None
        band = rebuilt
        if max_move < 1e-4:
            break
    return band
