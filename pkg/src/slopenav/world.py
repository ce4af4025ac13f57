"""Analytic 3D worlds and simulated range sensing.

Worlds are unions of axis-aligned convex solids (boxes, ramps, staircases)
sitting on an infinite floor plane at z = 0. Everything is exact: surface
heights come from closed-form expressions and rays are intersected with
half-space representations, so tests can use the world itself as oracle.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

AXES = {"x": (0, +1.0), "+x": (0, +1.0), "-x": (0, -1.0),
        "y": (1, +1.0), "+y": (1, +1.0), "-y": (1, -1.0)}


class WorldError(ValueError):
    pass


def normalize_yaw(yaw: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    y = math.fmod(yaw, 2.0 * math.pi)
    if y <= -math.pi:
        y += 2.0 * math.pi
    elif y > math.pi:
        y -= 2.0 * math.pi
    return y


@dataclass(frozen=True)
class Pose:
    x: float
    y: float
    z: float = 0.0
    yaw: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "yaw", normalize_yaw(self.yaw))

    @property
    def xy(self) -> np.ndarray:
        return np.array([self.x, self.y])


@dataclass(frozen=True)
class Box:
    min: tuple[float, float, float]
    max: tuple[float, float, float]

    def __post_init__(self):
        if any(a >= b for a, b in zip(self.min, self.max)):
            raise WorldError(f"degenerate box {self.min}..{self.max}")

    def top_height(self, x: float, y: float) -> float | None:
        if self.min[0] <= x <= self.max[0] and self.min[1] <= y <= self.max[1]:
            return self.max[2]
        return None

    def halfspaces(self):
        # rows of (normal, offset) with n.p <= c inside
        n = np.array([[-1, 0, 0], [1, 0, 0], [0, -1, 0], [0, 1, 0], [0, 0, -1], [0, 0, 1]], float)
        c = np.array([-self.min[0], self.max[0], -self.min[1], self.max[1], -self.min[2], self.max[2]], float)
        return n, c


@dataclass(frozen=True)
class Ramp:
    """Solid wedge over a base rectangle, surface rising along an axis."""

    base_min: tuple[float, float]
    base_max: tuple[float, float]
    low: float
    high: float
    axis: str = "x"

    def __post_init__(self):
        if self.high < self.low:
            raise WorldError("ramp high edge below low edge")
        if self.axis not in AXES:
            raise WorldError(f"bad ramp axis {self.axis!r}")

    def surface_at(self, x: float, y: float) -> float | None:
        if not (self.base_min[0] <= x <= self.base_max[0] and self.base_min[1] <= y <= self.base_max[1]):
            return None
        ax, sgn = AXES[self.axis]
        p = (x, y)[ax]
        lo, hi = self.base_min[ax], self.base_max[ax]
        t = (p - lo) / (hi - lo)
        if sgn < 0:
            t = 1.0 - t
        return self.low + t * (self.high - self.low)

    def halfspaces(self):
        ax, sgn = AXES[self.axis]
        lo, hi = self.base_min[ax], self.base_max[ax]
        slope = sgn * (self.high - self.low) / (hi - lo)
        # surface plane: z = low + slope*(p - anchor); anchor at lo for +, hi for -
        anchor = lo if sgn > 0 else hi
        n = [[-1, 0, 0], [1, 0, 0], [0, -1, 0], [0, 1, 0], [0, 0, -1]]
        c = [-self.base_min[0], self.base_max[0], -self.base_min[1], self.base_max[1], 0.0]
        # z - slope*p <= low - slope*anchor
        plane_n = [0.0, 0.0, 1.0]
        plane_n[ax] = -slope
        n.append(plane_n)
        c.append(self.low - slope * anchor)
        return np.array(n, float), np.array(c, float)


@dataclass(frozen=True)
class Staircase:
    """Run of solid steps; tread i (0-based) tops out at (i+1)*rise."""

    base_min: tuple[float, float]
    base_max: tuple[float, float]
    steps: int
    rise: float
    run: float
    axis: str = "x"

    def __post_init__(self):
        if self.steps < 1 or self.rise <= 0 or self.run <= 0:
            raise WorldError("staircase needs steps >= 1, rise > 0, run > 0")
        if self.axis not in AXES:
            raise WorldError(f"bad staircase axis {self.axis!r}")
        ax, _ = AXES[self.axis]
        extent = self.base_max[ax] - self.base_min[ax]
        if abs(extent - self.steps * self.run) > 1e-6:
            raise WorldError("staircase base extent must equal steps * run")

    def tread_index(self, x: float, y: float) -> int | None:
        if not (self.base_min[0] <= x <= self.base_max[0] and self.base_min[1] <= y <= self.base_max[1]):
            return None
        ax, sgn = AXES[self.axis]
        p = (x, y)[ax]
        if sgn > 0:
            t = (p - self.base_min[ax]) / self.run
        else:
            t = (self.base_max[ax] - p) / self.run
        return min(int(t), self.steps - 1)

    def surface_at(self, x: float, y: float) -> float | None:
        i = self.tread_index(x, y)
        if i is None:
            return None
        return (i + 1) * self.rise

    def step_boxes(self) -> list[Box]:
        ax, sgn = AXES[self.axis]
        boxes = []
        for i in range(self.steps):
            lo = list(self.base_min)
            hi = list(self.base_max)
            if sgn > 0:
                lo[ax] = self.base_min[ax] + i * self.run
                hi[ax] = self.base_min[ax] + (i + 1) * self.run
            else:
                hi[ax] = self.base_max[ax] - i * self.run
                lo[ax] = self.base_max[ax] - (i + 1) * self.run
            boxes.append(Box((lo[0], lo[1], 0.0), (hi[0], hi[1], (i + 1) * self.rise)))
        return boxes


@dataclass(frozen=True)
class SensorIntrinsics:
    """Depth camera + 2D laser parameters."""

    cam_width: int = 64
    cam_height: int = 48
    cam_hfov: float = math.radians(58.0)
    cam_max_range: float = 5.0
    cam_height_above_base: float = 0.8
    cam_pitch: float = math.radians(-25.0)  # negative looks down
    laser_fov: float = math.radians(270.0)
    laser_beams: int = 271
    laser_max_range: float = 30.0
    laser_height: float = 0.55

    def __post_init__(self):
        if not (0 < self.cam_hfov < 2 * math.pi and 0 < self.laser_fov < 2 * math.pi):
            raise WorldError("FOV must be in (0, 2*pi)")
        if self.cam_max_range <= 0 or self.laser_max_range <= 0:
            raise WorldError("ranges must be positive")


class EnvironmentSpec:
    """Declarative world: bounds plus primitive solids on a z=0 floor."""

    def __init__(self, bounds_min, bounds_max, primitives=()):
        self.bounds_min = np.asarray(bounds_min, float)
        self.bounds_max = np.asarray(bounds_max, float)
        if np.any(self.bounds_min >= self.bounds_max):
            raise WorldError("degenerate bounds")
        self.primitives = list(primitives)
        for p in self.primitives:
            self._check_within_bounds(p)
        self._solids = self._build_solids(self.primitives)

    def _check_within_bounds(self, p) -> None:
        if isinstance(p, Box):
            lo, hi = np.array(p.min), np.array(p.max)
        else:
            lo = np.array([p.base_min[0], p.base_min[1], 0.0])
            top = p.high if isinstance(p, Ramp) else p.steps * p.rise
            hi = np.array([p.base_max[0], p.base_max[1], top])
        if np.any(lo < self.bounds_min - 1e-9) or np.any(hi > self.bounds_max + 1e-9):
            raise WorldError(f"primitive {p} outside bounds")

    @staticmethod
    def _build_solids(primitives) -> list[tuple[np.ndarray, np.ndarray]]:
        solids = []
        for p in primitives:
            if isinstance(p, Box):
                solids.append(p.halfspaces())
            elif isinstance(p, Ramp):
                solids.append(p.halfspaces())
            elif isinstance(p, Staircase):
                solids.extend(b.halfspaces() for b in p.step_boxes())
            else:
                raise WorldError(f"unknown primitive {p!r}")
        return solids

    def in_bounds_xy(self, x: float, y: float) -> bool:
        return (self.bounds_min[0] <= x <= self.bounds_max[0]
                and self.bounds_min[1] <= y <= self.bounds_max[1])

    # -- surface queries ---------------------------------------------------

    def surface_height(self, x: float, y: float) -> float:
        if not self.in_bounds_xy(x, y):
            raise WorldError(f"surface query ({x}, {y}) outside bounds")
        h = 0.0
        for p in self.primitives:
            top = p.top_height(x, y) if isinstance(p, Box) else p.surface_at(x, y)
            if top is not None and top > h:
                h = top
        return h

    def surface_grid(self, resolution: float) -> np.ndarray:
        """Surface heights sampled at cell centers over the xy bounds."""
        nx = int(math.ceil((self.bounds_max[0] - self.bounds_min[0]) / resolution))
        ny = int(math.ceil((self.bounds_max[1] - self.bounds_min[1]) / resolution))
        H = np.zeros((nx, ny))
        for i in range(nx):
            x = self.bounds_min[0] + (i + 0.5) * resolution
            for j in range(ny):
                y = self.bounds_min[1] + (j + 0.5) * resolution
                H[i, j] = self.surface_height(min(x, self.bounds_max[0]), min(y, self.bounds_max[1]))
        return H

    def surface_pitch(self, pose: Pose, probe: float = 0.05) -> float:
        """Ground pitch along the heading; positive is nose-up."""
        c, s = math.cos(pose.yaw), math.sin(pose.yaw)
        xa = min(max(pose.x - c * probe, self.bounds_min[0]), self.bounds_max[0])
        ya = min(max(pose.y - s * probe, self.bounds_min[1]), self.bounds_max[1])
        xb = min(max(pose.x + c * probe, self.bounds_min[0]), self.bounds_max[0])
        yb = min(max(pose.y + s * probe, self.bounds_min[1]), self.bounds_max[1])
        ds = math.hypot(xb - xa, yb - ya)
        if ds < 1e-9:
            return 0.0
        return math.atan2(self.surface_height(xb, yb) - self.surface_height(xa, ya), ds)

    # -- ray casting -------------------------------------------------------

    def cast_ray(self, origin, direction, max_range: float,
                 extra_solids=()) -> tuple[np.ndarray, float] | None:
        """Nearest hit with any solid (floor included) within max_range.

        Returns (point, distance) or None. An origin inside a solid hits at
        distance 0.
        """
        o = np.asarray(origin, float)
        d = np.asarray(direction, float)
        if abs(np.linalg.norm(d) - 1.0) > 1e-9:
            raise WorldError("direction must be a unit vector")
        if max_range <= 0:
            raise WorldError("max_range must be positive")
        pts, dists = self.cast_rays(o[None, :], d[None, :], max_range, extra_solids)
        if not np.isfinite(dists[0]):
            return None
        return pts[0], float(dists[0])

    def cast_rays(self, origins, dirs, max_range: float,
                  extra_solids=()) -> tuple[np.ndarray, np.ndarray]:
        """Vectorized ray cast. Misses get distance +inf."""
        o = np.asarray(origins, float)
        d = np.asarray(dirs, float)
        n = o.shape[0]
        best = np.full(n, np.inf)
        # floor plane z = 0 (solid half-space below)
        dz = d[:, 2]
        oz = o[:, 2]
        inside_floor = oz <= 0.0
        with np.errstate(divide="ignore", invalid="ignore"):
            t_floor = np.where(dz < 0, -oz / dz, np.inf)
        t_floor = np.where(inside_floor, 0.0, t_floor)
        best = np.minimum(best, np.where(t_floor >= 0, t_floor, np.inf))
        solids = list(self._solids) + [s.halfspaces() if isinstance(s, Box) else s for s in extra_solids]
        for normals, offsets in solids:
            # slab clip: n.(o + t d) <= c  for all half-spaces
            nd = d @ normals.T            # (n, m)
            no = o @ normals.T - offsets  # (n, m); inside when <= 0
            with np.errstate(divide="ignore", invalid="ignore"):
                t_hit = -no / nd
            lo = np.where(nd < 0, t_hit, -np.inf)
            hi = np.where(nd > 0, t_hit, np.inf)
            # parallel ray outside a half-space never enters
            lo = np.where((nd == 0) & (no > 0), np.inf, lo)
            t_enter = lo.max(axis=1)
            t_exit = hi.min(axis=1)
            valid = t_enter <= t_exit + 1e-12
            t_enter = np.clip(t_enter, 0.0, None)  # inside -> 0
            hit = valid & (t_enter <= t_exit + 1e-12)
            best = np.where(hit, np.minimum(best, t_enter), best)
        best = np.where(best <= max_range, best, np.inf)
        with np.errstate(invalid="ignore"):
            pts = o + best[:, None] * d
        return pts, best

    # -- sensors -------------------------------------------------------------

    def simulate_depth_scan(self, pose: Pose, cam: SensorIntrinsics,
                            extra_solids=()) -> np.ndarray:
        """World-frame point cloud, one point per pixel ray that hits."""
        if not self.in_bounds_xy(pose.x, pose.y):
            raise WorldError("pose outside bounds")
        w, h = cam.cam_width, cam.cam_height
        fx = (w / 2.0) / math.tan(cam.cam_hfov / 2.0)
        us = (np.arange(w) + 0.5) - w / 2.0
        vs = (np.arange(h) + 0.5) - h / 2.0
        uu, vv = np.meshgrid(us, vs, indexing="ij")
        # camera frame: +x forward, +y left, +z up
        dirs = np.stack([np.full(uu.shape, fx), -uu, -vv], axis=-1).reshape(-1, 3)
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        pitch = cam.cam_pitch + self.surface_pitch(pose)
        dirs = _rotate_pitch_yaw(dirs, pitch, pose.yaw)
        origin = np.array([pose.x, pose.y, pose.z + cam.cam_height_above_base])
        pts, dists = self.cast_rays(np.broadcast_to(origin, dirs.shape), dirs,
                                    cam.cam_max_range, extra_solids)
        return pts[np.isfinite(dists)]

    def simulate_laser_scan(self, pose: Pose, sensor: SensorIntrinsics,
                            extra_solids=()) -> np.ndarray:
        """Planar scan at laser height above the local surface.

        The scan plane pitches with the surface under the robot, so beams on
        flat ground ahead of a slope intersect the rising surface. Beams with
        no hit report max range.
        """
        if not self.in_bounds_xy(pose.x, pose.y):
            raise WorldError("pose outside bounds")
        n = sensor.laser_beams
        angles = np.linspace(-sensor.laser_fov / 2.0, sensor.laser_fov / 2.0, n)
        dirs = np.stack([np.cos(angles), np.sin(angles), np.zeros(n)], axis=-1)
        pitch = self.surface_pitch(pose)
        dirs = _rotate_pitch_yaw(dirs, pitch, pose.yaw)
        origin = np.array([pose.x, pose.y, pose.z + sensor.laser_height])
        _, dists = self.cast_rays(np.broadcast_to(origin, dirs.shape), dirs,
                                  sensor.laser_max_range, extra_solids)
        return np.where(np.isfinite(dists), dists, sensor.laser_max_range)

    def laser_endpoints(self, pose: Pose, sensor: SensorIntrinsics,
                        extra_solids=()) -> tuple[np.ndarray, np.ndarray]:
        """(endpoints, hit mask) for a laser scan, in world frame."""
        n = sensor.laser_beams
        angles = np.linspace(-sensor.laser_fov / 2.0, sensor.laser_fov / 2.0, n)
        dirs = np.stack([np.cos(angles), np.sin(angles), np.zeros(n)], axis=-1)
        pitch = self.surface_pitch(pose)
        dirs = _rotate_pitch_yaw(dirs, pitch, pose.yaw)
        origin = np.array([pose.x, pose.y, pose.z + sensor.laser_height])
        pts, dists = self.cast_rays(np.broadcast_to(origin, dirs.shape), dirs,
                                    sensor.laser_max_range, extra_solids)
        hit = np.isfinite(dists)
        end = np.where(hit[:, None], pts, origin + dirs * sensor.laser_max_range)
        return end, hit

    # -- trajectories ----------------------------------------------------------

    def sweep_trajectory(self, waypoints, spacing: float,
                         max_step_rise: float = 0.15) -> list[Pose]:
        """Densify a waypoint polyline at the given spacing, z on the surface.

        Raises naming the offending waypoint index when a waypoint is off the
        walkable surface or the leg to it crosses a rise too steep to drive.
        """
        if spacing <= 0:
            raise WorldError("spacing must be positive")
        wps = [w if isinstance(w, Pose) else Pose(w[0], w[1]) for w in waypoints]
        for i, w in enumerate(wps):
            if not self.in_bounds_xy(w.x, w.y):
                raise WorldError(f"waypoint {i} outside bounds")
        if len(wps) == 1:
            w = wps[0]
            return [Pose(w.x, w.y, self.surface_height(w.x, w.y), w.yaw)]
        poses: list[Pose] = []
        for i in range(len(wps) - 1):
            a, b = wps[i], wps[i + 1]
            seg = math.hypot(b.x - a.x, b.y - a.y)
            steps = max(1, int(math.ceil(seg / spacing)))
            yaw = math.atan2(b.y - a.y, b.x - a.x)
            prev_h = self.surface_height(a.x, a.y)
            start = 0 if i == 0 else 1
            for k in range(start, steps + 1):
                t = k / steps
                x, y = a.x + t * (b.x - a.x), a.y + t * (b.y - a.y)
                h = self.surface_height(x, y)
                if abs(h - prev_h) > max_step_rise:
                    raise WorldError(f"leg into waypoint {i + 1} crosses a step of "
                                     f"{abs(h - prev_h):.2f} m")
                prev_h = h
                poses.append(Pose(x, y, h, yaw))
        return poses


def _rotate_pitch_yaw(dirs: np.ndarray, pitch: float, yaw: float) -> np.ndarray:
    """Apply body pitch (positive nose-up) then yaw to body-frame directions."""
    cp, sp = math.cos(pitch), math.sin(pitch)
    cy, sy = math.cos(yaw), math.sin(yaw)
    x, y, z = dirs[:, 0], dirs[:, 1], dirs[:, 2]
    xp = cp * x - sp * z
    zp = sp * x + cp * z
    out = np.empty_like(dirs)
    out[:, 0] = cy * xp - sy * y
    out[:, 1] = sy * xp + cy * y
    out[:, 2] = zp
    return out


# -- JSON i/o -------------------------------------------------------------------

def env_from_dict(doc: dict) -> EnvironmentSpec:
    try:
        bmin, bmax = doc["bounds"]
    except (KeyError, ValueError) as e:
        raise WorldError(f"bad bounds: {e}")
    prims = []
    for i, p in enumerate(doc.get("primitives", [])):
        kind = p.get("type")
        try:
            if kind == "box":
                prims.append(Box(tuple(p["min"]), tuple(p["max"])))
            elif kind == "ramp":
                prims.append(Ramp(tuple(p["base"][0]), tuple(p["base"][1]),
                                  p["low"], p["high"], p.get("axis", "x")))
            elif kind == "staircase":
                prims.append(Staircase(tuple(p["base"][0]), tuple(p["base"][1]),
                                       p["steps"], p["rise"], p["run"], p.get("axis", "x")))
            else:
                raise WorldError(f"unknown primitive type {kind!r}")
        except KeyError as e:
            raise WorldError(f"primitive {i}: missing key {e}")
    return EnvironmentSpec(bmin, bmax, prims)


def load_environment(path: str | Path) -> EnvironmentSpec:
    with open(path) as f:
        return env_from_dict(json.load(f))
