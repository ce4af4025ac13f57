"""Probabilistic 3D occupancy map with log-odds evidence accumulation.

Voxels are unknown until observed; endpoint voxels get a hit update and
every voxel a ray passes through before its endpoint gets a miss update.
Within one scan a voxel is updated at most once, hits winning over misses.
Storage is a dense clamped log-odds grid indexed from the map bounds; the
on-disk format is a preorder (Morton-ordered) leaf stream.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from .raycast import batch_supercover_3d

MAGIC = b"SLNVOCT1"


class MapError(ValueError):
    pass


class VoxelKind(Enum):
    OCCUPIED = "occupied"
    FREE = "free"
    UNKNOWN = "unknown"


@dataclass(frozen=True)
class VoxelState:
    kind: VoxelKind
    probability: float | None = None

    @property
    def is_occupied(self) -> bool:
        return self.kind is VoxelKind.OCCUPIED


UNKNOWN = 0
FREE = 1
OCCUPIED = 2


@dataclass
class LayerGrid:
    """One projected 2D slab of the 3D map (trinary cells)."""

    data: np.ndarray  # int8, codes UNKNOWN/FREE/OCCUPIED, indexed [ix, iy]
    origin: tuple[float, float]
    resolution: float
    z0: float
    thickness: float

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    def cell_center(self, ix: int, iy: int) -> tuple[float, float]:
        return (self.origin[0] + (ix + 0.5) * self.resolution,
                self.origin[1] + (iy + 0.5) * self.resolution)


def logodds(p: float) -> float:
    return math.log(p / (1.0 - p))


def probability(l: float) -> float:
    return 1.0 / (1.0 + math.exp(-l))


class OccupancyOctree:
    """Log-odds occupancy grid over an axis-aligned bounded volume."""

    def __init__(self, bounds_min, bounds_max, resolution: float = 0.05,
                 p_hit: float = 0.7, p_miss: float = 0.4, p_occ: float = 0.7,
                 clamp: tuple[float, float] = (0.12, 0.97)):
        self.bounds_min = np.asarray(bounds_min, float)
        self.bounds_max = np.asarray(bounds_max, float)
        if np.any(self.bounds_min >= self.bounds_max):
            raise MapError("degenerate bounds")
        if resolution <= 0:
            raise MapError("resolution must be positive")
        self.resolution = float(resolution)
        self.p_hit, self.p_miss, self.p_occ = p_hit, p_miss, p_occ
        self.l_hit = logodds(p_hit)
        self.l_miss = logodds(p_miss)
        self.l_min = logodds(clamp[0])
        self.l_max = logodds(clamp[1])
        self.occ_threshold = logodds(p_occ)
        extent = self.bounds_max - self.bounds_min
        self.dims = tuple(int(math.ceil(e / resolution - 1e-9)) for e in extent)
        self._log = np.zeros(self.dims, np.float64)
        self._observed = np.zeros(self.dims, bool)

    # -- indexing ----------------------------------------------------------

    def voxel_index(self, point) -> tuple[int, int, int]:
        p = (np.asarray(point, float) - self.bounds_min) / self.resolution
        return tuple(int(math.floor(v)) for v in p)

    def in_bounds(self, point) -> bool:
        p = np.asarray(point, float)
        return bool(np.all(p >= self.bounds_min) and np.all(p <= self.bounds_max))

    def _index_in_grid(self, idx) -> bool:
        return all(0 <= i < d for i, d in zip(idx, self.dims))

    def voxel_center(self, idx) -> np.ndarray:
        return self.bounds_min + (np.asarray(idx, float) + 0.5) * self.resolution

    # -- updates -----------------------------------------------------------

    def integrate_scan(self, origin, cloud) -> int:
        """Integrate one point cloud observed from `origin`.

        Returns the number of leaves touched. Points outside the bounds are
        truncated at the boundary and treated as misses.
        """
        o = np.asarray(origin, float)
        if not self.in_bounds(o):
            raise MapError("scan origin outside map bounds")
        pts = np.asarray(cloud, float).reshape(-1, 3)
        if pts.shape[0] == 0:
            return 0
        d = pts - o
        with np.errstate(divide="ignore", invalid="ignore"):
            t_pos = (self.bounds_max - 1e-9 - o) / d
            t_neg = (self.bounds_min + 1e-9 - o) / d
        t_exit = np.where(d > 0, t_pos, np.where(d < 0, t_neg, np.inf))
        t_hi = np.clip(t_exit.min(axis=1), 0.0, 1.0)
        is_hit = t_hi >= 1.0
        ends = o + t_hi[:, None] * d
        # nudge hit endpoints into the surface so the solid's voxel is marked
        norms = np.linalg.norm(d, axis=1, keepdims=True)
        norms[norms == 0] = 1.0
        nudged = np.where(is_hit[:, None],
                          ends + d / norms * (self.resolution * 1e-4), ends)
        inside = np.all((nudged >= self.bounds_min) & (nudged <= self.bounds_max), axis=1)
        nudged = np.where((is_hit & ~inside)[:, None], ends, nudged)
        is_hit &= inside

        cells, counts = batch_supercover_3d(o - self.bounds_min,
                                            nudged - self.bounds_min,
                                            self.resolution)
        dims = np.array(self.dims, np.int64)
        valid = np.all((cells >= 0) & (cells < dims), axis=1)
        lin = np.ravel_multi_index(
            (np.clip(cells[:, 0], 0, dims[0] - 1),
             np.clip(cells[:, 1], 0, dims[1] - 1),
             np.clip(cells[:, 2], 0, dims[2] - 1)), self.dims)
        # endpoint cell of each hit ray
        last = np.cumsum(counts) - 1
        hit_lin = lin[last[is_hit]]
        hit_lin = np.unique(hit_lin[valid[last[is_hit]]])
        # everything else visited is a miss; hit wins over miss within a scan
        mask = np.ones(len(lin), bool)
        mask[last[is_hit]] = False
        miss_lin = np.unique(lin[mask & valid])
        miss_lin = np.setdiff1d(miss_lin, hit_lin, assume_unique=True)

        flat = self._log.reshape(-1)
        flat[hit_lin] = np.minimum(flat[hit_lin] + self.l_hit, self.l_max)
        flat[miss_lin] = np.maximum(flat[miss_lin] + self.l_miss, self.l_min)
        obs = self._observed.reshape(-1)
        obs[hit_lin] = True
        obs[miss_lin] = True
        return int(len(hit_lin) + len(miss_lin))

    # -- queries -----------------------------------------------------------

    def query(self, point) -> VoxelState:
        if not self.in_bounds(point):
            raise MapError(f"query {point} outside map bounds")
        idx = self.voxel_index(point)
        idx = tuple(min(i, d - 1) for i, d in zip(idx, self.dims))
        if not self._observed[idx]:
            return VoxelState(VoxelKind.UNKNOWN)
        p = probability(self._log[idx])
        if p >= self.p_occ:
            return VoxelState(VoxelKind.OCCUPIED, p)
        return VoxelState(VoxelKind.FREE, p)

    @property
    def observed_count(self) -> int:
        return int(self._observed.sum())

    def stored_logodds(self) -> np.ndarray:
        return self._log[self._observed]

    def project_layer(self, z0: float, thickness: float) -> LayerGrid:
        """Project the slab [z0, z0 + thickness) onto a trinary 2D grid.

        A column is occupied if any occupied voxel center falls in the slab,
        else free if anything in the slab was observed, else unknown.
        """
        if thickness < self.resolution:
            raise MapError("slab thickness must be >= resolution")
        centers = self.bounds_min[2] + (np.arange(self.dims[2]) + 0.5) * self.resolution
        sel = (centers >= z0) & (centers < z0 + thickness)
        occ3 = (self._log >= self.occ_threshold) & self._observed
        data = np.full(self.dims[:2], UNKNOWN, np.int8)
        if sel.any():
            any_occ = occ3[:, :, sel].any(axis=2)
            any_obs = self._observed[:, :, sel].any(axis=2)
            data[any_obs] = FREE
            data[any_occ] = OCCUPIED
        return LayerGrid(data, (self.bounds_min[0], self.bounds_min[1]),
                         self.resolution, z0, thickness)

    # -- serialization -------------------------------------------------------
    # Layout (little endian): magic[8] | version u32 | resolution f64 |
    # bounds_min f64*3 | bounds_max f64*3 | leaf_count u64 | then the leaf
    # stream: morton code u64 + log-odds f64 per observed leaf, in Morton
    # (preorder) order.

    def save(self, path: str | Path) -> None:
        idx = np.argwhere(self._observed)
        codes = _morton3(idx[:, 0], idx[:, 1], idx[:, 2])
        order = np.argsort(codes, kind="stable")
        codes = codes[order]
        values = self._log[self._observed].ravel()[order]
        with open(path, "wb") as f:
            f.write(MAGIC)
            f.write(struct.pack("<I", 1))
            f.write(struct.pack("<d", self.resolution))
            f.write(struct.pack("<3d", *self.bounds_min))
            f.write(struct.pack("<3d", *self.bounds_max))
            f.write(struct.pack("<4d", self.p_hit, self.p_miss, self.p_occ, 0.0))
            f.write(struct.pack("<2d", probability(self.l_min), probability(self.l_max)))
            f.write(struct.pack("<Q", len(codes)))
            f.write(codes.astype("<u8").tobytes())
            f.write(values.astype("<f8").tobytes())

    @classmethod
    def load(cls, path: str | Path) -> "OccupancyOctree":
        with open(path, "rb") as f:
            if f.read(8) != MAGIC:
                raise MapError("not an occupancy map file")
            (version,) = struct.unpack("<I", f.read(4))
            if version != 1:
                raise MapError(f"unsupported version {version}")
            (res,) = struct.unpack("<d", f.read(8))
            bmin = struct.unpack("<3d", f.read(24))
            bmax = struct.unpack("<3d", f.read(24))
            p_hit, p_miss, p_occ, _ = struct.unpack("<4d", f.read(32))
            c_lo, c_hi = struct.unpack("<2d", f.read(16))
            (count,) = struct.unpack("<Q", f.read(8))
            codes = np.frombuffer(f.read(8 * count), "<u8")
            values = np.frombuffer(f.read(8 * count), "<f8")
        m = cls(bmin, bmax, res, p_hit, p_miss, p_occ, (c_lo, c_hi))
        ix, iy, iz = _unmorton3(codes)
        m._log[ix, iy, iz] = values
        m._observed[ix, iy, iz] = True
        return m


def _part1by2(v: np.ndarray) -> np.ndarray:
    v = v.astype(np.uint64) & np.uint64(0x1FFFFF)
    v = (v | (v << np.uint64(32))) & np.uint64(0x1F00000000FFFF)
    v = (v | (v << np.uint64(16))) & np.uint64(0x1F0000FF0000FF)
    v = (v | (v << np.uint64(8))) & np.uint64(0x100F00F00F00F00F)
    v = (v | (v << np.uint64(4))) & np.uint64(0x10C30C30C30C30C3)
    v = (v | (v << np.uint64(2))) & np.uint64(0x1249249249249249)
    return v


def _compact1by2(v: np.ndarray) -> np.ndarray:
    v = v.astype(np.uint64) & np.uint64(0x1249249249249249)
    v = (v | (v >> np.uint64(2))) & np.uint64(0x10C30C30C30C30C3)
    v = (v | (v >> np.uint64(4))) & np.uint64(0x100F00F00F00F00F)
    v = (v | (v >> np.uint64(8))) & np.uint64(0x1F0000FF0000FF)
    v = (v | (v >> np.uint64(16))) & np.uint64(0x1F00000000FFFF)
    v = (v | (v >> np.uint64(32))) & np.uint64(0x1FFFFF)
    return v


def _morton3(x, y, z) -> np.ndarray:
    return (_part1by2(np.asarray(x)) | (_part1by2(np.asarray(y)) << np.uint64(1))
            | (_part1by2(np.asarray(z)) << np.uint64(2)))


def _unmorton3(codes: np.ndarray):
    c = np.asarray(codes, np.uint64)
    return (_compact1by2(c).astype(np.int64),
            _compact1by2(c >> np.uint64(1)).astype(np.int64),
            _compact1by2(c >> np.uint64(2)).astype(np.int64))
