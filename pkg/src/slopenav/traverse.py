"""Traversable-map generation from stacked 2D layer projections.

Adjacent layer footprints are compared to estimate the local incline: a
climb of one inter-layer spacing d spread over v cells of horizontal run
has gradient alpha = arctan(d / (r * v)). Regions under the angle
threshold are traversable slopes, steeper ones are rises, and the lateral
edges of slopes are occupied for safety. An analytic heightmap classifier
over the same grid serves as an independent cross-check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .octree import FREE, OCCUPIED, UNKNOWN, LayerGrid
from .world import EnvironmentSpec

# per-cell provenance labels
LBL_UNKNOWN = 0
LBL_FLAT = 1
LBL_SLOPE = 2
LBL_SLOPE_EDGE = 3
LBL_RISE = 4

LABEL_NAMES = {LBL_UNKNOWN: "unknown", LBL_FLAT: "flat", LBL_SLOPE: "slope",
               LBL_SLOPE_EDGE: "slope_edge", LBL_RISE: "rise"}


class TraverseError(ValueError):
    pass


@dataclass(frozen=True)
class GradientParams:
    theta: float               # slope angle threshold, rad
    resolution: float          # cell size, m
    edge_width: int = 1        # slope-edge band width, cells

    def __post_init__(self):
        if not 0 < self.theta < math.pi / 2:
            raise TraverseError("theta must be in (0, pi/2)")
        if self.edge_width < 1:
            raise TraverseError("edge_width must be >= 1")


@dataclass
class LayerStack:
    layers: list[LayerGrid]
    spacing: float             # inter-layer distance d, m
    z_base: float

    def __post_init__(self):
        if len(self.layers) < 2:
            raise TraverseError("need at least 2 layers")
        res = self.layers[0].resolution
        for k, lg in enumerate(self.layers):
            if abs(lg.resolution - res) > 1e-12:
                raise TraverseError("layers must share one resolution")
            want = self.z_base + k * self.spacing
            if abs(lg.z0 - want) > 1e-9 or abs(lg.thickness - self.spacing) > 1e-9:
                raise TraverseError(f"layer {k} slab misaligned with the stack")


@dataclass
class TraversableMap:
    state: np.ndarray          # int8 trinary grid [ix, iy]
    labels: np.ndarray         # int8 label grid
    origin: tuple[float, float]
    resolution: float

    @property
    def shape(self) -> tuple[int, int]:
        return self.state.shape

    def cell_of(self, x: float, y: float) -> tuple[int, int]:
        return (int(math.floor((x - self.origin[0]) / self.resolution)),
                int(math.floor((y - self.origin[1]) / self.resolution)))

    def cell_center(self, ix: int, iy: int) -> tuple[float, float]:
        return (self.origin[0] + (ix + 0.5) * self.resolution,
                self.origin[1] + (iy + 0.5) * self.resolution)


def layer_gradient(d: float, r: float, v: float) -> float:
    """Incline angle for a climb of d over v cells of size r."""
    if d <= 0 or r <= 0:
        raise TraverseError("d and r must be positive")
    if v < 0:
        raise TraverseError("v must be non-negative")
    if v == 0:
        return math.pi / 2  # no horizontal run: vertical rise
    return math.atan(d / (r * v))


def classify_gradient(alpha: float, theta: float) -> int:
    """1 when the incline is a traversable slope (alpha strictly below theta)."""
    return 1 if alpha < theta else 0


def _edt(mask: np.ndarray) -> np.ndarray:
    """Euclidean distance (cells) from each cell to the nearest True cell."""
    if not mask.any():
        return np.full(mask.shape, np.inf)
    return ndimage.distance_transform_edt(~mask)


def build_traversable(stack: LayerStack, params: GradientParams) -> TraversableMap:
    """Fuse a layer stack into one trinary traversable map with labels.

    Per column, the topmost layer holding an occupied cell gives the surface
    level. Cells inside a level band get the band's incline from the run
    length between the neighbouring levels; bands under the threshold are
    traversable slopes, narrow ones are rises. Level jumps of two or more
    layers are vertical rises, and the lateral borders of slopes become
    occupied edge cells.
    """
    layers = stack.layers
    K = len(layers)
    d, r = stack.spacing, params.resolution
    occ = np.stack([lg.data == OCCUPIED for lg in layers])
    obs = np.stack([lg.data != UNKNOWN for lg in layers])

    level = np.full(occ.shape[1:], -1, np.int64)
    for k in range(K):
        level[occ[k]] = k
    supported = level >= 0

    v_star = d / (r * math.tan(params.theta))   # runs shorter than this are rises
    horizon = int(math.ceil(v_star)) + 2

    up = np.full((K,) + level.shape, np.inf)
    down = np.full((K,) + level.shape, np.inf)
    up_idx = {}
    for k in range(K):
        higher = supported & (level >= k + 1)
        if higher.any():
            dist, idx = ndimage.distance_transform_edt(~higher, return_indices=True)
            up[k] = dist
            up_idx[k] = idx
        lower = supported & (level <= k - 1)
        if lower.any():
            down[k] = _edt(lower)

    labels = np.full(level.shape, LBL_UNKNOWN, np.int8)
    kk = np.clip(level, 0, K - 1)
    u = np.take_along_axis(up, kk[None], axis=0)[0]
    lo = np.take_along_axis(down, kk[None], axis=0)[0]

    flat = supported & (~np.isfinite(u) | ~np.isfinite(lo)
                        | (u > 4 * horizon) | (lo > 4 * horizon))
    banded = supported & ~flat
    v = np.maximum(u + lo - 1.0, 1.0)
    with np.errstate(invalid="ignore"):
        alpha = np.arctan2(d, r * v)
    slope = banded & (alpha < params.theta)
    rise = banded & ~slope

    # near a lateral rim the EDT run is the sideways distance to the drop,
    # not the down-slope run; re-measure along the ascent direction before
    # settling on a rise verdict
    for x, y in zip(*np.nonzero(rise)):
        k = level[x, y]
        idx = up_idx.get(k)
        if idx is None:
            continue
        ax, ay = idx[0][x, y] - x, idx[1][x, y] - y
        n = math.hypot(ax, ay)
        if n == 0:
            continue
        lo_dir = None
        for s in range(1, 4 * horizon):
            cx = int(round(x - ax / n * s))
            cy = int(round(y - ay / n * s))
            if not (0 <= cx < level.shape[0] and 0 <= cy < level.shape[1]):
                break
            lk = level[cx, cy]
            if lk != k:
                if lk == k - 1:
                    lo_dir = s
                break
        if lo_dir is None:
            continue
        v2 = max(u[x, y] + lo_dir - 1.0, 1.0)
        if math.atan2(d, r * v2) < params.theta:
            rise[x, y] = False
            slope[x, y] = True

    labels[flat] = LBL_FLAT
    labels[slope] = LBL_SLOPE
    labels[rise] = LBL_RISE

    # vertical cliffs: a neighbour two or more levels below means this cell
    # fronts a jump the band analysis cannot see
    cliff = np.zeros(level.shape, bool)
    for dx, dy in ((1, 0), (-1, 0), (0, 1), (0, -1)):
        nb = _shift(level, dx, dy, fill=-1)
        nb_supported = nb >= 0
        cliff |= supported & nb_supported & (level - nb >= 2)
    labels[cliff & (labels == LBL_SLOPE)] = LBL_SLOPE_EDGE
    labels[cliff & (labels != LBL_SLOPE_EDGE)] = LBL_RISE

    # elevated cells fronting a persistent strip that is unknown or far
    # lower are rims even when nothing there was classified a slope
    rim = np.zeros(level.shape, bool)
    elevated = supported & (level >= 1)
    for dx, dy in ((1, 0), (-1, 0), (0, 1), (0, -1)):
        danger1 = np.ones(level.shape, bool)
        for m in (1, 2, 3):
            nb = _shift(level, m * dx, m * dy, fill=-1)
            danger1 &= (nb == -1) | (nb <= level - 2)
        rim |= elevated & danger1
    labels[rim & (labels == LBL_SLOPE)] = LBL_SLOPE_EDGE
    labels[rim & ~np.isin(labels, (LBL_SLOPE_EDGE, LBL_UNKNOWN))] = LBL_RISE

    # lateral slope edges: a persistent one-level drop perpendicular to the
    # ascent direction is a rim the robot must not slip over
    edge = np.zeros(level.shape, bool)
    slope_mask = labels == LBL_SLOPE
    if slope_mask.any():
        for dx, dy in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            nb1 = _shift(level, dx, dy, fill=-1)
            nb2 = _shift(level, 2 * dx, 2 * dy, fill=-1)
            nb3 = _shift(level, 3 * dx, 3 * dy, fill=-1)
            # an unsupported neighbour (-1) may hide a drop; treat it as one
            drop = slope_mask & (nb1 < level) & (nb2 < level) & (nb3 < level)
            if not drop.any():
                continue
            # exclude neighbours along the ascent: they belong to the band below
            lateral = _ascent_lateral(drop, level, up_idx, dx, dy)
            edge |= drop & lateral
    if params.edge_width > 1 and edge.any():
        grown = ndimage.binary_dilation(edge, iterations=params.edge_width - 1)
        edge |= grown & slope_mask
    labels[edge & slope_mask] = LBL_SLOPE_EDGE

    state = np.full(level.shape, UNKNOWN, np.int8)
    state[np.isin(labels, (LBL_FLAT, LBL_SLOPE))] = FREE
    state[np.isin(labels, (LBL_RISE, LBL_SLOPE_EDGE))] = OCCUPIED
    lg0 = layers[0]
    return TraversableMap(state, labels, lg0.origin, lg0.resolution)


def _shift(a: np.ndarray, dx: int, dy: int, fill) -> np.ndarray:
    out = np.full_like(a, fill)
    sx = slice(dx, None) if dx >= 0 else slice(None, dx)
    tx = slice(None, -dx) if dx > 0 else (slice(-dx, None) if dx < 0 else slice(None))
    sy = slice(dy, None) if dy >= 0 else slice(None, dy)
    ty = slice(None, -dy) if dy > 0 else (slice(-dy, None) if dy < 0 else slice(None))
    out[tx, ty] = a[sx, sy]
    return out


def _ascent_lateral(drop: np.ndarray, level: np.ndarray, up_idx: dict,
                    dx: int, dy: int) -> np.ndarray:
    """True where the (dx, dy) neighbour is lateral to the local ascent."""
    lateral = np.ones(level.shape, bool)
    xs, ys = np.nonzero(drop)
    for x, y in zip(xs, ys):
        k = level[x, y]
        idx = up_idx.get(k)
        if idx is None:
            continue
        ax, ay = idx[0][x, y] - x, idx[1][x, y] - y
        # neighbour within 45 degrees of the ascent axis is part of the band
        if abs(ax * dx + ay * dy) >= abs(ax * dy - ay * dx):
            lateral[x, y] = False
    return lateral


def heightmap_reference(env: EnvironmentSpec, params: GradientParams,
                        spacing: float) -> TraversableMap:
    """Analytic oracle: classify the exact surface grid with the same theta.

    Slope angle comes from central differences of the true surface height;
    cells whose surface sits at least one layer spacing above a neighbour are
    occupied edges. Used only to cross-check build_traversable.
    """
    r = params.resolution
    H = env.surface_grid(r)
    gx, gy = np.gradient(H, r)
    alpha = np.arctan(np.hypot(gx, gy))

    labels = np.full(H.shape, LBL_FLAT, np.int8)
    labels[(alpha >= math.radians(1.0)) & (alpha < params.theta)] = LBL_SLOPE
    labels[alpha >= params.theta] = LBL_RISE

    edge = np.zeros(H.shape, bool)
    for dx, dy in ((1, 0), (-1, 0), (0, 1), (0, -1)):
        nb = _shift(H, dx, dy, fill=np.nan)
        with np.errstate(invalid="ignore"):
            edge |= (H - nb) >= spacing
    labels[edge & (labels == LBL_SLOPE)] = LBL_SLOPE_EDGE
    labels[edge & (labels == LBL_FLAT)] = LBL_RISE

    state = np.full(H.shape, FREE, np.int8)
    state[np.isin(labels, (LBL_RISE, LBL_SLOPE_EDGE))] = OCCUPIED
    return TraversableMap(state, labels, (env.bounds_min[0], env.bounds_min[1]), r)


def compare_with_oracle(built: TraversableMap, oracle: TraversableMap) -> dict:
    """Agreement stats on observed cells, split by safety direction."""
    observed = built.state != UNKNOWN
    agree = observed & (built.state == oracle.state)
    unsafe = observed & (oracle.state == OCCUPIED) & (built.state == FREE)
    # allow disagreement touching an oracle label boundary
    boundary = np.zeros(oracle.labels.shape, bool)
    for dx, dy in ((1, 0), (-1, 0), (0, 1), (0, -1)):
        boundary |= oracle.labels != _shift(oracle.labels, dx, dy, fill=-1)
    near_boundary = ndimage.binary_dilation(boundary, iterations=1)
    n_obs = int(observed.sum())
    return {
        "observed": n_obs,
        "agreement": float(agree.sum()) / max(n_obs, 1),
        "unsafe": int(unsafe.sum()),
        "unsafe_interior": int((unsafe & ~near_boundary).sum()),
    }
