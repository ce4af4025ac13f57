"""Supercover grid traversal for segments in 2D and 3D.

Supercover means every cell whose closed cube the segment touches is
enumerated, including the extra cells at exact corner/edge crossings, so
rays cannot leak diagonally between voxels. Cells come out ordered from
the segment start.
"""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def _supercover3d(ox, oy, oz, ex, ey, ez, out):
    """Fill `out` with visited (ix, iy, iz) rows; return the row count.

    Coordinates are in cell units (cell k spans [k, k+1)).
    """
    dx, dy, dz = ex - ox, ey - oy, ez - oz
    ix, iy, iz = int(np.floor(ox)), int(np.floor(oy)), int(np.floor(oz))
    lx, ly, lz = int(np.floor(ex)), int(np.floor(ey)), int(np.floor(ez))
    n = 0
    out[n, 0], out[n, 1], out[n, 2] = ix, iy, iz
    n += 1
    if dx == 0.0 and dy == 0.0 and dz == 0.0:
        return n

    sx = 1 if dx > 0 else (-1 if dx < 0 else 0)
    sy = 1 if dy > 0 else (-1 if dy < 0 else 0)
    sz = 1 if dz > 0 else (-1 if dz < 0 else 0)
    big = 1.0e300
    if sx != 0:
        tdx = 1.0 / abs(dx)
        nxb = ix + 1 if sx > 0 else ix
        tmx = (nxb - ox) / dx
    else:
        tdx, tmx = big, big
    if sy != 0:
        tdy = 1.0 / abs(dy)
        nyb = iy + 1 if sy > 0 else iy
        tmy = (nyb - oy) / dy
    else:
        tdy, tmy = big, big
    if sz != 0:
        tdz = 1.0 / abs(dz)
        nzb = iz + 1 if sz > 0 else iz
        tmz = (nzb - oz) / dz
    else:
        tdz, tmz = big, big

    max_iter = (abs(lx - ix) + abs(ly - iy) + abs(lz - iz)) * 2 + 6
    for _ in range(max_iter):
        if ix == lx and iy == ly and iz == lz:
            break
        t = min(tmx, min(tmy, tmz))
        if t > 1.0 + 1e-12:
            break
        stepped_x = tmx == t
        stepped_y = tmy == t
        stepped_z = tmz == t
        # corner/edge crossing: emit the face-adjacent cells the segment touches
        if stepped_x and stepped_y:
            out[n, 0], out[n, 1], out[n, 2] = ix + sx, iy, iz
            n += 1
            out[n, 0], out[n, 1], out[n, 2] = ix, iy + sy, iz
            n += 1
        if stepped_x and stepped_z:
            out[n, 0], out[n, 1], out[n, 2] = ix + sx, iy, iz
            n += 1
            out[n, 0], out[n, 1], out[n, 2] = ix, iy, iz + sz
            n += 1
        if stepped_y and stepped_z and not stepped_x:
            out[n, 0], out[n, 1], out[n, 2] = ix, iy + sy, iz
            n += 1
            out[n, 0], out[n, 1], out[n, 2] = ix, iy, iz + sz
            n += 1
        if stepped_x:
            ix += sx
            tmx += tdx
        if stepped_y:
            iy += sy
            tmy += tdy
        if stepped_z:
            iz += sz
            tmz += tdz
        out[n, 0], out[n, 1], out[n, 2] = ix, iy, iz
        n += 1
    if out[n - 1, 0] != lx or out[n - 1, 1] != ly or out[n - 1, 2] != lz:
        out[n, 0], out[n, 1], out[n, 2] = lx, ly, lz
        n += 1
    return n


@njit(cache=True)
def _batch_carve(origin, endpoints, counts_out, cells_out):
    """Traverse origin->endpoint for every endpoint (cell units).

    cells_out receives all visited cells back to back; counts_out[i] is the
    cell count of ray i.
    """
    scratch = np.empty((16384, 3), np.int64)
    pos = 0
    for i in range(endpoints.shape[0]):
        n = _supercover3d(origin[0], origin[1], origin[2],
                          endpoints[i, 0], endpoints[i, 1], endpoints[i, 2],
                          scratch)
        counts_out[i] = n
        for k in range(n):
            cells_out[pos, 0] = scratch[k, 0]
            cells_out[pos, 1] = scratch[k, 1]
            cells_out[pos, 2] = scratch[k, 2]
            pos += 1
    return pos


def supercover_3d(start, end, resolution: float = 1.0) -> np.ndarray:
    """All grid cells touched by the segment, ordered from the start point."""
    s = np.asarray(start, float) / resolution
    e = np.asarray(end, float) / resolution
    span = int(np.sum(np.abs(np.floor(e) - np.floor(s)))) * 3 + 8
    out = np.empty((span, 3), np.int64)
    n = _supercover3d(s[0], s[1], s[2], e[0], e[1], e[2], out)
    return out[:n]


def batch_supercover_3d(origin, endpoints, resolution: float = 1.0):
    """Traversals for many segments sharing one origin.

    Returns (cells, counts): concatenated (N, 3) visited cells and per-ray
    counts. The last cell of each ray is the endpoint cell.
    """
    o = np.asarray(origin, float) / resolution
    e = np.asarray(endpoints, float) / resolution
    if e.ndim == 1:
        e = e[None, :]
    spans = (np.abs(np.floor(e) - np.floor(o)).sum(axis=1).astype(np.int64)) * 3 + 8
    cells = np.empty((int(spans.sum()), 3), np.int64)
    counts = np.empty(e.shape[0], np.int64)
    used = _batch_carve(o, e, counts, cells)
    return cells[:used], counts


def supercover_2d(start, end, resolution: float = 1.0) -> np.ndarray:
    """2D supercover; same conventions as the 3D version."""
    s = np.asarray(start, float)
    e = np.asarray(end, float)
    cells = supercover_3d((s[0], s[1], 0.25), (e[0], e[1], 0.25), resolution)
    # z never steps; drop the constant column
    return cells[:, :2]
