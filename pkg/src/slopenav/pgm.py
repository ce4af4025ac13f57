"""Binary PGM (P5) export/import for trinary grids.

Palette: 0 = occupied, 255 = free, 127 = unknown. Rows run from the max-y
edge down so the image displays with north up.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .octree import FREE, OCCUPIED, UNKNOWN

_TO_PIXEL = {OCCUPIED: 0, FREE: 255, UNKNOWN: 127}
_FROM_PIXEL = {0: OCCUPIED, 255: FREE, 127: UNKNOWN}


def write_pgm(path: str | Path, grid: np.ndarray) -> None:
    """Write a trinary grid indexed [ix, iy] as a P5 image."""
    img = np.full(grid.shape, 127, np.uint8)
    img[grid == OCCUPIED] = 0
    img[grid == FREE] = 255
    img = img.T[::-1]  # rows top-down = decreasing y
    with open(path, "wb") as f:
        f.write(b"P5\n%d %d\n255\n" % (img.shape[1], img.shape[0]))
        f.write(img.tobytes())


def read_pgm(path: str | Path) -> np.ndarray:
    """Read a P5 image written by write_pgm back into a trinary grid."""
    with open(path, "rb") as f:
        raw = f.read()
    if not raw.startswith(b"P5"):
        raise ValueError("not a binary PGM file")
    fields: list[bytes] = []
    pos = 2
    while len(fields) < 3:
        while pos < len(raw) and raw[pos:pos + 1].isspace():
            pos += 1
        if raw[pos:pos + 1] == b"#":
            pos = raw.index(b"\n", pos) + 1
            continue
        end = pos
        while end < len(raw) and not raw[end:end + 1].isspace():
            end += 1
        fields.append(raw[pos:end])
        pos = end
    pos += 1
    width, height, maxval = (int(v) for v in fields)
    if maxval != 255:
        raise ValueError("expected maxval 255")
    img = np.frombuffer(raw[pos:pos + width * height], np.uint8)
    img = img.reshape(height, width)[::-1].T
    grid = np.full(img.shape, UNKNOWN, np.int8)
    grid[img == 0] = OCCUPIED
    grid[img == 255] = FREE
    return grid
