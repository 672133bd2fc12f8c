"""Rasterization of classed geometries into the 3-channel map raster.

Channel 0 holds area classes, 1 line classes, 2 node classes; values are
class indices with 0 = void. Polygons are filled with the nonzero-winding
rule evaluated at cell centers; polylines are traced as supercover lines
(every cell the ideal segment passes through); points set single cells.
Elements are drawn in ascending class-index order, later writes overwrite
earlier ones, so output is deterministic for a given geometry set.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import formats
from .errors import CompatibilityWarning, FormatError
from .geometry import Datum, GridSpec

CHANNEL_AREAS = 0
CHANNEL_LINES = 1
CHANNEL_NODES = 2

EMPTY_HASH = bytes(32)


@dataclass
class MapRaster:
    spec: GridSpec
    channels: np.ndarray  # (3, H, W) uint8
    class_table_hash: bytes = EMPTY_HASH
    datum: Optional[Datum] = None

    def __post_init__(self):
        self.channels = np.asarray(self.channels, dtype=np.uint8)
        if self.channels.shape != (3, self.spec.height, self.spec.width):
            raise FormatError(
                f"raster shape {self.channels.shape} does not match grid "
                f"(3, {self.spec.height}, {self.spec.width})"
            )

    def digest(self) -> str:
        h = hashlib.sha256()
        h.update(self.channels.tobytes())
        return h.hexdigest()


def _fill_polygon(plane, ring_rc, value):
    """Nonzero-winding scanline fill at cell centers.

    ring_rc: (M, 2) array of (row, col) continuous cell coordinates, closed
    (first == last). Crossing rule is half-open (y1 <= y < y2), so shared
    edges between adjacent polygons never double-fill or leave gaps.
    """
    H, W = plane.shape
    ys = ring_rc[:, 0]
    lo = max(0, int(math.ceil(ys.min())))
    hi = min(H - 1, int(math.floor(ys.max())))
    for row in range(lo, hi + 1):
        y = float(row)
        crossings = []
        for (y1, x1), (y2, x2) in zip(ring_rc[:-1], ring_rc[1:]):
            if y1 == y2:
                continue
            if y1 <= y < y2:
                direction = 1
            elif y2 <= y < y1:
                direction = -1
            else:
                continue
            x = x1 + (y - y1) * (x2 - x1) / (y2 - y1)
            crossings.append((x, direction))
        if not crossings:
            continue
        crossings.sort()
        winding = 0
        for (x_a, d), (x_b, _) in zip(crossings, crossings[1:] + [(None, 0)]):
            winding += d
            if winding == 0 or x_b is None:
                continue
            j0 = max(0, int(math.ceil(x_a)))
            j1 = min(W - 1, int(math.ceil(x_b)) - 1)
            if j0 <= j1:
                plane[row, j0 : j1 + 1] = value


def supercover_cells(a_rc, b_rc):
    """Cells (row, col) a segment passes through, in traversal order.

    Inputs are continuous cell coordinates; a cell is the unit square of
    half-open extent [c-0.5, c+0.5) around its integer center, matching
    GridSpec.cell_of's round-half-up. Cells may repeat when boundaries are
    grazed; callers treat the result as a set.
    """
    (r1, c1), (r2, c2) = a_rc, b_rc
    ts = [0.0, 1.0]
    dr = r2 - r1
    dc = c2 - c1
    for (start, d) in ((r1, dr), (c1, dc)):
        if d == 0.0:
            continue
        lo = math.floor(min(start, start + d) + 0.5)
        hi = math.floor(max(start, start + d) + 0.5)
        for m in range(int(lo), int(hi)):
            t = (m + 0.5 - start) / d
            if 0.0 < t < 1.0:
                ts.append(t)
    ts.sort()
    cells = []
    for t0, t1 in zip(ts[:-1], ts[1:]):
        if t1 <= t0:
            continue
        tm = 0.5 * (t0 + t1)
        cells.append(
            (int(math.floor(r1 + tm * dr + 0.5)), int(math.floor(c1 + tm * dc + 0.5)))
        )
    if not cells:
        cells.append((int(math.floor(r1 + 0.5)), int(math.floor(c1 + 0.5))))
    return cells


def _draw_polyline(plane, chain_rc, value, width=1):
    H, W = plane.shape
    half_lo = width // 2
    half_hi = (width - 1) // 2
    for a, b in zip(chain_rc[:-1], chain_rc[1:]):
        for (i, j) in supercover_cells(tuple(a), tuple(b)):
            for oi in range(-half_lo, half_hi + 1):
                for oj in range(-half_lo, half_hi + 1):
                    ii, jj = i + oi, j + oj
                    if 0 <= ii < H and 0 <= jj < W:
                        plane[ii, jj] = value


def rasterize(geoms, spec: GridSpec, class_table_hash: bytes = EMPTY_HASH,
              datum: Optional[Datum] = None, line_width: int = 1) -> MapRaster:
    """Rasterize MapGeometries onto the grid.

    Geometry outside the grid contributes nothing; elements draw in
    ascending class-index order (stable for equal classes).
    """
    H, W = spec.height, spec.width
    channels = np.zeros((3, H, W), dtype=np.uint8)

    def to_rc(points):
        pts = np.asarray(points, dtype=float)
        fi, fj = spec.frac_index(pts)
        return np.stack([fi, fj], axis=-1)

    for class_idx, ring in sorted(geoms.polygons, key=lambda t: t[0]):
        _fill_polygon(channels[CHANNEL_AREAS], to_rc(ring), class_idx)
    for class_idx, chain in sorted(geoms.polylines, key=lambda t: t[0]):
        _draw_polyline(channels[CHANNEL_LINES], to_rc(chain), class_idx, line_width)
    for class_idx, point in sorted(geoms.points, key=lambda t: t[0]):
        i, j = spec.cell_of(np.asarray(point, dtype=float))
        if 0 <= i < H and 0 <= j < W:
            channels[CHANNEL_NODES][i, j] = class_idx

    return MapRaster(spec, channels, class_table_hash, datum)


def save_tile(raster: MapRaster, f):
    close = False
    if isinstance(f, (str, bytes)) or hasattr(f, "__fspath__"):
        f = open(f, "wb")
        close = True
    try:
        formats.write_magic(f, formats.MAGIC_TILE)
        formats.write_grid_spec(f, raster.spec)
        formats.write_datum(f, raster.datum)
        if len(raster.class_table_hash) != 32:
            raise FormatError("class_table_hash must be 32 bytes")
        f.write(raster.class_table_hash)
        formats.write_array(f, raster.channels, "<u1")
    finally:
        if close:
            f.close()


def load_tile(f, expect_class_hash: Optional[bytes] = None) -> MapRaster:
    import warnings

    close = False
    if isinstance(f, (str, bytes)) or hasattr(f, "__fspath__"):
        f = open(f, "rb")
        close = True
    try:
        formats.read_magic(f, formats.MAGIC_TILE)
        spec = formats.read_grid_spec(f)
        datum = formats.read_datum(f)
        table_hash = formats.read_exact(f, 32)
        channels = formats.read_array(f, (3, spec.height, spec.width), "<u1")
        if expect_class_hash is not None and table_hash != expect_class_hash:
            warnings.warn(
                "tile was rasterized against a different class table",
                CompatibilityWarning,
                stacklevel=2,
            )
        return MapRaster(spec, channels, table_hash, datum)
    finally:
        if close:
            f.close()


def export_channel_image(raster: MapRaster, channel: int, path, scale: int = 0):
    """Write one channel as an 8-bit grayscale PNG, north up.

    scale=0 stretches the present value range to 0..255; otherwise values
    are multiplied by the given factor.
    """
    from PIL import Image

    plane = raster.channels[channel]
    if scale:
        img = np.clip(plane.astype(np.int32) * scale, 0, 255).astype(np.uint8)
    else:
        top = int(plane.max())
        img = (plane.astype(np.float64) * (255.0 / top)).astype(np.uint8) if top else plane
    Image.fromarray(np.flipud(img), mode="L").save(path, format="PNG")
