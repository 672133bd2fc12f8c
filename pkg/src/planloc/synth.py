"""Synthetic worlds, observation rendering, and the brute-force scorer.

Everything here exists to ground the matching pipeline in scenarios with
known answers: deterministic city-block worlds, BEV observations rendered
from a map at a known pose, and a literal every-pose/every-cell scorer
that higher-level code is checked against.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import kernels
from .bev import BevGrid
from .errors import DomainError
from .geometry import GridSpec, Pose2, compose, inverse, transform_point
from .mapenc import NeuralMap
from .osm.classes import (
    KIND_AREA,
    KIND_LINE,
    KIND_NODE,
    ClassTable,
    load_class_table,
)
from .osm.geoms import MapGeometries
from .raster import MapRaster, rasterize
from .volumes import KIND_LOG_SCORE, PoseVolume, rotation_angles


@dataclass(frozen=True)
class WorldSpec:
    """Parameters of a generated city-block world.

    extent_m x extent_m of map, roads every block_m meters,
    building_density = probability of a building per block,
    tree_density = mean trees per block.
    """

    extent_m: float = 128.0
    block_m: float = 32.0
    building_density: float = 0.6
    tree_density: float = 2.0
    delta: float = 0.5


def _world_grid(extent_m: float, delta: float) -> GridSpec:
    cells = int(round(extent_m / delta))
    half = extent_m / 2.0
    return GridSpec(-half + delta / 2.0, -half + delta / 2.0, delta, cells, cells)


def _rect_ring(x0, y0, x1, y1):
    return np.array([[x0, y0], [x1, y0], [x1, y1], [x0, y1], [x0, y0]])


def gen_world(seed: int, spec: Optional[WorldSpec] = None,
              table: Optional[ClassTable] = None):
    """Deterministic block world: road grid, random buildings, random trees.

    Returns (MapGeometries, MapRaster). Identical seed and spec give a
    bit-identical raster.
    """
    spec = spec or WorldSpec()
    table = table or load_class_table()
    road_idx = table.class_index(KIND_LINE, "road")
    building_idx = table.class_index(KIND_AREA, "building")
    outline_idx = table.class_index(KIND_LINE, "building_outline")
    tree_idx = table.class_index(KIND_NODE, "tree")

    rng = np.random.default_rng(seed)
    geoms = MapGeometries()
    half = spec.extent_m / 2.0
    nblocks = int(round(spec.extent_m / spec.block_m))

    for m in range(nblocks + 1):
        v = -half + m * spec.block_m
        geoms.polylines.append((road_idx, np.array([[v, -half], [v, half]])))
        geoms.polylines.append((road_idx, np.array([[-half, v], [half, v]])))

    for bi in range(nblocks):
        for bj in range(nblocks):
            x0 = -half + bj * spec.block_m
            y0 = -half + bi * spec.block_m
            if rng.random() < spec.building_density:
                margin = 3.0
                w = rng.uniform(6.0, spec.block_m - 2 * margin - 2.0)
                h = rng.uniform(6.0, spec.block_m - 2 * margin - 2.0)
                bx = x0 + margin + rng.uniform(0.0, spec.block_m - 2 * margin - w)
                by = y0 + margin + rng.uniform(0.0, spec.block_m - 2 * margin - h)
                ring = _rect_ring(bx, by, bx + w, by + h)
                geoms.polygons.append((building_idx, ring))
                geoms.polylines.append((outline_idx, ring))
            for _ in range(rng.poisson(spec.tree_density)):
                tx = x0 + rng.uniform(1.0, spec.block_m - 1.0)
                ty = y0 + rng.uniform(1.0, spec.block_m - 1.0)
                geoms.points.append((tree_idx, np.array([tx, ty])))

    grid = _world_grid(spec.extent_m, spec.delta)
    raster = rasterize(geoms, grid, class_table_hash=table.digest())
    return geoms, raster


@dataclass(frozen=True)
class RepeatedScenario:
    """Two-copy ambiguity world plus a three-view trajectory through it.

    views are ground-truth world poses (cell-center positions, heading on
    the K-multiple-of-4 rotation lattice); motions are the body-frame
    odometry records (motions[0] = identity) chaining view t-1 to view t.
    """

    geoms: MapGeometries
    raster: MapRaster
    views: tuple
    motions: tuple
    true_anchor: Pose2
    decoy_anchor: Pose2


def gen_repeated_world(seed: int, extent_m: float = 80.0, separation_m: float = 48.0,
                       delta: float = 0.5, table: Optional[ClassTable] = None) -> RepeatedScenario:
    """World with two rigidly identical street canyons for ambiguity studies.

    Each copy is a pair of parallel walls running north; a single cross
    wall east of the first copy is the only difference between them. The
    three views are chosen so that each is individually degenerate:

    * views 1-2 face north inside the canyon: the walls pin x and heading
      but the score is exactly flat over a long stretch of y (two
      translated placements see bit-identical map content), and the same
      holds at the second copy, so each is both y-ambiguous and bimodal;
    * view 3 faces east above the canyon and sees only the cross wall:
      lateral position (y) is pinned, x is flat along the wall.

    Fusing the three intersects the flat directions and kills the copy
    ambiguity (only view 3's wall exists near the first copy).
    """
    table = table or load_class_table()
    wall_idx = table.class_index(KIND_LINE, "wall")

    rng = np.random.default_rng(seed)
    geoms = MapGeometries()
    grid = _world_grid(extent_m, delta)
    cx = separation_m / 2.0

    half_w = rng.uniform(3.5, 4.5)         # canyon half width
    y_bot = rng.uniform(-28.0, -25.0)      # wall extents
    y_top = rng.uniform(8.0, 11.0)
    for ax in (-cx, cx):
        for sx in (-half_w, half_w):
            geoms.polylines.append(
                (wall_idx, np.array([[ax + sx, y_bot], [ax + sx, y_top]]))
            )

    def snap(x, y):
        i, j = grid.cell_of((float(x), float(y)))
        return grid.cell_center(int(i), int(j))

    # north-facing canyon views; windows stay >= 4 m inside the wall span
    # so their score plateaus are long in y
    x1, y1 = snap(-cx + rng.uniform(-1.0, 1.0), y_bot + rng.uniform(6.0, 9.0))
    x2, y2 = snap(-cx + rng.uniform(-1.0, 1.0), y_top - rng.uniform(16.5, 18.0))
    # east-facing view above the canyon, clear of the canyon's distance
    # field (clearance > rho along the frustum boundary)
    x3, y3 = snap(-cx + half_w + rng.uniform(2.0, 3.0), y_top + rng.uniform(5.0, 6.0))

    # cross wall east of the first copy only; spans view 3's forward window
    yw = y3 + rng.uniform(2.5, 3.5)
    geoms.polylines.append(
        (wall_idx, np.array([[-cx + rng.uniform(-16.0, -12.0), yw],
                             [-cx + rng.uniform(25.0, 28.0), yw]]))
    )

    raster = rasterize(geoms, grid, class_table_hash=table.digest())
    p1 = Pose2(x1, y1, math.pi / 2.0)
    p2 = Pose2(x2, y2, math.pi / 2.0)
    p3 = Pose2(x3, y3, 0.0)
    motions = (
        Pose2(0.0, 0.0, 0.0),
        compose(inverse(p1), p2),
        compose(inverse(p2), p3),
    )
    return RepeatedScenario(
        geoms, raster, (p1, p2, p3), motions,
        true_anchor=Pose2(-cx, 0.0, math.pi / 2.0),
        decoy_anchor=Pose2(cx, 0.0, math.pi / 2.0),
    )


def render_observation(F: NeuralMap, gt: Pose2, bev_shape: tuple = (64, 64),
                       delta: float = 0.5, noise: tuple = (0.0, 0.0),
                       seed: int = 0, half_angle: float = math.pi / 4.0) -> BevGrid:
    """Render the BEV a camera at gt would produce from the map itself.

    T = bilinear map samples at the BEV cells mapped through gt, plus
    Gaussian noise with std sigma_n times the map's feature std; C masks
    the camera frustum (|lateral| <= tan(half_angle) * forward), cells
    whose sample support leaves the map, and Bernoulli(dropout) cells.
    The noise field is drawn before the dropout mask, so a seed fixes both.
    """
    L, D = bev_shape
    sigma_n, dropout = noise
    lat = (np.arange(L) - (L - 1) / 2.0) * delta
    fwd = (np.arange(D) + 1.0) * delta
    p = np.stack(np.broadcast_arrays(lat[:, None], fwd[None, :]), axis=-1)
    world = transform_point(gt, p)
    fi, fj = F.spec.frac_index(world)
    fmap = np.ascontiguousarray(F.F, dtype=np.float64)
    vals, full = kernels.bilinear_gather(fmap, fi.ravel(), fj.ravel())
    T = vals.reshape(L, D, F.n)
    full = full.reshape(L, D)

    rng = np.random.default_rng(seed)
    noise_field = rng.standard_normal((L, D, F.n)) * (sigma_n * float(np.std(F.F)))
    dropped = rng.random((L, D)) < dropout

    frustum = np.abs(lat)[:, None] <= math.tan(half_angle) * fwd[None, :]
    C = (frustum & full & ~dropped).astype(np.float64)
    T = (T + noise_field) * C[:, :, None]
    return BevGrid(T, C, delta)


def oracle_localize(F: NeuralMap, T: BevGrid, K: int):
    """Literal every-pose, every-cell evaluation of the matching score.

    Pure-Python scalar loops over (i, j, k, l, d, n) with the same sample
    positions, bilinear weights, and left-to-right accumulation order as
    the production kernels, but sharing no code with them. O(W*H*K*L*D*N):
    use small instances only. Returns (argmax bin-center Pose2, log-score
    PoseVolume).
    """
    H, W = F.spec.height, F.spec.width
    L, D, N = T.T.shape
    fmap = np.ascontiguousarray(F.F, dtype=np.float64).tolist()
    tc = (T.T * T.C[:, :, None]).tolist()
    conf = T.C.tolist()
    lat = [li - (L - 1) / 2.0 for li in range(L)]
    fwd = [di + 1.0 for di in range(D)]
    angles = [float(a) for a in rotation_angles(K)]
    z = float(sum(1 for l in range(L) for d in range(D) if conf[l][d] > 0.0))
    out = np.empty((H, W, K))
    if z == 0.0:
        out.fill(0.0)
        return Pose2(*F.spec.cell_center(0, 0), angles[0]), PoseVolume(out, F.spec, KIND_LOG_SCORE)

    for k in range(K):
        c = math.cos(angles[k])
        s = math.sin(angles[k])
        for i in range(H):
            for j in range(W):
                acc = 0.0
                for l in range(L):
                    for d in range(D):
                        fj = j + (fwd[d] * c + lat[l] * s)
                        fi = i + (fwd[d] * s - lat[l] * c)
                        i0 = math.floor(fi)
                        j0 = math.floor(fj)
                        di = fi - i0
                        dj = fj - j0
                        i0 = int(i0)
                        j0 = int(j0)
                        w00 = (1.0 - di) * (1.0 - dj)
                        w01 = (1.0 - di) * dj
                        w10 = di * (1.0 - dj)
                        w11 = di * dj
                        in_i0 = 0 <= i0 < H
                        in_i1 = 0 <= i0 + 1 < H
                        in_j0 = 0 <= j0 < W
                        in_j1 = 0 <= j0 + 1 < W
                        row = tc[l][d]
                        for n in range(N):
                            t00 = w00 * fmap[i0][j0][n] if in_i0 and in_j0 else 0.0
                            t01 = w01 * fmap[i0][j0 + 1][n] if in_i0 and in_j1 else 0.0
                            t10 = w10 * fmap[i0 + 1][j0][n] if in_i1 and in_j0 else 0.0
                            t11 = w11 * fmap[i0 + 1][j0 + 1][n] if in_i1 and in_j1 else 0.0
                            bil = ((t00 + t01) + t10) + t11
                            acc = acc + bil * row[n]
                out[i, j, k] = acc / z

    flat = int(np.argmax(out))
    bi, bj, bk = np.unravel_index(flat, out.shape)
    x, y = F.spec.cell_center(int(bi), int(bj))
    return Pose2(x, y, angles[bk]), PoseVolume(out, F.spec, KIND_LOG_SCORE)


def self_match_template(F: NeuralMap, gt: Pose2, bev_shape: tuple = (64, 64),
                        delta: float = 0.5) -> BevGrid:
    """Noise-free full-confidence template extracted from the map at gt.

    Unlike render_observation this keeps C = 1 everywhere the sample
    support stays inside the map (no frustum), which makes the matching
    identity sharpest for closure tests.
    """
    L, D = bev_shape
    lat = (np.arange(L) - (L - 1) / 2.0) * delta
    fwd = (np.arange(D) + 1.0) * delta
    p = np.stack(np.broadcast_arrays(lat[:, None], fwd[None, :]), axis=-1)
    world = transform_point(gt, p)
    fi, fj = F.spec.frac_index(world)
    fmap = np.ascontiguousarray(F.F, dtype=np.float64)
    vals, full = kernels.bilinear_gather(fmap, fi.ravel(), fj.ravel())
    C = full.reshape(L, D).astype(np.float64)
    T = vals.reshape(L, D, F.n) * C[:, :, None]
    return BevGrid(T, C, delta)
