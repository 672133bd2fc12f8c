"""SE(2) pose algebra, grid conventions, and geodetic-to-local conversion.

Conventions used across the package:

* Map frame: x east, y north, both in meters. Heading ``theta`` is measured
  counterclockwise from +x (east), so ``forward(theta) = (cos t, sin t)`` and
  ``right(theta) = (sin t, -cos t)``.
* Camera/BEV points are ``(lateral, forward)`` pairs in meters: forward along
  the viewing axis, lateral positive to the right of it.
* Grids are row-major with rows increasing northward (y-up). Cell ``(i, j)``
  of a :class:`GridSpec` is row ``i``, column ``j``; its center sits at
  ``origin + (j * delta, i * delta)``. Display code flips vertically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

EARTH_RADIUS_M = 6378137.0

TWO_PI = 2.0 * math.pi


def normalize_angle(theta: float) -> float:
    """Wrap an angle to the interval (-pi, pi]. Idempotent."""
    return math.pi - (math.pi - theta) % TWO_PI


@dataclass(frozen=True)
class Pose2:
    """A 3-DoF pose (x east, y north, heading) in the local map frame.

    ``theta`` is normalized to (-pi, pi] on construction.
    """

    x: float
    y: float
    theta: float

    def __post_init__(self):
        object.__setattr__(self, "theta", normalize_angle(float(self.theta)))
        object.__setattr__(self, "x", float(self.x))
        object.__setattr__(self, "y", float(self.y))

    @property
    def t(self) -> np.ndarray:
        """Translation as a length-2 array."""
        return np.array([self.x, self.y])

    def matrix(self) -> np.ndarray:
        """3x3 homogeneous transform (map_point = M @ [body_point, 1])."""
        c, s = math.cos(self.theta), math.sin(self.theta)
        return np.array([[c, -s, self.x], [s, c, self.y], [0.0, 0.0, 1.0]])


IDENTITY = Pose2(0.0, 0.0, 0.0)


def compose(a: Pose2, b: Pose2) -> Pose2:
    """Pose composition a*b: apply b in a's body frame."""
    c, s = math.cos(a.theta), math.sin(a.theta)
    return Pose2(
        a.x + c * b.x - s * b.y,
        a.y + s * b.x + c * b.y,
        a.theta + b.theta,
    )


def inverse(a: Pose2) -> Pose2:
    """Group inverse: compose(a, inverse(a)) is the identity."""
    c, s = math.cos(a.theta), math.sin(a.theta)
    return Pose2(-(c * a.x + s * a.y), -(-s * a.x + c * a.y), -a.theta)


def transform_point(xi: Pose2, p) -> np.ndarray:
    """Map a camera-frame point ``(lateral, forward)`` into the map frame.

    ``p`` may be a single pair or an array with a trailing axis of size 2;
    the result has the same shape with map-frame ``(x, y)`` on that axis.
    """
    p = np.asarray(p, dtype=float)
    lat, fwd = p[..., 0], p[..., 1]
    c, s = math.cos(xi.theta), math.sin(xi.theta)
    out = np.empty(p.shape, dtype=float)
    out[..., 0] = xi.x + fwd * c + lat * s
    out[..., 1] = xi.y + fwd * s - lat * c
    return out


@dataclass(frozen=True)
class GridSpec:
    """Geometry of a regular grid: cell size, extent, and placement.

    ``origin`` is the map-frame position of the center of cell (0, 0);
    rows (i) advance north, columns (j) advance east, ``delta`` meters per
    cell.
    """

    origin_x: float
    origin_y: float
    delta: float
    width: int
    height: int

    def __post_init__(self):
        if self.delta <= 0:
            raise ValueError(f"delta must be positive, got {self.delta}")
        if self.width < 1 or self.height < 1:
            raise ValueError(f"grid must be at least 1x1, got {self.width}x{self.height}")

    @property
    def shape(self) -> tuple[int, int]:
        """(height, width) — numpy array shape of one channel."""
        return (self.height, self.width)

    def cell_center(self, i, j) -> np.ndarray:
        """Map-frame (x, y) of the center of cell (row i, col j)."""
        i = np.asarray(i, dtype=float)
        j = np.asarray(j, dtype=float)
        return np.stack(
            [self.origin_x + j * self.delta, self.origin_y + i * self.delta], axis=-1
        )

    def cell_of(self, p) -> tuple:
        """Inverse of :meth:`cell_center` with round-half-up tie breaking.

        Returns integer arrays (i, j); indices may fall outside the grid.
        """
        p = np.asarray(p, dtype=float)
        j = np.floor((p[..., 0] - self.origin_x) / self.delta + 0.5).astype(np.int64)
        i = np.floor((p[..., 1] - self.origin_y) / self.delta + 0.5).astype(np.int64)
        return i, j

    def frac_index(self, p) -> tuple:
        """Continuous (row, col) coordinates of map points (cell_center == integers)."""
        p = np.asarray(p, dtype=float)
        j = (p[..., 0] - self.origin_x) / self.delta
        i = (p[..., 1] - self.origin_y) / self.delta
        return i, j

    def in_bounds(self, i, j):
        return (np.asarray(i) >= 0) & (np.asarray(i) < self.height) & (
            np.asarray(j) >= 0
        ) & (np.asarray(j) < self.width)


@dataclass(frozen=True)
class Datum:
    """Origin of the local scaled-Mercator frame (degrees)."""

    lon0: float
    lat0: float

    def __post_init__(self):
        if not -90.0 < self.lat0 < 90.0:
            raise ValueError(f"datum latitude out of range: {self.lat0}")
        if not -180.0 <= self.lon0 < 180.0:
            raise ValueError(f"datum longitude out of range: {self.lon0}")


def wgs84_to_local(datum: Datum, lon, lat) -> np.ndarray:
    """Project WGS84 lon/lat (degrees) to east/north meters.

    Scaled Mercator about the datum: the Mercator map scaled by cos(lat0)
    so distances are metric near the datum, with the datum at (0, 0).
    Accepts scalars or arrays; latitudes must lie in (-85, 85).
    """
    lon = np.asarray(lon, dtype=float)
    lat = np.asarray(lat, dtype=float)
    if np.any(np.abs(lat) >= 85.0):
        raise ValueError("latitude out of the supported (-85, 85) degree range")
    lam = np.radians(lon)
    phi = np.radians(lat)
    lam0 = math.radians(datum.lon0)
    phi0 = math.radians(datum.lat0)
    s = math.cos(phi0)
    x = s * EARTH_RADIUS_M * (lam - lam0)
    y = s * EARTH_RADIUS_M * (
        np.log(np.tan(math.pi / 4.0 + phi / 2.0)) - math.log(math.tan(math.pi / 4.0 + phi0 / 2.0))
    )
    return np.stack([x, y], axis=-1)
