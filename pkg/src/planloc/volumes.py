"""Discretized distributions over 3-DoF poses.

A PoseVolume holds one real value per (position cell, heading bin). The
array layout is (H, W, K): row i indexes y/north, column j indexes x/east
(matching GridSpec), and k indexes the heading bins
theta_k = -pi + 2*pi*k/K.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import formats
from .errors import DomainError, FormatError
from .geometry import GridSpec

KIND_LOG_SCORE = "log-score"
KIND_PROBABILITY = "probability"

PROB_FLOOR = 1e-12


def rotation_angles(K: int) -> np.ndarray:
    """Evenly spaced heading bins theta_k = -pi + 2*pi*k/K."""
    if K < 1:
        raise DomainError(f"rotation count must be >= 1, got {K}")
    return -math.pi + 2.0 * math.pi * np.arange(K) / K


@dataclass
class PoseVolume:
    values: np.ndarray  # (H, W, K) float64
    spec: GridSpec
    kind: str

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 3:
            raise DomainError(f"pose volume must be 3-D, got shape {self.values.shape}")
        if self.values.shape[:2] != (self.spec.height, self.spec.width):
            raise DomainError(
                f"volume shape {self.values.shape} does not match grid "
                f"{self.spec.height}x{self.spec.width}"
            )
        if self.kind not in (KIND_LOG_SCORE, KIND_PROBABILITY):
            raise DomainError(f"unknown volume kind {self.kind!r}")

    @property
    def K(self) -> int:
        return self.values.shape[2]

    @property
    def rotations(self) -> np.ndarray:
        return rotation_angles(self.K)

    @property
    def theta_bin_width(self) -> float:
        return 2.0 * math.pi / self.K

    def assert_probability(self, tol=1e-6):
        if self.kind != KIND_PROBABILITY:
            raise DomainError(f"expected a probability volume, got {self.kind}")
        total = float(self.values.sum())
        if not math.isfinite(total) or abs(total - 1.0) > tol:
            raise DomainError(f"probability volume sums to {total}, not 1")
        if self.values.min() < 0.0:
            raise DomainError("probability volume has negative entries")

    def save(self, f):
        close = False
        if isinstance(f, (str, bytes)) or hasattr(f, "__fspath__"):
            f = open(f, "wb")
            close = True
        try:
            formats.write_magic(f, formats.MAGIC_POSE_VOLUME)
            formats.write_grid_spec(f, self.spec)
            kind_code = 1 if self.kind == KIND_PROBABILITY else 0
            formats.pack_values(f, "IB", self.K, kind_code)
            formats.write_array(f, self.values, "<f4")
        finally:
            if close:
                f.close()

    @classmethod
    def load(cls, f) -> "PoseVolume":
        close = False
        if isinstance(f, (str, bytes)) or hasattr(f, "__fspath__"):
            f = open(f, "rb")
            close = True
        try:
            formats.read_magic(f, formats.MAGIC_POSE_VOLUME)
            spec = formats.read_grid_spec(f)
            K, kind_code = formats.unpack_values(f, "IB")
            if K < 1:
                raise FormatError(f"invalid rotation count {K}")
            values = formats.read_array(f, (spec.height, spec.width, K), "<f4")
            kind = KIND_PROBABILITY if kind_code else KIND_LOG_SCORE
            return cls(values.astype(np.float64), spec, kind)
        finally:
            if close:
                f.close()


def uniform(spec: GridSpec, K: int) -> PoseVolume:
    n = spec.height * spec.width * K
    vals = np.full((spec.height, spec.width, K), 1.0 / n)
    return PoseVolume(vals, spec, KIND_PROBABILITY)


def frac_theta_index(theta: float, K: int) -> float:
    """Continuous heading-bin coordinate in [0, K) for a wrapped angle."""
    width = 2.0 * math.pi / K
    f = (theta + math.pi) / width % K
    return f


def trilinear(vol: PoseVolume, x: float, y: float, theta: float) -> float:
    """Trilinear interpolation of the volume at a continuous pose.

    x/y interpolate over the position grid (domain: the cell-center hull),
    theta interpolates circularly across the K seam. Raises DomainError for
    positions outside the hull.
    """
    spec = vol.spec
    fi = (y - spec.origin_y) / spec.delta
    fj = (x - spec.origin_x) / spec.delta
    if not (0.0 <= fi <= spec.height - 1 and 0.0 <= fj <= spec.width - 1):
        raise DomainError(f"pose ({x}, {y}) outside the volume extent")
    K = vol.K
    fk = frac_theta_index(theta, K)

    i0 = min(int(math.floor(fi)), spec.height - 2) if spec.height > 1 else 0
    j0 = min(int(math.floor(fj)), spec.width - 2) if spec.width > 1 else 0
    di = fi - i0
    dj = fj - j0
    k0 = int(math.floor(fk)) % K
    k1 = (k0 + 1) % K
    dk = fk - math.floor(fk)

    v = vol.values
    out = 0.0
    for ii, wi in ((i0, 1.0 - di), (min(i0 + 1, spec.height - 1), di)):
        for jj, wj in ((j0, 1.0 - dj), (min(j0 + 1, spec.width - 1), dj)):
            w = wi * wj
            if w == 0.0:
                continue
            out += w * ((1.0 - dk) * v[ii, jj, k0] + dk * v[ii, jj, k1])
    return float(out)
