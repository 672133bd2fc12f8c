"""Geometric lifting of image-column features into a Cartesian BEV grid.

Column features carry, per image column u and row v, an N-vector and a
score over S+1 log-spaced scale values (scale = focal length / depth).
Lifting resamples the scores at each depth plane's scale, turns them into
a per-plane attention over rows, and averages the column features under
that attention; Cartesian resampling then interpolates the resulting polar
rays laterally onto a metric grid with a frustum-shaped confidence mask.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import formats
from .errors import DomainError, FormatError


@dataclass(frozen=True)
class ScaleBins:
    """Log-distributed scale values sigma(i) = smin*(smax/smin)^(i/S), i in 0..S."""

    sigma_min: float
    sigma_max: float
    S: int

    def __post_init__(self):
        if not 0 < self.sigma_min < self.sigma_max:
            raise DomainError(f"need 0 < sigma_min < sigma_max, got {self.sigma_min}, {self.sigma_max}")
        if self.S < 1:
            raise DomainError(f"need S >= 1, got {self.S}")

    def values(self) -> np.ndarray:
        i = np.arange(self.S + 1)
        return self.sigma_min * (self.sigma_max / self.sigma_min) ** (i / self.S)

    def depth_interval(self, f: float) -> tuple:
        """Representable metric depth range [f/sigma_max, f/sigma_min]."""
        return (f / self.sigma_max, f / self.sigma_min)


def sigma_for_depth(f: float, depth: float) -> float:
    if f <= 0 or depth <= 0:
        raise DomainError("focal length and depth must be positive")
    return f / depth


def depth_for_sigma(f: float, sigma: float) -> float:
    if f <= 0 or sigma <= 0:
        raise DomainError("focal length and scale must be positive")
    return f / sigma


def scale_to_bin(sigma, bins: ScaleBins):
    """Continuous bin index S*log(sigma/smin)/log(smax/smin); NaN out of range.

    Accepts scalars or arrays; out-of-range scales map to NaN (the marker)
    rather than raising or clamping.
    """
    sigma = np.asarray(sigma, dtype=float)
    ratio = math.log(bins.sigma_max / bins.sigma_min)
    with np.errstate(invalid="ignore", divide="ignore"):
        idx = bins.S * np.log(sigma / bins.sigma_min) / ratio
        idx = np.where((sigma >= bins.sigma_min) & (sigma <= bins.sigma_max), idx, np.nan)
    return float(idx) if idx.ndim == 0 else idx


@dataclass
class ColumnFeatures:
    """Per-column image features X (U, V, N) and scale scores (U, V, S+1)."""

    X: np.ndarray
    Sscores: np.ndarray
    f: float
    cx: float

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=np.float64)
        self.Sscores = np.asarray(self.Sscores, dtype=np.float64)
        if self.X.ndim != 3 or self.Sscores.ndim != 3:
            raise FormatError("column features must be (U, V, N) and (U, V, S+1)")
        if self.X.shape[:2] != self.Sscores.shape[:2]:
            raise FormatError("feature and score grids disagree on (U, V)")
        if self.f <= 0:
            raise DomainError(f"focal length must be positive, got {self.f}")
        if not (np.all(np.isfinite(self.X)) and np.all(np.isfinite(self.Sscores))):
            raise FormatError("column features contain non-finite values")

    @property
    def U(self):
        return self.X.shape[0]

    @property
    def V(self):
        return self.X.shape[1]

    @property
    def n(self):
        return self.X.shape[2]

    @property
    def S(self):
        return self.Sscores.shape[2] - 1

    def save(self, f):
        close = False
        if isinstance(f, (str, bytes)) or hasattr(f, "__fspath__"):
            f = open(f, "wb")
            close = True
        try:
            formats.write_magic(f, formats.MAGIC_COLUMN_FEATURES)
            formats.pack_values(f, "IIIIdd", self.U, self.V, self.n, self.S, self.f, self.cx)
            formats.write_array(f, self.X, "<f4")
            formats.write_array(f, self.Sscores, "<f4")
        finally:
            if close:
                f.close()

    @classmethod
    def load(cls, f) -> "ColumnFeatures":
        close = False
        if isinstance(f, (str, bytes)) or hasattr(f, "__fspath__"):
            f = open(f, "rb")
            close = True
        try:
            formats.read_magic(f, formats.MAGIC_COLUMN_FEATURES)
            U, V, n, S, focal, cx = formats.unpack_values(f, "IIIIdd")
            if min(U, V, n) < 1 or S < 1:
                raise FormatError(f"invalid column-feature dimensions {(U, V, n, S)}")
            X = formats.read_array(f, (U, V, n), "<f4")
            Ss = formats.read_array(f, (U, V, S + 1), "<f4")
            return cls(X.astype(np.float64), Ss.astype(np.float64), focal, cx)
        finally:
            if close:
                f.close()


@dataclass
class PolarGrid:
    """Rays of lifted features: feat (U, D, N), valid (U, D)."""

    feat: np.ndarray
    valid: np.ndarray


@dataclass
class BevGrid:
    """Cartesian BEV: features T (L, D, N), confidence C (L, D) in [0, 1].

    Cell (l, d) sits at lateral (l - (L-1)/2)*delta, forward (d+1)*delta
    meters in the camera frame. Cells with zero confidence carry zero
    features.
    """

    T: np.ndarray
    C: np.ndarray
    delta: float

    def __post_init__(self):
        self.T = np.asarray(self.T, dtype=np.float64)
        self.C = np.asarray(self.C, dtype=np.float64)
        if self.T.ndim != 3 or self.C.shape != self.T.shape[:2]:
            raise FormatError("BEV arrays must be T (L, D, N) and C (L, D)")
        if self.C.min(initial=0.0) < 0.0 or self.C.max(initial=0.0) > 1.0:
            raise FormatError("confidence must lie in [0, 1]")
        if self.delta <= 0:
            raise DomainError(f"cell size must be positive, got {self.delta}")

    @property
    def L(self):
        return self.T.shape[0]

    @property
    def D(self):
        return self.T.shape[1]

    @property
    def n(self):
        return self.T.shape[2]

    def lateral_offsets_m(self) -> np.ndarray:
        return (np.arange(self.L) - (self.L - 1) / 2.0) * self.delta

    def forward_offsets_m(self) -> np.ndarray:
        return (np.arange(self.D) + 1.0) * self.delta

    def extent_m(self) -> tuple:
        """(lateral, forward) metric coverage."""
        return (self.L * self.delta, self.D * self.delta)

    def save(self, f):
        close = False
        if isinstance(f, (str, bytes)) or hasattr(f, "__fspath__"):
            f = open(f, "wb")
            close = True
        try:
            formats.write_magic(f, formats.MAGIC_BEV)
            formats.pack_values(f, "IIId", self.L, self.D, self.n, self.delta)
            formats.write_array(f, self.T, "<f4")
            formats.write_array(f, self.C, "<f4")
        finally:
            if close:
                f.close()

    @classmethod
    def load(cls, f) -> "BevGrid":
        close = False
        if isinstance(f, (str, bytes)) or hasattr(f, "__fspath__"):
            f = open(f, "rb")
            close = True
        try:
            formats.read_magic(f, formats.MAGIC_BEV)
            L, D, n, delta = formats.unpack_values(f, "IIId")
            if min(L, D, n) < 1:
                raise FormatError(f"invalid BEV dimensions {(L, D, n)}")
            T = formats.read_array(f, (L, D, n), "<f4")
            C = formats.read_array(f, (L, D), "<f4")
            return cls(T.astype(np.float64), C.astype(np.float64), delta)
        finally:
            if close:
                f.close()


def lift_polar(cols: ColumnFeatures, bins: ScaleBins, delta: float, D: int) -> PolarGrid:
    """Lift column features onto D regular depth planes (depth = (d+1)*delta).

    Per valid plane: interpolate each pixel's scale scores at the plane's
    continuous bin index, soft-max the interpolated scores over image rows
    into an attention, and average the column features under it. Planes
    whose scale falls outside the bins get zero features and valid=False.
    """
    if D < 1:
        raise DomainError(f"need D >= 1, got {D}")
    if cols.S != bins.S:
        raise FormatError(f"scale scores carry S={cols.S} but bins expect S={bins.S}")
    U, V, N = cols.X.shape
    depths = (np.arange(D) + 1.0) * delta
    sigmas = cols.f / depths
    b = scale_to_bin(sigmas, bins)  # (D,), NaN marks out-of-range planes
    valid_d = ~np.isnan(b)

    feat = np.zeros((U, D, N))
    valid = np.zeros((U, D), dtype=bool)
    if valid_d.any():
        bv = b[valid_d]
        i0 = np.minimum(np.floor(bv), bins.S - 1).astype(int)
        w = bv - i0
        # (U, V, Dv): scores linearly interpolated at each plane's bin
        scores = cols.Sscores[:, :, i0] * (1.0 - w) + cols.Sscores[:, :, i0 + 1] * w
        scores = scores - scores.max(axis=1, keepdims=True)
        alpha = np.exp(scores)
        alpha /= alpha.sum(axis=1, keepdims=True)
        feat[:, valid_d, :] = np.einsum("uvd,uvn->udn", alpha, cols.X)
        valid[:, valid_d] = True
    return PolarGrid(feat, valid)


def lift_alpha(cols: ColumnFeatures, bins: ScaleBins, delta: float, D: int) -> np.ndarray:
    """Attention weights alpha (U, D, V) of :func:`lift_polar`; NaN rows invalid."""
    if cols.S != bins.S:
        raise FormatError(f"scale scores carry S={cols.S} but bins expect S={bins.S}")
    U, V, _ = cols.X.shape
    depths = (np.arange(D) + 1.0) * delta
    b = scale_to_bin(cols.f / depths, bins)
    alpha = np.full((U, D, V), np.nan)
    valid_d = ~np.isnan(b)
    if valid_d.any():
        bv = b[valid_d]
        i0 = np.minimum(np.floor(bv), bins.S - 1).astype(int)
        w = bv - i0
        scores = cols.Sscores[:, :, i0] * (1.0 - w) + cols.Sscores[:, :, i0 + 1] * w
        scores = scores - scores.max(axis=1, keepdims=True)
        a = np.exp(scores)
        a /= a.sum(axis=1, keepdims=True)
        alpha[:, valid_d, :] = np.transpose(a, (0, 2, 1))
    return alpha


def polar_to_cartesian(polar: PolarGrid, cols: ColumnFeatures, delta: float, L: int) -> BevGrid:
    """Resample U polar rays onto L lateral columns of a metric BEV grid.

    BEV cell (l, d) maps to image column u = cx + f * x_l / y_d; features
    interpolate linearly between the two neighboring rays at depth row d.
    C = 1 where u lies in [0, U-1] and the source rays are valid (the
    camera frustum intersected with the valid depth band), else 0 with
    zero features.
    """
    if L < 1:
        raise DomainError(f"need L >= 1, got {L}")
    U, D, N = polar.feat.shape
    x_l = (np.arange(L) - (L - 1) / 2.0) * delta
    y_d = (np.arange(D) + 1.0) * delta
    u = cols.cx + cols.f * x_l[:, None] / y_d[None, :]  # (L, D)

    inside = (u >= 0.0) & (u <= U - 1.0)
    uc = np.clip(u, 0.0, U - 1.0)
    i0 = np.minimum(np.floor(uc).astype(int), U - 1)
    i1 = np.minimum(i0 + 1, U - 1)
    w = uc - i0

    dd = np.broadcast_to(np.arange(D)[None, :], (L, D))
    feat = polar.feat[i0, dd] * (1.0 - w[..., None]) + polar.feat[i1, dd] * w[..., None]
    src_valid = polar.valid[i0, dd] & (polar.valid[i1, dd] | (w == 0.0))
    conf = (inside & src_valid).astype(np.float64)
    feat = np.where(conf[..., None] > 0.0, feat, 0.0)
    return BevGrid(feat, conf, delta)
