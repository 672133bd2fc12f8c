"""Exhaustive 3-DoF template matching of a BEV against the map features.

The score of pose bin (i, j, k) is the confidence-weighted inner product
between the BEV features, rigidly placed at cell (i, j) with heading
theta_k, and the bilinearly sampled map features, normalized by the count
of confident BEV cells. Two backends produce the same volume:

* ``naive`` gathers map samples per pose (compiled kernel);
* ``fourier`` splats the rotated template onto the map lattice and
  evaluates all translations at once as an FFT cross-correlation.

For integer translations the splat formulation is term-for-term the naive
gather sum, so the backends differ only by floating-point reassociation
(within 1e-5 of the volume's max magnitude).
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.fft as sfft

from . import kernels
from .bev import BevGrid
from .errors import ConfigurationError, DegeneratePriorError, DomainError
from .geometry import Pose2
from .mapenc import NeuralMap
from .volumes import KIND_LOG_SCORE, KIND_PROBABILITY, PoseVolume, rotation_angles

PITCH_RTOL = 1e-9


def _fast_size(n: int) -> int:
    """Smallest 7-smooth integer >= n (radices the FFT handles fastest)."""
    if n <= 1:
        return 1
    best = None
    p7 = 1
    while True:
        p5 = p7
        while True:
            p3 = p5
            while True:
                p2 = p3
                while p2 < n:
                    p2 *= 2
                if best is None or p2 < best:
                    best = p2
                if p3 >= n:
                    break
                p3 *= 3
            if p5 >= n:
                break
            p5 *= 5
        if p7 >= n:
            break
        p7 *= 7
    return best


@dataclass
class RotatedTemplate:
    """Template resampled onto the map-pitch lattice around the camera cell.

    ``feat[p]``/``conf[p]`` hold the bilinearly deposited weighted features
    (T*C) and confidences; patch cell (center, center) is the camera cell.
    Exactness note: at theta=0 the deposit is the identity only when the
    BEV offsets are integral in map-pitch units (odd L), otherwise lateral
    half-cell offsets split each value across two lattice cells.
    """

    feat: np.ndarray  # (P, P, N)
    conf: np.ndarray  # (P, P)
    center: int
    theta: float


def _cell_offsets(L: int, D: int):
    """Lateral/forward BEV cell offsets in map-pitch units (exact doubles)."""
    lat = np.arange(L, dtype=np.float64) - (L - 1) / 2.0
    fwd = np.arange(D, dtype=np.float64) + 1.0
    return lat, fwd


def template_radius(L: int, D: int) -> int:
    """Patch radius covering every rotated BEV cell plus its bilinear taps."""
    lat, fwd = _cell_offsets(L, D)
    reach = math.sqrt(max(abs(lat[0]), abs(lat[-1])) ** 2 + fwd[-1] ** 2)
    return int(math.ceil(reach)) + 1


def _check_pitch(bev_delta: float, map_delta: float):
    if not math.isclose(bev_delta, map_delta, rel_tol=PITCH_RTOL, abs_tol=0.0):
        raise ConfigurationError(
            f"BEV pitch {bev_delta} does not match map pitch {map_delta}"
        )


def rotate_template(T: BevGrid, theta: float, map_delta: Optional[float] = None) -> RotatedTemplate:
    """Resample T*C and C under rotation about the camera onto the map pitch.

    Bilinear deposit (the adjoint of map-side sampling); cells outside the
    rotated support keep weight 0.
    """
    if map_delta is not None:
        _check_pitch(T.delta, map_delta)
    lat, fwd = _cell_offsets(T.L, T.D)
    r = template_radius(T.L, T.D)
    P = 2 * r + 1
    tc = np.ascontiguousarray(T.T * T.C[:, :, None], dtype=np.float64)
    conf = np.ascontiguousarray(T.C, dtype=np.float64)
    feat_out = np.zeros((P, P, T.n))
    conf_out = np.zeros((P, P))
    c, s = math.cos(theta), math.sin(theta)
    kernels.splat_rotated(tc, conf, lat, fwd, c, s, feat_out, conf_out, float(r))
    return RotatedTemplate(feat_out, conf_out, r, theta)


class MatchPlan:
    """Cached per-map state for repeated fourier-backend matching.

    Holds the zero-padded map spectra for one (map, K, BEV shape)
    combination; reusing a plan across calls skips the map-side FFTs.
    """

    def __init__(self, nmap: NeuralMap, K: int, L: int, D: int):
        self.K = K
        self.L = L
        self.D = D
        self.angles = rotation_angles(K)
        self.radius = template_radius(L, D)
        H, W = nmap.spec.height, nmap.spec.width
        self.shape = (H, W)
        # no-wrap condition: padded size >= map extent + patch radius
        self.nf = (_fast_size(H + self.radius), _fast_size(W + self.radius))
        fmap = np.ascontiguousarray(nmap.F, dtype=np.float64)
        # (nf0, nf1//2+1, N) spectra of the zero-padded map channels; the
        # two-step transform skips the padding rows on the first pass
        self.map_spectra = sfft.fft(
            sfft.rfft(fmap, n=self.nf[1], axis=1), n=self.nf[0], axis=0
        )

    def matches(self, nmap: NeuralMap, K: int, T: BevGrid) -> bool:
        return (
            self.K == K
            and (self.L, self.D) == (T.L, T.D)
            and self.shape == (nmap.spec.height, nmap.spec.width)
            and self.map_spectra.shape[2] == nmap.n
        )


def _corner_to_centered(corr, H, W, r, out2d):
    """out2d[x] = corr[(x - r) mod nf] per axis, as four block copies."""
    n0, n1 = corr.shape
    if r > H or r > W:  # tiny maps: patch radius exceeds the map extent
        rows = (np.arange(H) - r) % n0
        cols = (np.arange(W) - r) % n1
        out2d[:] = corr[np.ix_(rows, cols)]
        return
    out2d[:r, :r] = corr[n0 - r :, n1 - r :]
    out2d[:r, r:] = corr[n0 - r :, : W - r]
    out2d[r:, :r] = corr[: H - r, n1 - r :]
    out2d[r:, r:] = corr[: H - r, : W - r]


def _score_fourier_slab(plan, tc, conf, lat, fwd, z, out, k_lo, k_hi):
    P = 2 * plan.radius + 1
    n = tc.shape[2]
    H, W = plan.shape
    r = plan.radius
    buf = np.empty((H, W))
    feat = np.empty((P, P, n))
    cbuf = np.empty((P, P))
    for k in range(k_lo, k_hi):
        c = math.cos(float(plan.angles[k]))
        s = math.sin(float(plan.angles[k]))
        feat.fill(0.0)
        cbuf.fill(0.0)
        kernels.splat_rotated(tc, conf, lat, fwd, c, s, feat, cbuf, float(r))
        spec = sfft.fft(sfft.rfft(feat, n=plan.nf[1], axis=1), n=plan.nf[0], axis=0)
        acc = np.einsum("ijn,ijn->ij", plan.map_spectra, spec.conj())
        corr = sfft.irfft2(acc, s=plan.nf)
        _corner_to_centered(corr, H, W, r, buf)
        out[:, :, k] = buf / z


def _score_naive_slab(fmap64, tc, lat, fwd, angles, z, out, k_lo, k_hi):
    kernels.score_naive(fmap64, tc, lat, fwd, angles, z, out, k_lo, k_hi)


def score_volume(F: NeuralMap, T: BevGrid, K: int, backend: str = "fourier",
                 plan: Optional[MatchPlan] = None, threads: int = 1) -> PoseVolume:
    """Score every pose bin; returns a log-score PoseVolume (H, W, K).

    Translations where the rotated template exits the map are evaluated
    against zero-padding of F. A template with no confident cells scores
    zero everywhere.
    """
    _check_pitch(T.delta, F.spec.delta)
    H, W = F.spec.height, F.spec.width
    diag = math.hypot(T.L, T.D)
    if min(H, W) < diag:
        raise DomainError(
            f"map {H}x{W} is smaller than the template diagonal {diag:.1f} cells"
        )
    angles = rotation_angles(K)
    out = np.empty((H, W, K))
    zcount = int(np.count_nonzero(T.C > 0.0))
    if zcount == 0:
        out.fill(0.0)
        return PoseVolume(out, F.spec, KIND_LOG_SCORE)
    z = float(zcount)
    lat, fwd = _cell_offsets(T.L, T.D)
    tc = np.ascontiguousarray(T.T * T.C[:, :, None], dtype=np.float64)

    if backend == "naive":
        fmap64 = np.ascontiguousarray(F.F, dtype=np.float64)
        run = lambda lo, hi: _score_naive_slab(fmap64, tc, lat, fwd, angles, z, out, lo, hi)
    elif backend == "fourier":
        if plan is None or not plan.matches(F, K, T):
            plan = MatchPlan(F, K, T.L, T.D)
        conf = np.ascontiguousarray(T.C, dtype=np.float64)
        run = lambda lo, hi: _score_fourier_slab(plan, tc, conf, lat, fwd, z, out, lo, hi)
    else:
        raise ConfigurationError(f"unknown backend {backend!r}")

    # workers beyond the hardware concurrency only add contention
    threads = max(1, min(int(threads), os.cpu_count() or 1))
    if threads == 1 or K == 1:
        run(0, K)
    else:
        # disjoint rotation slabs; each k is computed independently, so the
        # result is identical for any thread count
        bounds = np.linspace(0, K, min(threads, K) + 1).astype(int)
        with ThreadPoolExecutor(max_workers=threads) as pool:
            futures = [
                pool.submit(run, int(lo), int(hi))
                for lo, hi in zip(bounds[:-1], bounds[1:])
                if hi > lo
            ]
            for fut in futures:
                fut.result()
    return PoseVolume(out, F.spec, KIND_LOG_SCORE)


def pose_posterior(M: PoseVolume, omega: np.ndarray,
                   prior_center: Optional[Pose2] = None,
                   prior_radius: Optional[float] = None) -> PoseVolume:
    """P = softmax(M + omega) over all bins, with an optional hard prior.

    omega broadcasts along the rotation dimension. With a prior, cells
    farther than prior_radius from prior_center are masked out before the
    softmax.
    """
    omega = np.asarray(omega, dtype=np.float64)
    if omega.shape != M.values.shape[:2]:
        raise DomainError(
            f"prior shape {omega.shape} does not match volume {M.values.shape[:2]}"
        )
    scores = M.values + omega[:, :, None]
    if (prior_center is None) != (prior_radius is None):
        raise DomainError("prior_center and prior_radius must be supplied together")
    if prior_center is not None:
        spec = M.spec
        ii, jj = np.meshgrid(np.arange(spec.height), np.arange(spec.width), indexing="ij")
        centers = spec.cell_center(ii, jj)
        dist = np.hypot(centers[..., 0] - prior_center.x, centers[..., 1] - prior_center.y)
        scores = np.where((dist <= prior_radius)[:, :, None], scores, -np.inf)
    top = scores.max()
    if not np.isfinite(top):
        raise DegeneratePriorError("prior masked out every pose bin")
    p = np.exp(scores - top)
    p /= p.sum()
    return PoseVolume(p, M.spec, KIND_PROBABILITY)
