"""Multi-view fusion of pose posteriors and recursive Markov localization.

Fusing views expressed relative to a reference pose multiplies their
warped probability volumes (sum of logs, renormalized). The Markov step
runs the classic predict (warp by inverse odometry + motion blur) and
update (elementwise product with the measurement) cycle on the same
volumes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import gaussian_filter1d

from .errors import DomainError, FormatError
from .geometry import Pose2, compose, inverse
from .volumes import KIND_PROBABILITY, PROB_FLOOR, PoseVolume


def _require_probability(P: PoseVolume):
    if P.kind != KIND_PROBABILITY:
        raise DomainError("operation requires a probability-kind volume")


def _normalized(values: np.ndarray, spec) -> PoseVolume:
    total = float(values.sum())
    if total <= 0.0:
        raise DomainError("volume has no probability mass to normalize")
    return PoseVolume(values / total, spec, KIND_PROBABILITY)


def warp_volume(P_j: PoseVolume, rel: Pose2) -> PoseVolume:
    """Resample so that output bin xi holds P_j at compose(xi, rel).

    The sample position's planar offset depends only on the rotation bin,
    so each output rotation slab is a theta-interpolated source plane
    shifted by a constant 2D offset. Sample points outside the source's
    bin-center hull get the floor 1e-12; output is renormalized.
    """
    _require_probability(P_j)
    vals = P_j.values
    H, W, K = vals.shape
    delta = P_j.spec.delta
    binw = P_j.theta_bin_width
    angles = P_j.rotations
    out = np.empty_like(vals)
    for k in range(K):
        c = math.cos(float(angles[k]))
        s = math.sin(float(angles[k]))
        # fractional source indices: fi = i + a, fj = j + b, fk circular
        a = (s * rel.x + c * rel.y) / delta
        b = (c * rel.x - s * rel.y) / delta
        fk = (k + rel.theta / binw) % K
        k0 = int(math.floor(fk)) % K
        k1 = (k0 + 1) % K
        wk = fk - math.floor(fk)
        plane = (1.0 - wk) * vals[:, :, k0] + wk * vals[:, :, k1]

        ia, da = int(math.floor(a)), a - math.floor(a)
        jb, db = int(math.floor(b)), b - math.floor(b)
        slab = np.full((H, W), PROB_FLOOR)
        # output rows with the full sample inside the hull: 0 <= i+a <= H-1
        i_lo = max(0, int(math.ceil(-a)))
        i_hi = min(H - 1, int(math.floor(H - 1 - a)))
        j_lo = max(0, int(math.ceil(-b)))
        j_hi = min(W - 1, int(math.floor(W - 1 - b)))
        if i_lo <= i_hi and j_lo <= j_hi:
            src_i = np.arange(i_lo, i_hi + 1) + ia
            src_j = np.arange(j_lo, j_hi + 1) + jb
            src_i1 = np.minimum(src_i + 1, H - 1)
            src_j1 = np.minimum(src_j + 1, W - 1)
            p00 = plane[np.ix_(src_i, src_j)]
            p01 = plane[np.ix_(src_i, src_j1)]
            p10 = plane[np.ix_(src_i1, src_j)]
            p11 = plane[np.ix_(src_i1, src_j1)]
            slab[i_lo : i_hi + 1, j_lo : j_hi + 1] = (
                (1.0 - da) * ((1.0 - db) * p00 + db * p01)
                + da * ((1.0 - db) * p10 + db * p11)
            )
        out[:, :, k] = slab
    return _normalized(out, P_j.spec)


def fuse_views(volumes: list, rels: list) -> PoseVolume:
    """Product of the warped per-view posteriors (Eq. of the warped product).

    Accumulates logs in list order (deterministic); each warped volume is
    floored at 1e-12 before the log so a zero in one view cannot
    annihilate mass supported by the others.
    """
    if len(volumes) == 0:
        raise DomainError("cannot fuse an empty list of views")
    if len(volumes) != len(rels):
        raise DomainError("volumes and relative poses must pair up")
    spec = volumes[0].spec
    shape = volumes[0].values.shape
    acc = np.zeros(shape)
    for P_j, rel in zip(volumes, rels):
        if P_j.values.shape != shape:
            raise DomainError("fused volumes must share one grid and K")
        warped = warp_volume(P_j, rel)
        acc += np.log(np.maximum(warped.values, PROB_FLOOR))
    p = np.exp(acc - acc.max())
    return _normalized(p, spec)


def markov_step(prev: PoseVolume, odometry: Pose2, motion_noise: tuple,
                measurement: PoseVolume) -> PoseVolume:
    """One predict/update cycle of grid-based Markov localization.

    predict: warp prev by the inverse odometry, then blur with a separable
    Gaussian (sigma_xy meters in x and y, sigma_theta radians circular in
    theta, kernels truncated at 3 sigma). update: renormalized product of
    the floored predict and measurement.
    """
    _require_probability(measurement)
    if prev.values.shape != measurement.values.shape:
        raise DomainError("prior and measurement grids must agree")
    predict = warp_volume(prev, inverse(odometry)).values
    sigma_xy, sigma_th = motion_noise
    if sigma_xy > 0.0:
        cells = sigma_xy / prev.spec.delta
        # reflect keeps a constant field exactly constant at the borders
        predict = gaussian_filter1d(predict, cells, axis=0, mode="reflect", truncate=3.0)
        predict = gaussian_filter1d(predict, cells, axis=1, mode="reflect", truncate=3.0)
    if sigma_th > 0.0 and prev.K > 1:
        bins = sigma_th / prev.theta_bin_width
        predict = gaussian_filter1d(predict, bins, axis=2, mode="wrap", truncate=3.0)
    post = np.maximum(predict, PROB_FLOOR) * np.maximum(measurement.values, PROB_FLOOR)
    return _normalized(post, prev.spec)


@dataclass
class TrajectoryFrame:
    """One record of a trajectory file: frame id, motion since the previous
    frame (identity for the first), and the path of its measurement volume."""

    frame_id: str
    motion: Pose2
    volume_path: str


def load_trajectory(f) -> list:
    """Parse the plain-text trajectory schema.

    One frame per line: ``frame_id dx dy dtheta volume_path`` with dx/dy in
    meters and dtheta in radians, whitespace separated; ``#`` starts a
    comment; blank lines are skipped.
    """
    close = False
    if isinstance(f, (str, bytes)) or hasattr(f, "__fspath__"):
        f = open(f, "r")
        close = True
    frames = []
    try:
        for lineno, line in enumerate(f, start=1):
            body = line.split("#", 1)[0].strip()
            if not body:
                continue
            parts = body.split()
            if len(parts) != 5:
                raise FormatError(
                    f"trajectory line {lineno}: expected "
                    f"'frame_id dx dy dtheta volume_path', got {len(parts)} fields"
                )
            try:
                motion = Pose2(float(parts[1]), float(parts[2]), float(parts[3]))
            except ValueError as exc:
                raise FormatError(f"trajectory line {lineno}: {exc}") from exc
            frames.append(TrajectoryFrame(parts[0], motion, parts[4]))
    finally:
        if close:
            f.close()
    return frames


def reference_rels(frames: list) -> list:
    """Relative pose of each frame expressed in the last frame's frame.

    Chains the per-frame motions into poses p_t (p_0 treats the first
    record's motion as its absolute offset, normally identity), then
    returns rel_t = inverse(p_ref) o p_t with ref = the last frame.
    """
    if not frames:
        raise DomainError("empty trajectory")
    poses = []
    cur = Pose2(0.0, 0.0, 0.0)
    for fr in frames:
        cur = compose(cur, fr.motion)
        poses.append(cur)
    ref_inv = inverse(poses[-1])
    return [compose(ref_inv, p) for p in poses]
