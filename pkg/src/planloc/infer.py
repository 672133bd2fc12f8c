"""Point estimates, uncertainty, multimodality, and the training objective.

All operations read a probability-kind PoseVolume. The pose axes are
x = east (columns), y = north (rows), theta = rotation bins.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import DomainError
from .geometry import Pose2
from .volumes import KIND_PROBABILITY, PROB_FLOOR, PoseVolume, trilinear


def _require_probability(P: PoseVolume):
    if P.kind != KIND_PROBABILITY:
        raise DomainError("operation requires a probability-kind volume")


def _quad_refine(f_lo: float, f0: float, f_hi: float) -> float:
    """Sub-bin offset of the parabola vertex through (-1, 0, +1) samples.

    Returns 0 when the fit is not concave; clamped to half a bin.
    """
    denom = f_lo - 2.0 * f0 + f_hi
    if denom >= 0.0:
        return 0.0
    delta = (f_lo - f_hi) / (2.0 * denom)
    return min(0.5, max(-0.5, delta))


def argmax_pose(P: PoseVolume) -> tuple:
    """Mode of the volume with separable quadratic sub-bin refinement.

    Returns (Pose2, probability of the max bin). Ties resolve to the
    smallest (i, j, k) in lexicographic order; refinement in x and y is
    skipped at grid edges, theta wraps.
    """
    _require_probability(P)
    vals = P.values
    H, W, K = vals.shape
    i, j, k = np.unravel_index(int(np.argmax(vals)), vals.shape)
    f0 = float(vals[i, j, k])

    dx = _quad_refine(float(vals[i, j - 1, k]), f0, float(vals[i, j + 1, k])) \
        if 0 < j < W - 1 else 0.0
    dy = _quad_refine(float(vals[i - 1, j, k]), f0, float(vals[i + 1, j, k])) \
        if 0 < i < H - 1 else 0.0
    dth = _quad_refine(float(vals[i, j, (k - 1) % K]), f0, float(vals[i, j, (k + 1) % K])) \
        if K > 1 else 0.0

    x, y = P.spec.cell_center(int(i), int(j))
    delta = P.spec.delta
    theta = float(P.rotations[k]) + dth * P.theta_bin_width
    return Pose2(x + dx * delta, y + dy * delta, theta), f0


def covariance(P: PoseVolume, mode: Pose2, window: tuple = (2.0, math.radians(10.0))) -> np.ndarray:
    """Probability-weighted second moment of (x, y, theta) about the mode.

    Only bins inside the box window (|dx| and |dy| within window[0] meters,
    wrapped |dtheta| within window[1] radians) contribute; weights are
    renormalized over the window.
    """
    _require_probability(P)
    H, W, K = P.values.shape
    ii, jj = np.meshgrid(np.arange(H), np.arange(W), indexing="ij")
    centers = P.spec.cell_center(ii, jj)
    rx = centers[..., 0] - mode.x
    ry = centers[..., 1] - mode.y
    rth = np.arctan2(np.sin(P.rotations - mode.theta), np.cos(P.rotations - mode.theta))

    keep_xy = (np.abs(rx) <= window[0]) & (np.abs(ry) <= window[0])
    keep = keep_xy[:, :, None] & (np.abs(rth) <= window[1])[None, None, :]
    mass = float(P.values[keep].sum())
    if mass <= 0.0:
        raise DomainError("no probability mass inside the covariance window")

    r = np.stack(
        [
            np.broadcast_to(rx[:, :, None], P.values.shape),
            np.broadcast_to(ry[:, :, None], P.values.shape),
            np.broadcast_to(rth[None, None, :], P.values.shape),
        ],
        axis=-1,
    )[keep]
    w = P.values[keep]
    cov = np.einsum("m,mi,mj->ij", w, r, r) / mass
    return 0.5 * (cov + cov.T)


def local_modes(P: PoseVolume, top_k: int, min_separation: tuple = (2.0, math.radians(10.0))) -> list:
    """Greedy non-maximum suppression; modes sorted by probability descending.

    A bin is suppressed by a selected mode when its position distance is
    within min_separation[0] meters AND its wrapped angle difference is
    within min_separation[1] radians.
    """
    _require_probability(P)
    H, W, K = P.values.shape
    sep_m, sep_rad = min_separation
    ii, jj = np.meshgrid(np.arange(H), np.arange(W), indexing="ij")
    centers = P.spec.cell_center(ii, jj)
    angles = P.rotations
    active = np.ones(P.values.shape, dtype=bool)
    modes = []
    while len(modes) < top_k:
        masked = np.where(active, P.values, -1.0)
        flat = int(np.argmax(masked))
        i, j, k = np.unravel_index(flat, P.values.shape)
        prob = float(P.values[i, j, k])
        if not active[i, j, k] or prob <= 0.0:
            break
        x, y = centers[i, j]
        theta = float(angles[k])
        modes.append((Pose2(x, y, theta), prob))
        near_xy = np.hypot(centers[..., 0] - x, centers[..., 1] - y) <= sep_m
        dth = np.arctan2(np.sin(angles - theta), np.cos(angles - theta))
        near_th = np.abs(dth) <= sep_rad
        active &= ~(near_xy[:, :, None] & near_th[None, None, :])
    return modes


def nll_loss(P: PoseVolume, gt: Pose2) -> float:
    """Negative log of the trilinearly interpolated probability at gt.

    Theta interpolates circularly; the probability is floored at 1e-12.
    Raises DomainError when gt lies outside the bin-center hull.
    """
    _require_probability(P)
    p = trilinear(P, gt.x, gt.y, gt.theta)
    return -math.log(max(p, PROB_FLOOR))
