"""Pure-numpy reference kernels.

This module defines the accumulation contract that the compiled twin
(``_fast.pyx``) reproduces bit-for-bit. The contract, for one pose bin
(i, j, k):

* sample positions in fractional cell units:
  ``fj = j + (fwd[d]*cos + lat[l]*sin)``, ``fi = i + (fwd[d]*sin - lat[l]*cos)``
* bilinear sample of channel n with zero outside the map, as the fixed tree
  ``((t00 + t01) + t10) + t11`` where ``t_ab = w_ab * F[i0+a, j0+b, n]`` if
  the tap is in bounds else ``0.0``, with ``w00=(1-di)*(1-dj)``,
  ``w01=(1-di)*dj``, ``w10=di*(1-dj)``, ``w11=di*dj``
* contributions ``bil * tc[l, d, n]`` accumulated as a strict left fold in
  C-order over (l, d, n), then divided by ``z``.

``np.add.accumulate`` applies the operator successively (no pairwise
regrouping), so the fold here equals a scalar left-to-right loop. Cells whose
entire 2x2 support lies outside the map contribute an exact +-0.0 and may be
skipped: the running sum is never -0.0 (it starts at +0.0, and IEEE addition
of signed zeros to a non-negative-zero value is the identity), so dropping
those terms cannot change any bit of the result.
"""

import math

import numpy as np


def _bilinear_terms(fmap, fi, fj):
    """Bilinear samples of ``fmap`` (H, W, N) at fractional row/col arrays.

    Returns (values (..., N), full_support (...) bool). Out-of-bounds taps
    contribute 0.0; ``full_support`` marks samples with fi in [0, H-1] and
    fj in [0, W-1], where the result is a true interpolation of map data.
    """
    H, W, _ = fmap.shape
    i0f = np.floor(fi)
    j0f = np.floor(fj)
    di = fi - i0f
    dj = fj - j0f
    i0 = i0f.astype(np.int64)
    j0 = j0f.astype(np.int64)
    i1 = i0 + 1
    j1 = j0 + 1

    w00 = (1.0 - di) * (1.0 - dj)
    w01 = (1.0 - di) * dj
    w10 = di * (1.0 - dj)
    w11 = di * dj

    def tap(ii, jj, w):
        ok = (ii >= 0) & (ii < H) & (jj >= 0) & (jj < W)
        vals = fmap[np.clip(ii, 0, H - 1), np.clip(jj, 0, W - 1)]
        return np.where(ok[..., None], w[..., None] * vals, 0.0)

    bil = ((tap(i0, j0, w00) + tap(i0, j1, w01)) + tap(i1, j0, w10)) + tap(i1, j1, w11)
    full = (fi >= 0.0) & (fi <= H - 1.0) & (fj >= 0.0) & (fj <= W - 1.0)
    return bil, full


def rotated_offsets(lat, fwd, c, s):
    """Row/col offsets (L, D) of BEV cells rotated by the heading (cos, sin)."""
    lat = np.asarray(lat, dtype=np.float64)
    fwd = np.asarray(fwd, dtype=np.float64)
    offc = fwd[None, :] * c + lat[:, None] * s
    offr = fwd[None, :] * s - lat[:, None] * c
    return offr, offc

def score_naive(fmap, tc, lat, fwd, angles, z, out, k0, k1):
    """Correlation scores by direct gathering, rotations [k0, k1).

    fmap: (H, W, N) float64 map features; tc: (L, D, N) float64 weighted
    template; lat (L,), fwd (D,): cell offsets in map-pitch units; angles
    (K,); z: normalization count; out: (H, W, K) float64, written in place.
    """
    H, W, _ = fmap.shape
    L, D, N = tc.shape
    cols = np.arange(W, dtype=np.float64)[:, None, None]
    for k in range(k0, k1):
        # math.cos is libm's scalar cosine, the same call the compiled
        # kernel makes; np.cos may take a vectorized path that differs by
        # an ulp.
        c = math.cos(float(angles[k]))
        s = math.sin(float(angles[k]))
        offr, offc = rotated_offsets(lat, fwd, c, s)
        fj = cols + offc[None, :, :]
        for i in range(H):
            fi = np.broadcast_to(i + offr, (W, L, D))
            bil, _ = _bilinear_terms(fmap, fi, fj)
            contrib = (bil * tc[None]).reshape(W, L * D * N)
            acc = np.add.accumulate(contrib, axis=1)[:, -1]
            out[i, :, k] = acc / z
    return out


def splat_rotated(tc, conf, lat, fwd, c, s, feat_out, conf_out, center):
    """Bilinearly splat the rotated template onto a patch lattice.

    Adjoint of the gathering in :func:`score_naive`: each BEV cell (l, d)
    deposits ``w * value`` onto the four patch cells around its rotated
    position ``center + offset``. The caller sizes the patch so every tap
    lands in bounds.
    """
    P = conf_out.shape[0]
    offr, offc = rotated_offsets(lat, fwd, c, s)
    rows = center + offr
    cols = center + offc
    i0f = np.floor(rows)
    j0f = np.floor(cols)
    di = rows - i0f
    dj = cols - j0f
    i0 = i0f.astype(np.int64)
    j0 = j0f.astype(np.int64)
    if i0.min() < 0 or j0.min() < 0 or i0.max() + 1 >= P or j0.max() + 1 >= P:
        raise ValueError("patch too small for the rotated template support")
    w00 = (1.0 - di) * (1.0 - dj)
    w01 = (1.0 - di) * dj
    w10 = di * (1.0 - dj)
    w11 = di * dj
    for (ii, jj, w) in (
        (i0, j0, w00),
        (i0, j0 + 1, w01),
        (i0 + 1, j0, w10),
        (i0 + 1, j0 + 1, w11),
    ):
        np.add.at(feat_out, (ii, jj), w[..., None] * tc)
        np.add.at(conf_out, (ii, jj), w * conf)
    return feat_out, conf_out


def bilinear_gather(fmap, fi, fj):
    """Sample (H, W, N) features at fractional positions with zero padding.

    Returns (values (M, N) float64, full_support (M,) bool). Shares the
    sampling tree with :func:`score_naive`, so gathered values are
    bit-identical to the compiled kernel's.
    """
    fi = np.asarray(fi, dtype=np.float64)
    fj = np.asarray(fj, dtype=np.float64)
    return _bilinear_terms(fmap, fi, fj)
