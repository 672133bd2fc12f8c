# cython: boundscheck=False, wraparound=False, initializedcheck=False
"""Compiled kernels, bit-identical to the numpy reference in ``_ref``.

Every arithmetic expression here mirrors the trees documented in
``_ref.py``; the extension is built with ``-ffp-contract=off`` so the C
compiler cannot fuse the multiply-adds that numpy performs as separate
operations. BEV cells whose 2x2 support is fully outside the map are
skipped; per the signed-zero argument in ``_ref``, that cannot change any
output bit.
"""

import numpy as np

from libc.math cimport cos, floor, sin


def score_naive(double[:, :, ::1] fmap, double[:, :, ::1] tc,
                double[::1] lat, double[::1] fwd, double[::1] angles,
                double z, double[:, :, ::1] out,
                Py_ssize_t k0, Py_ssize_t k1):
    """Correlation scores by direct gathering, rotations [k0, k1)."""
    cdef Py_ssize_t H = fmap.shape[0], W = fmap.shape[1], N = fmap.shape[2]
    cdef Py_ssize_t L = tc.shape[0], D = tc.shape[1]
    cdef Py_ssize_t i, j, k, l, d, n, i0, j0
    cdef double c, s, acc, fi, fj, i0f, j0f, di, dj
    cdef double w00, w01, w10, w11, t00, t01, t10, t11, bil
    cdef bint in00, in01, in10, in11
    offr_arr = np.empty((L, D), dtype=np.float64)
    offc_arr = np.empty((L, D), dtype=np.float64)
    cdef double[:, ::1] offr = offr_arr
    cdef double[:, ::1] offc = offc_arr

    with nogil:
        for k in range(k0, k1):
            c = cos(angles[k])
            s = sin(angles[k])
            for l in range(L):
                for d in range(D):
                    offc[l, d] = fwd[d] * c + lat[l] * s
                    offr[l, d] = fwd[d] * s - lat[l] * c
            for i in range(H):
                for j in range(W):
                    acc = 0.0
                    for l in range(L):
                        for d in range(D):
                            fj = j + offc[l, d]
                            fi = i + offr[l, d]
                            i0f = floor(fi)
                            j0f = floor(fj)
                            i0 = <Py_ssize_t>i0f
                            j0 = <Py_ssize_t>j0f
                            if i0 >= H or i0 <= -2 or j0 >= W or j0 <= -2:
                                continue
                            di = fi - i0f
                            dj = fj - j0f
                            w00 = (1.0 - di) * (1.0 - dj)
                            w01 = (1.0 - di) * dj
                            w10 = di * (1.0 - dj)
                            w11 = di * dj
                            in00 = i0 >= 0 and j0 >= 0
                            in01 = i0 >= 0 and j0 + 1 < W
                            in10 = i0 + 1 < H and j0 >= 0
                            in11 = i0 + 1 < H and j0 + 1 < W
                            for n in range(N):
                                t00 = w00 * fmap[i0, j0, n] if in00 else 0.0
                                t01 = w01 * fmap[i0, j0 + 1, n] if in01 else 0.0
                                t10 = w10 * fmap[i0 + 1, j0, n] if in10 else 0.0
                                t11 = w11 * fmap[i0 + 1, j0 + 1, n] if in11 else 0.0
                                bil = ((t00 + t01) + t10) + t11
                                acc = acc + bil * tc[l, d, n]
                    out[i, j, k] = acc / z
    return np.asarray(out)


def splat_rotated(double[:, :, ::1] tc, double[:, ::1] conf,
                  double[::1] lat, double[::1] fwd, double c, double s,
                  double[:, :, ::1] feat_out, double[:, ::1] conf_out,
                  double center):
    """Bilinearly splat the rotated template onto a patch lattice."""
    cdef Py_ssize_t L = tc.shape[0], D = tc.shape[1], N = tc.shape[2]
    cdef Py_ssize_t P = conf_out.shape[0]
    cdef Py_ssize_t l, d, n, i0, j0
    cdef double row, col, i0f, j0f, di, dj, w00, w01, w10, w11, v
    cdef bint oob = False

    with nogil:
        for l in range(L):
            for d in range(D):
                col = center + (fwd[d] * c + lat[l] * s)
                row = center + (fwd[d] * s - lat[l] * c)
                i0f = floor(row)
                j0f = floor(col)
                i0 = <Py_ssize_t>i0f
                j0 = <Py_ssize_t>j0f
                if i0 < 0 or j0 < 0 or i0 + 1 >= P or j0 + 1 >= P:
                    oob = True
                    break
                di = row - i0f
                dj = col - j0f
                w00 = (1.0 - di) * (1.0 - dj)
                w01 = (1.0 - di) * dj
                w10 = di * (1.0 - dj)
                w11 = di * dj
                for n in range(N):
                    v = tc[l, d, n]
                    feat_out[i0, j0, n] += w00 * v
                    feat_out[i0, j0 + 1, n] += w01 * v
                    feat_out[i0 + 1, j0, n] += w10 * v
                    feat_out[i0 + 1, j0 + 1, n] += w11 * v
                v = conf[l, d]
                conf_out[i0, j0] += w00 * v
                conf_out[i0, j0 + 1] += w01 * v
                conf_out[i0 + 1, j0] += w10 * v
                conf_out[i0 + 1, j0 + 1] += w11 * v
            if oob:
                break
    if oob:
        raise ValueError("patch too small for the rotated template support")
    return np.asarray(feat_out), np.asarray(conf_out)


def bilinear_gather(double[:, :, ::1] fmap, double[::1] fi, double[::1] fj):
    """Sample (H, W, N) features at fractional positions with zero padding."""
    cdef Py_ssize_t H = fmap.shape[0], W = fmap.shape[1], N = fmap.shape[2]
    cdef Py_ssize_t M = fi.shape[0]
    cdef Py_ssize_t m, n, i0, j0
    cdef double fim, fjm, i0f, j0f, di, dj, w00, w01, w10, w11
    cdef double t00, t01, t10, t11
    cdef bint in00, in01, in10, in11
    vals_arr = np.zeros((M, N), dtype=np.float64)
    full_arr = np.zeros(M, dtype=np.uint8)
    cdef double[:, ::1] vals = vals_arr
    cdef unsigned char[::1] full = full_arr

    with nogil:
        for m in range(M):
            fim = fi[m]
            fjm = fj[m]
            i0f = floor(fim)
            j0f = floor(fjm)
            i0 = <Py_ssize_t>i0f
            j0 = <Py_ssize_t>j0f
            full[m] = fim >= 0.0 and fim <= H - 1.0 and fjm >= 0.0 and fjm <= W - 1.0
            if i0 >= H or i0 <= -2 or j0 >= W or j0 <= -2:
                continue
            di = fim - i0f
            dj = fjm - j0f
            w00 = (1.0 - di) * (1.0 - dj)
            w01 = (1.0 - di) * dj
            w10 = di * (1.0 - dj)
            w11 = di * dj
            in00 = i0 >= 0 and j0 >= 0
            in01 = i0 >= 0 and j0 + 1 < W
            in10 = i0 + 1 < H and j0 >= 0
            in11 = i0 + 1 < H and j0 + 1 < W
            for n in range(N):
                t00 = w00 * fmap[i0, j0, n] if in00 else 0.0
                t01 = w01 * fmap[i0, j0 + 1, n] if in01 else 0.0
                t10 = w10 * fmap[i0 + 1, j0, n] if in10 else 0.0
                t11 = w11 * fmap[i0 + 1, j0 + 1, n] if in11 else 0.0
                vals[m, n] = ((t00 + t01) + t10) + t11
    return vals_arr, full_arr.view(np.bool_)
