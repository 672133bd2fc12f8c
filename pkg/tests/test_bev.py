import io
import math

import numpy as np
import pytest

from planloc.bev import (
    BevGrid,
    ColumnFeatures,
    ScaleBins,
    depth_for_sigma,
    lift_alpha,
    lift_polar,
    polar_to_cartesian,
    scale_to_bin,
    sigma_for_depth,
)
from planloc.errors import DomainError, FormatError

BINS = ScaleBins(2.0, 512.0, 32)
# lifting tests use a bin count matching random_cols' S+1 score entries
BINS8 = ScaleBins(2.0, 512.0, 8)


def random_cols(rng, U=6, V=5, N=3, S=8, f=16.0, cx=None):
    X = rng.standard_normal((U, V, N))
    Sscores = rng.standard_normal((U, V, S + 1))
    return ColumnFeatures(X, Sscores, f, (U - 1) / 2.0 if cx is None else cx)


def oracle_lift(cols, bins, delta, D):
    """Scalar three-loop reimplementation of the polar lifting."""
    U, V, N = cols.X.shape
    feat = np.zeros((U, D, N))
    valid = np.zeros((U, D), dtype=bool)
    ratio = math.log(bins.sigma_max / bins.sigma_min)
    for d in range(D):
        sigma = cols.f / ((d + 1) * delta)
        if not (bins.sigma_min <= sigma <= bins.sigma_max):
            continue
        b = bins.S * math.log(sigma / bins.sigma_min) / ratio
        i0 = min(int(math.floor(b)), bins.S - 1)
        w = b - i0
        for u in range(U):
            s = [(1.0 - w) * cols.Sscores[u, v, i0] + w * cols.Sscores[u, v, i0 + 1]
                 for v in range(V)]
            m = max(s)
            e = [math.exp(x - m) for x in s]
            tot = sum(e)
            for n in range(N):
                feat[u, d, n] = sum(e[v] / tot * cols.X[u, v, n] for v in range(V))
            valid[u, d] = True
    return feat, valid


def oracle_resample(polar, cols, delta, L):
    """Scalar per-cell reimplementation of the ray resampling."""
    U, D, N = polar.feat.shape
    T = np.zeros((L, D, N))
    C = np.zeros((L, D))
    for l in range(L):
        x = (l - (L - 1) / 2.0) * delta
        for d in range(D):
            y = (d + 1) * delta
            u = cols.cx + cols.f * x / y
            if not (0.0 <= u <= U - 1.0):
                continue
            i0 = min(int(math.floor(u)), U - 1)
            i1 = min(i0 + 1, U - 1)
            w = u - i0
            if not (polar.valid[i0, d] and (polar.valid[i1, d] or w == 0.0)):
                continue
            C[l, d] = 1.0
            for n in range(N):
                T[l, d, n] = (1.0 - w) * polar.feat[i0, d, n] + w * polar.feat[i1, d, n]
    return T, C


class TestScaleBins:
    def test_validation(self):
        with pytest.raises(DomainError):
            ScaleBins(0.0, 512.0, 32)
        with pytest.raises(DomainError):
            ScaleBins(4.0, 2.0, 32)
        with pytest.raises(DomainError):
            ScaleBins(2.0, 512.0, 0)

    def test_endpoint_values(self):
        v = BINS.values()
        assert v.shape == (33,)
        assert v[0] == 2.0
        assert v[-1] == pytest.approx(512.0, rel=1e-12)
        # log-spaced: constant ratio between consecutive scales
        np.testing.assert_allclose(v[1:] / v[:-1], (512.0 / 2.0) ** (1.0 / 32.0))

    def test_depth_interval_exact(self):
        lo, hi = BINS.depth_interval(256.0)
        assert lo == 0.5
        assert hi == 128.0

    def test_scale_depth_duality(self):
        assert sigma_for_depth(256.0, 0.5) == 512.0
        assert depth_for_sigma(256.0, 2.0) == 128.0
        rng = np.random.default_rng(70)
        for d in rng.uniform(0.5, 128.0, 50):
            assert depth_for_sigma(256.0, sigma_for_depth(256.0, d)) == pytest.approx(d)

    def test_positivity_required(self):
        with pytest.raises(DomainError):
            sigma_for_depth(0.0, 1.0)
        with pytest.raises(DomainError):
            sigma_for_depth(256.0, -1.0)
        with pytest.raises(DomainError):
            depth_for_sigma(256.0, 0.0)


class TestScaleToBin:
    def test_endpoints(self):
        assert scale_to_bin(2.0, BINS) == 0.0
        assert scale_to_bin(512.0, BINS) == pytest.approx(32.0)

    def test_power_of_two_example(self):
        # sigma = 8: log(8/2)/log(512/2) * 32 = 8 exactly
        assert scale_to_bin(8.0, BINS) == pytest.approx(8.0, abs=1e-12)

    def test_out_of_range_marks_nan(self):
        assert math.isnan(scale_to_bin(1.0, BINS))
        assert math.isnan(scale_to_bin(1000.0, BINS))

    def test_array_form(self):
        got = scale_to_bin(np.array([1.0, 2.0, 8.0, 513.0]), BINS)
        assert math.isnan(got[0]) and math.isnan(got[3])
        np.testing.assert_allclose(got[1:3], [0.0, 8.0], atol=1e-12)

    def test_monotone(self):
        sig = np.linspace(2.0, 512.0, 100)
        got = scale_to_bin(sig, BINS)
        assert (np.diff(got) > 0).all()


class TestColumnFeatures:
    def test_validation(self):
        with pytest.raises(FormatError, match="U, V"):
            ColumnFeatures(np.zeros((3, 4)), np.zeros((3, 4, 5)), 16.0, 1.0)
        with pytest.raises(FormatError, match="disagree"):
            ColumnFeatures(np.zeros((3, 4, 2)), np.zeros((3, 5, 6)), 16.0, 1.0)
        with pytest.raises(DomainError, match="focal"):
            ColumnFeatures(np.zeros((3, 4, 2)), np.zeros((3, 4, 6)), 0.0, 1.0)
        bad = np.zeros((3, 4, 2))
        bad[0, 0, 0] = np.inf
        with pytest.raises(FormatError, match="non-finite"):
            ColumnFeatures(bad, np.zeros((3, 4, 6)), 16.0, 1.0)

    def test_round_trip_bit_exact(self):
        rng = np.random.default_rng(71)
        cols = ColumnFeatures(
            rng.standard_normal((4, 3, 2)).astype(np.float32).astype(np.float64),
            rng.standard_normal((4, 3, 9)).astype(np.float32).astype(np.float64),
            256.0, 1.5)
        f = io.BytesIO()
        cols.save(f)
        f.seek(0)
        got = ColumnFeatures.load(f)
        assert (got.U, got.V, got.n, got.S) == (4, 3, 2, 8)
        assert got.f == 256.0 and got.cx == 1.5
        assert np.array_equal(got.X, cols.X)
        assert np.array_equal(got.Sscores, cols.Sscores)

    def test_truncated(self):
        cols = random_cols(np.random.default_rng(72))
        f = io.BytesIO()
        cols.save(f)
        with pytest.raises(FormatError, match="truncated"):
            ColumnFeatures.load(io.BytesIO(f.getvalue()[:-5]))


class TestLiftPolar:
    def test_matches_scalar_oracle(self):
        rng = np.random.default_rng(73)
        for _ in range(10):
            cols = random_cols(rng)
            polar = lift_polar(cols, BINS8, 0.5, 12)
            want_feat, want_valid = oracle_lift(cols, BINS8, 0.5, 12)
            np.testing.assert_allclose(polar.feat, want_feat, atol=1e-6)
            np.testing.assert_array_equal(polar.valid, want_valid)

    def test_uniform_scores_average_column(self):
        rng = np.random.default_rng(74)
        X = rng.standard_normal((4, 5, 3))
        cols = ColumnFeatures(X, np.zeros((4, 5, 9)), 16.0, 1.5)
        polar = lift_polar(cols, BINS8, 0.5, 8)
        for d in np.nonzero(polar.valid[0])[0]:
            np.testing.assert_allclose(polar.feat[:, d, :], X.mean(axis=1), atol=1e-9)

    def test_concentrated_scores_saturate(self):
        # a 50-point score margin pushes softmax to one row within 1e-6
        rng = np.random.default_rng(75)
        X = rng.standard_normal((3, 4, 2))
        S = np.zeros((3, 4, 9))
        S[:, 2, :] = 50.0
        cols = ColumnFeatures(X, S, 16.0, 1.0)
        polar = lift_polar(cols, BINS8, 0.5, 8)
        for d in np.nonzero(polar.valid[0])[0]:
            np.testing.assert_allclose(polar.feat[:, d, :], X[:, 2, :], atol=1e-6)

    def test_out_of_band_planes_invalid_and_zero(self):
        # f=16: depth 8 m is the sigma_min boundary, beyond it sigma < 2
        cols = random_cols(np.random.default_rng(76), f=16.0)
        polar = lift_polar(cols, BINS8, 0.5, 64)
        depths = (np.arange(64) + 1) * 0.5
        valid_plane = (16.0 / depths >= 2.0) & (16.0 / depths <= 512.0)
        np.testing.assert_array_equal(polar.valid[0], valid_plane)
        assert (polar.feat[:, ~valid_plane, :] == 0.0).all()

    def test_linear_in_features(self):
        rng = np.random.default_rng(77)
        base = random_cols(rng)
        X2 = rng.standard_normal(base.X.shape)
        mix = ColumnFeatures(2.0 * base.X - 3.0 * X2, base.Sscores, base.f, base.cx)
        other = ColumnFeatures(X2, base.Sscores, base.f, base.cx)
        a = lift_polar(base, BINS8, 0.5, 12)
        b = lift_polar(other, BINS8, 0.5, 12)
        m = lift_polar(mix, BINS8, 0.5, 12)
        np.testing.assert_allclose(m.feat, 2.0 * a.feat - 3.0 * b.feat, atol=1e-9)

    def test_alpha_rows_sum_to_one(self):
        # f=8: planes past 4 m fall under sigma_min and must come back NaN
        cols = random_cols(np.random.default_rng(78), f=8.0)
        alpha = lift_alpha(cols, BINS8, 0.5, 12)
        assert alpha.shape == (6, 12, 5)
        polar = lift_polar(cols, BINS8, 0.5, 12)
        sums = alpha.sum(axis=2)
        np.testing.assert_allclose(sums[polar.valid], 1.0, atol=1e-6)
        assert np.isnan(alpha[~polar.valid]).all()
        assert (alpha[polar.valid] >= 0.0).all()

    def test_interpolation_exact_at_knots(self):
        # a depth whose scale lands exactly on a bin uses that bin alone
        S = 4
        bins = ScaleBins(2.0, 32.0, S)
        f, delta = 16.0, 1.0
        # depth 2 m: sigma = 8 = 2 * (32/2)^(2/4): bin index exactly 2
        assert scale_to_bin(8.0, bins) == pytest.approx(2.0, abs=1e-12)
        rng = np.random.default_rng(79)
        X = rng.standard_normal((3, 4, 2))
        Sscores = rng.standard_normal((3, 4, S + 1))
        cols = ColumnFeatures(X, Sscores, f, 1.0)
        polar = lift_polar(cols, bins, delta, 4)
        s = Sscores[:, :, 2]
        a = np.exp(s - s.max(axis=1, keepdims=True))
        a /= a.sum(axis=1, keepdims=True)
        want = np.einsum("uv,uvn->un", a, X)
        np.testing.assert_allclose(polar.feat[:, 1, :], want, atol=1e-9)

    def test_d_validation(self):
        cols = random_cols(np.random.default_rng(80))
        with pytest.raises(DomainError):
            lift_polar(cols, BINS8, 0.5, 0)

    def test_bin_count_mismatch_rejected(self):
        cols = random_cols(np.random.default_rng(80))
        with pytest.raises(FormatError, match="S=8 but bins expect S=32"):
            lift_polar(cols, BINS, 0.5, 8)
        with pytest.raises(FormatError, match="bins expect"):
            lift_alpha(cols, BINS, 0.5, 8)


class TestPolarToCartesian:
    def test_matches_scalar_oracle(self):
        rng = np.random.default_rng(81)
        for _ in range(10):
            cols = random_cols(rng, U=7, f=6.0)
            polar = lift_polar(cols, BINS8, 0.5, 10)
            bev = polar_to_cartesian(polar, cols, 0.5, 9)
            want_T, want_C = oracle_resample(polar, cols, 0.5, 9)
            np.testing.assert_allclose(bev.T, want_T, atol=1e-6)
            np.testing.assert_array_equal(bev.C, want_C)

    def test_center_column_hits_center_ray(self):
        # L odd: the middle BEV column has x = 0, so u = cx for every depth
        rng = np.random.default_rng(82)
        cols = random_cols(rng, U=5, f=8.0, cx=2.0)
        polar = lift_polar(cols, BINS8, 0.5, 6)
        bev = polar_to_cartesian(polar, cols, 0.5, 7)
        mid = 3
        for d in range(6):
            if polar.valid[2, d]:
                np.testing.assert_allclose(bev.T[mid, d], polar.feat[2, d], atol=1e-12)

    def test_outside_frustum_zero_confidence(self):
        rng = np.random.default_rng(83)
        cols = random_cols(rng, U=4, f=16.0, cx=1.5)
        polar = lift_polar(cols, BINS8, 0.5, 8)
        bev = polar_to_cartesian(polar, cols, 0.5, 31)
        # near depth row 0 (0.5 m), |x| > 0.06 m already exits a 4-ray image
        assert bev.C[0, 0] == 0.0
        assert (bev.T[bev.C == 0.0] == 0.0).all()
        assert set(np.unique(bev.C)) <= {0.0, 1.0}

    def test_widening_the_image_never_shrinks_coverage(self):
        rng = np.random.default_rng(84)
        U, V, N, S = 5, 4, 2, 8
        X = rng.standard_normal((U, V, N))
        Sc = rng.standard_normal((U, V, S + 1))
        pad = 2
        Xw = np.concatenate([rng.standard_normal((pad, V, N)), X,
                             rng.standard_normal((pad, V, N))], axis=0)
        Scw = np.concatenate([rng.standard_normal((pad, V, S + 1)), Sc,
                              rng.standard_normal((pad, V, S + 1))], axis=0)
        cols = ColumnFeatures(X, Sc, 8.0, (U - 1) / 2.0)
        wide = ColumnFeatures(Xw, Scw, 8.0, (U - 1) / 2.0 + pad)
        a = polar_to_cartesian(lift_polar(cols, BINS8, 0.5, 8), cols, 0.5, 9)
        b = polar_to_cartesian(lift_polar(wide, BINS8, 0.5, 8), wide, 0.5, 9)
        assert (b.C >= a.C).all()

    def test_l_validation(self):
        cols = random_cols(np.random.default_rng(85))
        polar = lift_polar(cols, BINS8, 0.5, 8)
        with pytest.raises(DomainError):
            polar_to_cartesian(polar, cols, 0.5, 0)


class TestBevGrid:
    def test_validation(self):
        with pytest.raises(FormatError, match="T \\(L, D, N\\)"):
            BevGrid(np.zeros((4, 4)), np.zeros((4, 4)), 0.5)
        with pytest.raises(FormatError, match="confidence"):
            BevGrid(np.zeros((4, 4, 2)), np.full((4, 4), 1.5), 0.5)
        with pytest.raises(DomainError, match="cell size"):
            BevGrid(np.zeros((4, 4, 2)), np.zeros((4, 4)), 0.0)

    def test_offsets_and_extent(self):
        g = BevGrid(np.zeros((64, 64, 2)), np.ones((64, 64)), 0.5)
        assert g.extent_m() == (32.0, 32.0)
        lat = g.lateral_offsets_m()
        fwd = g.forward_offsets_m()
        assert lat[0] == -15.75 and lat[-1] == 15.75
        assert fwd[0] == 0.5 and fwd[-1] == 32.0
        np.testing.assert_allclose(lat.mean(), 0.0, atol=1e-12)

    def test_round_trip_bit_exact(self):
        rng = np.random.default_rng(86)
        T = rng.standard_normal((5, 4, 3)).astype(np.float32).astype(np.float64)
        C = (rng.uniform(0, 1, (5, 4)) > 0.4).astype(np.float64)
        T *= C[..., None]
        g = BevGrid(T, C, 0.5)
        f = io.BytesIO()
        g.save(f)
        f.seek(0)
        got = BevGrid.load(f)
        assert got.delta == 0.5
        assert np.array_equal(got.T, g.T)
        assert np.array_equal(got.C, g.C)

    def test_truncated(self):
        g = BevGrid(np.zeros((3, 3, 2)), np.ones((3, 3)), 0.5)
        f = io.BytesIO()
        g.save(f)
        with pytest.raises(FormatError, match="truncated"):
            BevGrid.load(io.BytesIO(f.getvalue()[:-1]))
