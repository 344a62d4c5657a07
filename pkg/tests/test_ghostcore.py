import math

import numpy as np
import pytest

from ghostlab import (BucketSeries, ImageGrid, MaskSet, OrthonormalBasis, ParameterError,
                      ShapeError, acquire_ideal_buckets, acquire_noisy_buckets, bucket,
                      bucket_series, frobenius, gen_random_basis, gi_orthonormal,
                      gi_standard, orthonormalize, to_masks)
from conftest import make_texture


def build_onb(n, m, seed, dist):
    basis = gen_random_basis(n, m, n * m - 1, dist, seed=seed)
    return orthonormalize(basis, augment_constant=True)


def binary_mask_set(n, m, N, seed):
    rng = np.random.default_rng(seed)
    masks = (rng.random((N, n, m)) > 0.5).astype(float)
    return MaskSet(masks, min=0.0, max=1.0, xi=1.0, eta=None, source="binary-random")


class TestToMasks:
    def test_affine_substitution(self):
        members = np.array([[[-0.5, 0.25]], [[0.1, 0.5]]])
        onb = OrthonormalBasis(members, augmented=False)
        ms = to_masks(onb)
        assert ms.xi == pytest.approx(1.0)
        assert np.allclose(ms.masks, members + 0.5)

    def test_eta_substitution(self):
        # min = -0.1 on a 10x10 augmented set: eta = -0.1 / (0.1 + 0.1) = -0.5
        const = np.full((10, 10), 0.1)
        other = np.full((10, 10), 0.05)
        other[0, 0] = -0.1
        onb = OrthonormalBasis(np.stack([const, other]), augmented=True)
        ms = to_masks(onb)
        assert ms.eta == pytest.approx(-0.5, rel=1e-12)

    def test_roundtrip(self, uniform_centered):
        onb = build_onb(6, 6, 3, uniform_centered)
        ms = to_masks(onb)
        assert np.abs(ms.xi * ms.masks + ms.min - onb.members).max() < 1e-12

    def test_mask_range(self, uniform_centered):
        ms = to_masks(build_onb(8, 8, 5, uniform_centered))
        assert ms.masks.min() == 0.0
        assert ms.masks.max() == 1.0

    def test_degenerate_range(self):
        onb = OrthonormalBasis(np.full((1, 2, 2), 0.5), augmented=False)
        with pytest.raises(ParameterError):
            to_masks(onb)


class TestBucket:
    def test_all_ones(self):
        f = ImageGrid(np.ones((4, 4)))
        assert bucket(f, ImageGrid(np.ones((4, 4)))) == 16.0

    def test_zero_mask(self):
        f = ImageGrid(np.ones((4, 4)))
        assert bucket(f, ImageGrid(np.zeros((4, 4)))) == 0.0

    def test_definitional_equality(self, uniform_centered):
        f = make_texture(8, 8)
        ms = to_masks(build_onb(8, 8, 9, uniform_centered))
        assert bucket(f, ms.mask(5)) == frobenius(f, ms.mask(5))

    def test_linearity(self):
        rng = np.random.default_rng(7)
        f, g, mask = (ImageGrid(rng.random((5, 5))) for _ in range(3))
        lhs = bucket(ImageGrid(2.0 * f.data + 3.0 * g.data), mask)
        assert lhs == pytest.approx(2 * bucket(f, mask) + 3 * bucket(g, mask), rel=1e-13)

    def test_series_matches_singles_and_workers(self, uniform_centered):
        f = make_texture(8, 8)
        ms = to_masks(build_onb(8, 8, 2, uniform_centered))
        series = bucket_series(f, ms)
        singles = np.array([bucket(f, ms.mask(k)) for k in range(ms.N)])
        assert np.allclose(series.values, singles, rtol=1e-13)
        threaded = bucket_series(f, ms, workers=3)
        assert series.values.tobytes() == threaded.values.tobytes()


class TestGiStandard:
    def test_equal_buckets_give_zero(self):
        ms = binary_mask_set(4, 4, 8, seed=0)
        img = gi_standard(BucketSeries(np.full(8, 3.3)), ms, normalization=1.0)
        assert np.all(img.data == 0.0)

    def test_single_bright_pixel_localization(self):
        n = m = 8
        N = 100_000
        ms = binary_mask_set(n, m, N, seed=1)
        f = np.zeros((n, m))
        f[5, 2] = 1.0
        buckets = bucket_series(ImageGrid(f), ms)
        img = gi_standard(buckets, ms, normalization=0.25)
        assert np.unravel_index(np.argmax(img.data), (n, m)) == (5, 2)
        assert img.data[5, 2] == pytest.approx(1.0, abs=0.05)

    def test_unbiased_with_variance_shrinking(self):
        # mean converges to the expected image; variance drops ~ 1/N
        n = m = 4
        f = make_texture(n, m)
        seeds = 400

        def pixel_variance(N):
            recons = np.empty((seeds, n, m))
            for s in range(seeds):
                ms = binary_mask_set(n, m, N, seed=100 + s)
                buckets = bucket_series(f, ms)
                recons[s] = gi_standard(buckets, ms, normalization=0.25).data
            assert np.abs(recons.mean(axis=0) - f.data).max() < 5 * math.sqrt(
                np.sum(f.data**2) / N / seeds) + 0.02
            return recons.var(axis=0).mean()

        ratio = pixel_variance(256) / pixel_variance(1024)
        assert 3.4 < ratio < 4.6

    def test_errors(self):
        ms = binary_mask_set(4, 4, 8, seed=0)
        with pytest.raises(ShapeError):
            gi_standard(BucketSeries(np.ones(5)), ms, 1.0)
        with pytest.raises(ParameterError):
            gi_standard(BucketSeries(np.ones(1)), binary_mask_set(4, 4, 1, seed=0), 1.0)
        with pytest.raises(ParameterError):
            gi_standard(BucketSeries(np.ones(8)), ms, 0.0)


class TestGiOrthonormal:
    def test_exact_recovery(self, uniform_centered):
        onb = build_onb(8, 8, 9, uniform_centered)
        ms = to_masks(onb)
        f = make_texture(8, 8)
        u = gi_orthonormal(acquire_ideal_buckets(f, ms), onb, ms.eta)
        rel = np.linalg.norm(u.data - f.data) / np.linalg.norm(f.data)
        assert rel < 1e-8

    def test_zero_target(self, uniform_centered):
        onb = build_onb(6, 6, 2, uniform_centered)
        ms = to_masks(onb)
        u = gi_orthonormal(acquire_ideal_buckets(ImageGrid(np.zeros((6, 6))), ms), onb, ms.eta)
        assert np.abs(u.data).max() < 1e-12

    def test_requires_augmented(self, uniform_centered):
        basis = gen_random_basis(4, 4, 16, uniform_centered, seed=3)
        onb = orthonormalize(basis)
        with pytest.raises(ParameterError):
            gi_orthonormal(BucketSeries(np.ones(16)), onb, eta=-0.5)

    def test_unbiased_under_poisson(self, uniform_centered):
        onb = build_onb(6, 6, 13, uniform_centered)
        ms = to_masks(onb)
        f = ImageGrid(make_texture(6, 6).data * 0.9)
        lam = 200.0
        trials = 500
        acc = np.zeros((6, 6))
        for t in range(trials):
            buckets = acquire_noisy_buckets(f, ms, lam, seed=5000 + t)
            acc += gi_orthonormal(buckets, onb, ms.eta).data
        mean = acc / trials
        # per-pixel standard error from the analytic bucket variances
        flat = ms.masks.reshape(ms.N, -1)
        var_b = ms.xi**2 * flat.sum(axis=1) * (flat @ f.data.ravel()) / lam
        coeff = onb.members.reshape(ms.N, -1)
        member_sum = coeff.sum(axis=0)
        pixel_var = ((coeff[0] + ms.eta * member_sum) ** 2 * var_b[0]
                     + (coeff[1:] ** 2 * var_b[1:, None]).sum(axis=0))
        se = np.sqrt(pixel_var.reshape(6, 6) / trials)
        assert np.all(np.abs(mean - f.data) < 5 * se + 1e-9)


class TestMaskSetValidation:
    def test_out_of_range_rejected(self):
        with pytest.raises(ParameterError):
            MaskSet(np.full((1, 2, 2), 1.5), min=0.0, max=1.5, xi=1.5, eta=None, source="x")

    def test_bucket_series_shape_guard(self, uniform_centered):
        ms = to_masks(build_onb(4, 4, 1, uniform_centered))
        with pytest.raises(ShapeError):
            bucket_series(ImageGrid(np.ones((3, 3))), ms)
