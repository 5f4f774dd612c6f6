import numpy as np
import pytest

from sslab.preprocess import (
    NormalizationParams,
    PreprocessError,
    RESNET_NORM,
    bilinear_resize,
    clahe,
    denormalize_channels,
    haar_downsize,
    hist_equalize,
    normalize_channels,
    wavelet_bilinear,
)


class TestHaarDownsize:
    def test_fundus_resolution(self):
        # 2392 = 8 * 299 divides evenly; no padding happens
        out = haar_downsize(np.zeros((2392, 2048)), levels=3)
        assert out.shape == (299, 256)

    def test_edge_padding_on_non_multiple(self):
        out = haar_downsize(np.zeros((2394, 2048)), levels=3)
        assert out.shape == (300, 256)  # 2394 pads up to 2400
        ragged = haar_downsize(np.linspace(0, 1, 35).reshape(5, 7), levels=1)
        assert ragged.shape == (3, 4)

    def test_constant_image_collapses_exactly(self):
        out = haar_downsize(np.full((8, 8), 0.37), levels=3)
        assert out.shape == (1, 1)
        assert out[0, 0] == pytest.approx(0.37, abs=1e-15)

    def test_one_level_is_block_means(self):
        rng = np.random.default_rng(0)
        img = rng.random((4, 4))
        out = haar_downsize(img, levels=1)
        expected = img.reshape(2, 2, 2, 2).mean(axis=(1, 3))
        np.testing.assert_allclose(out, expected, atol=1e-15)

    def test_channels_first_supported(self):
        img = np.random.default_rng(1).random((3, 16, 12))
        out = haar_downsize(img, levels=2)
        assert out.shape == (3, 4, 3)

    def test_too_many_levels_rejected(self):
        with pytest.raises(PreprocessError, match="collapse"):
            haar_downsize(np.ones((4, 4)), levels=3)
        with pytest.raises(PreprocessError):
            haar_downsize(np.ones((4, 4)), levels=0)

    def test_constant_region_preserved_and_variance_reduced(self):
        rng = np.random.default_rng(2)
        for _ in range(20):
            img = rng.random((16, 24))
            out = haar_downsize(img, levels=2)
            assert out.var() <= img.var() + 1e-9
        const = np.full((12, 20), 0.6)
        up = np.repeat(np.repeat(haar_downsize(const, 2), 4, axis=0), 4, axis=1)
        assert np.array_equal(up, np.full((12, 20), 0.6))


class TestBilinearResize:
    def test_constant_stays_constant(self):
        out = bilinear_resize(np.full((5, 7), 0.42), 3, 11)
        np.testing.assert_allclose(out, 0.42, atol=1e-15)

    def test_monotone_1d_upsample(self):
        out = bilinear_resize(np.array([[0.0], [1.0]]), 4, 1)
        assert np.all(np.diff(out[:, 0]) >= 0)

    def test_2x2_to_center_sample_is_mean(self):
        img = np.array([[0.1, 0.2], [0.3, 0.6]])
        out = bilinear_resize(img, 1, 1)
        assert out[0, 0] == pytest.approx(img.mean(), abs=1e-15)

    def test_identity_when_same_size(self):
        img = np.random.default_rng(3).random((6, 6))
        np.testing.assert_allclose(bilinear_resize(img, 6, 6), img, atol=1e-12)

    def test_bad_size_rejected(self):
        with pytest.raises(PreprocessError):
            bilinear_resize(np.ones((4, 4)), 0, 4)


class TestHistEqualize:
    def test_uniform_histogram_is_near_identity(self):
        # exactly flat histogram: every one of the 256 bins holds 16 pixels
        rng = np.random.default_rng(4)
        vals = (np.arange(4096) + 0.5) / 4096.0
        img = rng.permutation(vals).reshape(64, 64)
        out = hist_equalize(img)
        assert np.max(np.abs(out - img)) <= 1.0 / 256 + 1e-9

    def test_constant_maps_to_single_level(self):
        out = hist_equalize(np.full((8, 8), 0.3))
        assert np.unique(out).size == 1

    def test_two_level_cdf_oracle(self):
        img = np.where(np.arange(400).reshape(20, 20) < 100, 0.2, 0.7)
        out = hist_equalize(img)
        lo = out[img == 0.2][0]
        hi = out[img == 0.7][0]
        assert lo == pytest.approx(0.25, abs=1e-12)
        assert hi == pytest.approx(1.0, abs=1e-12)

    def test_output_near_uniform_on_continuous_input(self):
        rng = np.random.default_rng(5)
        img = rng.random((320, 320))
        out = hist_equalize(img)
        sorted_vals = np.sort(out.ravel())
        grid = (np.arange(sorted_vals.size) + 1) / sorted_vals.size
        ks = np.max(np.abs(sorted_vals - grid))
        assert ks < 2.0 / 256

    def test_out_of_range_rejected(self):
        with pytest.raises(PreprocessError):
            hist_equalize(np.array([[0.2, 1.4]]))


class TestClahe:
    def test_constant_image_stays_constant(self):
        out = clahe(np.full((32, 32), 0.5), clip_limit=2.0, tiles=(4, 4))
        assert np.unique(out).size == 1

    def test_output_in_unit_range(self):
        rng = np.random.default_rng(6)
        img = rng.random((40, 56))
        out = clahe(img, clip_limit=2.0, tiles=(8, 8))
        assert out.min() >= 0.0 and out.max() <= 1.0

    def test_remainder_handled_by_edge_tiles(self):
        img = np.random.default_rng(7).random((37, 41))  # not divisible by 8
        out = clahe(img, tiles=(8, 8))
        assert out.shape == (37, 41)

    def test_high_clip_approaches_plain_equalization(self):
        rng = np.random.default_rng(8)
        img = rng.random((64,  64))
        near = clahe(img, clip_limit=1e9, tiles=(1, 1))
        plain = hist_equalize(img)
        np.testing.assert_allclose(near, plain, atol=1e-12)

    def test_bad_clip_rejected(self):
        with pytest.raises(PreprocessError):
            clahe(np.ones((8, 8)) * 0.5, clip_limit=0.0)


class TestNormalize:
    def test_resnet_red_mean_maps_to_zero(self):
        img = np.full((3, 2, 2), 0.5)
        img[0] = 0.485
        out = normalize_channels(img, RESNET_NORM)
        np.testing.assert_allclose(out[0], 0.0, atol=1e-12)

    def test_identity_params(self):
        img = np.random.default_rng(9).random((3, 4, 4))
        params = NormalizationParams(mean=(0.0, 0.0, 0.0), std=(1.0, 1.0, 1.0))
        assert np.array_equal(normalize_channels(img, params), img)

    def test_hand_arithmetic(self):
        img = np.zeros((3, 1, 1))
        img[0] = 0.714
        out = normalize_channels(img, RESNET_NORM)
        assert out[0, 0, 0] == pytest.approx(1.0, abs=1e-3)

    def test_round_trip_inverse(self):
        img = np.random.default_rng(10).random((3, 5, 5))
        back = denormalize_channels(normalize_channels(img, RESNET_NORM), RESNET_NORM)
        assert np.max(np.abs(back - img)) < 1e-12

    def test_channel_mismatch(self):
        with pytest.raises(PreprocessError):
            normalize_channels(np.ones((1, 4, 4)), RESNET_NORM)

    def test_std_validated(self):
        with pytest.raises(PreprocessError):
            NormalizationParams(mean=(0.0,), std=(0.0,))


class TestPurity:
    def test_ops_are_bitwise_pure(self):
        rng = np.random.default_rng(11)
        img = rng.random((3, 24, 24))
        for fn in (
            lambda x: haar_downsize(x, 2),
            lambda x: bilinear_resize(x, 10, 10),
            hist_equalize,
            lambda x: clahe(x, 2.0, (4, 4)),
            lambda x: normalize_channels(x, RESNET_NORM),
        ):
            assert fn(img).tobytes() == fn(img).tobytes()

    def test_wavelet_bilinear_reaches_target(self):
        img = np.random.default_rng(12).random((3, 500, 430))
        out = wavelet_bilinear(img, 224)
        assert out.shape == (3, 224, 224)
