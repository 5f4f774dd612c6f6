import colorsys

import numpy as np
import pytest

from sslab.augment import (
    AugmentError,
    appendix_preset,
    augment,
    color_jitter,
    get_preset,
    identity_preset,
    main_text_preset,
    random_crop,
    rotate,
    sample_rng,
    _shift_hue,
)


def fundus_like(size=48, seed=0):
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:size, 0:size]
    r = np.hypot(yy - size / 2, xx - size / 2) / (size / 2)
    img = np.where(r <= 0.9, 0.5 + 0.1 * rng.random((size, size)), 0.0)
    return np.stack([img, img, img])


class TestPresets:
    def test_lookup(self):
        assert get_preset("main_text", 224).crop_size == 224
        assert get_preset("appendix").hflip_p == 0.5
        assert get_preset("none").name == "none"
        with pytest.raises(AugmentError):
            get_preset("fancy")

    def test_parameter_validation(self):
        with pytest.raises(AugmentError):
            main_text_preset(32).__class__(name="x", hflip_p=1.5)


class TestAugment:
    def test_noop_draw_equals_input(self):
        # identity preset applies nothing, whatever the stream says
        img = fundus_like()
        out = augment(img, identity_preset(), sample_rng(0, 0, 0))
        assert np.array_equal(out, img)

    def test_appendix_noop_branch(self):
        # force the no-op branch: flips fail and jitter draws factor 1
        class FixedRng:
            def random(self):
                return 0.99  # all probability checks fail

            def uniform(self, lo, hi, size=None):
                mid = (lo + hi) / 2.0
                return np.full(size, mid) if size else mid

        img = fundus_like()
        out = augment(img, appendix_preset(), FixedRng())
        np.testing.assert_allclose(out, img, atol=1e-12)

    def test_hflip_twice_restores_crop(self):
        img = fundus_like()
        flipped = img[:, :, ::-1]
        assert np.array_equal(flipped[:, :, ::-1], img)

    def test_deterministic_per_substream(self):
        img = fundus_like()
        preset = get_preset("main_text", 32)
        a = augment(img, preset, sample_rng(7, 3, 11))
        b = augment(img, preset, sample_rng(7, 3, 11))
        assert a.tobytes() == b.tobytes()
        c = augment(img, preset, sample_rng(7, 3, 12))
        assert a.tobytes() != c.tobytes()

    def test_output_size_main_text(self):
        out = augment(fundus_like(48), get_preset("main_text", 32), sample_rng(0, 0, 0))
        assert out.shape == (3, 32, 32)

    def test_output_size_appendix_preserved(self):
        out = augment(fundus_like(48), appendix_preset(), sample_rng(0, 0, 0))
        assert out.shape == (3, 48, 48)

    def test_crop_undersized_rejected(self):
        with pytest.raises(AugmentError, match="smaller than crop"):
            random_crop(fundus_like(16), 32, sample_rng(0, 0, 0))

    def test_values_stay_in_unit_interval(self):
        img = fundus_like()
        for preset_name in ("main_text", "appendix"):
            preset = get_preset(preset_name, 32)
            for k in range(20):
                out = augment(img, preset, sample_rng(1, 0, k))
                assert out.min() >= 0.0 and out.max() <= 1.0


class TestFlipFrequency:
    def test_empirical_flip_rate(self):
        img = np.zeros((1, 2, 2))
        img[0, 0, 0] = 1.0  # asymmetric marker
        preset = appendix_preset().__class__(name="flip_only", hflip_p=0.3)
        flips = 0
        n = 10_000
        for k in range(n):
            out = augment(img, preset, sample_rng(5, 0, k))
            flips += out[0, 0, 1] == 1.0
        assert abs(flips / n - 0.3) < 0.02


class TestRotation:
    def test_mask_area_preserved_within_one_percent(self):
        size = 64
        yy, xx = np.mgrid[0:size, 0:size]
        r = np.hypot(yy - (size - 1) / 2, xx - (size - 1) / 2) / (size / 2)
        disc = (r <= 0.85).astype(np.float64)
        img = np.stack([disc, disc, disc])
        for angle in (-10.0, -4.2, 3.3, 10.0):
            out = rotate(img, angle)
            assert abs(out[0].sum() - disc.sum()) / disc.sum() < 0.01

    def test_zero_rotation_is_identity(self):
        img = fundus_like()
        np.testing.assert_allclose(rotate(img, 0.0), img, atol=1e-12)


class TestColorJitter:
    def test_unit_factors_are_identity(self):
        class UnitRng:
            def uniform(self, lo, hi, size=None):
                mid = (lo + hi) / 2.0
                return np.full(size, mid) if size else mid

        img = fundus_like()
        out = color_jitter(img, UnitRng(), 0.05, 0.05)
        np.testing.assert_allclose(out, img, atol=1e-12)

    def test_gray_images_unaffected_by_hue_and_saturation(self):
        img = fundus_like()  # equal channels
        shifted = _shift_hue(img, 0.3)
        np.testing.assert_allclose(shifted, img, atol=1e-12)

    def test_hue_shift_matches_colorsys(self):
        rng = np.random.default_rng(6)
        img = rng.random((3, 5, 5))
        shift = 0.17
        got = _shift_hue(img, shift)
        expected = np.empty_like(img)
        for y in range(5):
            for x in range(5):
                h, s, v = colorsys.rgb_to_hsv(*img[:, y, x])
                expected[:, y, x] = colorsys.hsv_to_rgb((h + shift) % 1.0, s, v)
        np.testing.assert_allclose(got, expected, atol=1e-12)
