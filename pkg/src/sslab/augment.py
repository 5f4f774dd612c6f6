"""Stochastic train-time augmentation.

Two presets are shipped because the training recipe is described two
ways in different places and they disagree; neither is privileged:

* ``main_text``: rotate with p=0.2 by a uniform angle in [-10, 10]
  degrees, random crop to the preset crop size, horizontal flip with
  p=0.3, then histogram equalization.
* ``appendix``: color jitter (brightness/contrast/saturation factors
  uniform in [0.95, 1.05], hue shift in [-0.05, 0.05]), horizontal and
  vertical flips with p=0.5 each.

Channel normalization is applied afterwards by the caller's pipeline.
Per-sample randomness comes from a substream derived from
(seed, epoch, sample index), so results do not depend on loader order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .preprocess import hist_equalize


class AugmentError(ValueError):
    pass


@dataclass(frozen=True)
class AugmentPreset:
    name: str
    rotate_p: float = 0.0
    rotate_degrees: float = 0.0
    crop_size: int = 0  # 0 = no crop
    hflip_p: float = 0.0
    vflip_p: float = 0.0
    equalize: bool = False
    jitter_factor: float = 0.0  # brightness/contrast/saturation in 1 +- this
    hue_shift: float = 0.0

    def __post_init__(self):
        for p in (self.rotate_p, self.hflip_p, self.vflip_p):
            if not 0.0 <= p <= 1.0:
                raise AugmentError(f"probability {p} outside [0, 1]")
        if self.rotate_degrees < 0:
            raise AugmentError("rotation range must be symmetric and nonnegative")


def main_text_preset(crop_size: int = 224) -> AugmentPreset:
    return AugmentPreset(
        name="main_text",
        rotate_p=0.2,
        rotate_degrees=10.0,
        crop_size=crop_size,
        hflip_p=0.3,
        equalize=True,
    )


def appendix_preset() -> AugmentPreset:
    return AugmentPreset(
        name="appendix",
        hflip_p=0.5,
        vflip_p=0.5,
        jitter_factor=0.05,
        hue_shift=0.05,
    )


def identity_preset() -> AugmentPreset:
    return AugmentPreset(name="none")


def get_preset(name: str, crop_size: int = 224) -> AugmentPreset:
    if name == "main_text":
        return main_text_preset(crop_size)
    if name == "appendix":
        return appendix_preset()
    if name == "none":
        return identity_preset()
    raise AugmentError(f"unknown augment preset {name!r}")


def sample_rng(seed: int, epoch: int, sample_index: int):
    """The per-sample substream: hash of (seed, epoch, sample index)."""
    return np.random.default_rng(np.random.SeedSequence([seed, epoch, sample_index]))


def rotate(img, degrees: float):
    """Rotate about the center, bilinear resample, black fill outside."""
    img = np.asarray(img, dtype=np.float64)
    c, h, w = img.shape
    theta = np.deg2rad(degrees)
    cos_t, sin_t = np.cos(theta), np.sin(theta)
    cy, cx = (h - 1) / 2.0, (w - 1) / 2.0
    yy, xx = np.mgrid[0:h, 0:w]
    # inverse map: output pixel pulls from source coordinates
    sy = cos_t * (yy - cy) + sin_t * (xx - cx) + cy
    sx = -sin_t * (yy - cy) + cos_t * (xx - cx) + cx
    y0 = np.floor(sy).astype(int)
    x0 = np.floor(sx).astype(int)
    wy = sy - y0
    wx = sx - x0
    out = np.zeros_like(img)
    for dy, dx, wgt in ((0, 0, (1 - wy) * (1 - wx)), (0, 1, (1 - wy) * wx), (1, 0, wy * (1 - wx)), (1, 1, wy * wx)):
        yi = y0 + dy
        xi = x0 + dx
        valid = (yi >= 0) & (yi < h) & (xi >= 0) & (xi < w)
        yc = np.clip(yi, 0, h - 1)
        xc = np.clip(xi, 0, w - 1)
        out += img[:, yc, xc] * (wgt * valid)
    return out


def random_crop(img, size: int, rng):
    c, h, w = img.shape
    if h < size or w < size:
        raise AugmentError(f"image {h}x{w} smaller than crop size {size}")
    top = int(rng.integers(0, h - size + 1))
    left = int(rng.integers(0, w - size + 1))
    return img[:, top : top + size, left : left + size].copy()


def color_jitter(img, rng, factor: float, hue_shift: float):
    """Multiplicative brightness, contrast, saturation (in that order),
    then an additive hue rotation in HSV space; output clipped to [0, 1]."""
    b, c_, s_ = rng.uniform(1.0 - factor, 1.0 + factor, 3)
    h_ = rng.uniform(-hue_shift, hue_shift)
    out = img * b
    mean = out.mean()
    out = mean + (out - mean) * c_
    gray = out.mean(axis=0, keepdims=True)
    out = gray + (out - gray) * s_
    out = np.clip(out, 0.0, 1.0)
    if abs(h_) > 1e-12 and img.shape[0] == 3:
        out = _shift_hue(out, h_)
    return out


def _shift_hue(img, shift: float):
    r, g, b = img
    maxc = img.max(axis=0)
    minc = img.min(axis=0)
    v = maxc
    delta = maxc - minc
    sat = np.where(maxc > 0, delta / np.where(maxc > 0, maxc, 1.0), 0.0)
    # hue in [0, 1); piecewise by dominant channel
    safe = np.where(delta > 0, delta, 1.0)
    hue = np.zeros_like(maxc)
    hue = np.where((maxc == r) & (delta > 0), ((g - b) / safe) % 6.0, hue)
    hue = np.where((maxc == g) & (delta > 0), (b - r) / safe + 2.0, hue)
    hue = np.where((maxc == b) & (delta > 0), (r - g) / safe + 4.0, hue)
    hue = (hue / 6.0 + shift) % 1.0
    i = np.floor(hue * 6.0)
    f = hue * 6.0 - i
    p = v * (1.0 - sat)
    q = v * (1.0 - sat * f)
    t = v * (1.0 - sat * (1.0 - f))
    i = i.astype(int) % 6
    r2 = np.choose(i, [v, q, p, p, t, v])
    g2 = np.choose(i, [t, v, v, q, p, p])
    b2 = np.choose(i, [p, p, t, v, v, q])
    return np.stack([r2, g2, b2])


def augment(img, preset: AugmentPreset, rng):
    """Apply one stochastic draw of the preset; returns values in [0, 1].

    Draw order is fixed (rotate, crop, flips, jitter, equalize) so a
    given substream always produces the same image.
    """
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 3:
        raise AugmentError(f"expected (C, H, W) image, got shape {img.shape}")
    out = img
    if preset.rotate_p > 0 and rng.random() < preset.rotate_p:
        out = rotate(out, float(rng.uniform(-preset.rotate_degrees, preset.rotate_degrees)))
    if preset.crop_size:
        out = random_crop(out, preset.crop_size, rng)
    if preset.hflip_p > 0 and rng.random() < preset.hflip_p:
        out = out[:, :, ::-1]
    if preset.vflip_p > 0 and rng.random() < preset.vflip_p:
        out = out[:, ::-1, :]
    if preset.jitter_factor > 0 or preset.hue_shift > 0:
        out = color_jitter(out, rng, preset.jitter_factor, preset.hue_shift)
    if preset.equalize:
        out = hist_equalize(out)
    return np.ascontiguousarray(out)
