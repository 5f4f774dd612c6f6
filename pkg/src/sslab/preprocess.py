"""Deterministic image standardization.

All functions take float arrays shaped (H, W) or (C, H, W) with values in
[0, 1] (except normalize_channels output) and are pure: same input, same
bytes out.

haar_downsize edge-pads each dimension up to the next multiple of
2^levels (a no-op for dimensions already divisible), runs the separable
Haar analysis `levels` times, discards the detail bands and rescales the
scaling band, which is exactly iterated 2x2 block averaging.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

RESNET_MEAN = (0.485, 0.456, 0.406)
RESNET_STD = (0.229, 0.224, 0.225)


class PreprocessError(ValueError):
    pass


@dataclass(frozen=True)
class NormalizationParams:
    mean: tuple
    std: tuple

    def __post_init__(self):
        if len(self.mean) != len(self.std):
            raise PreprocessError("mean and std must have matching channel counts")
        if any(s <= 0 for s in self.std):
            raise PreprocessError("std must be positive per channel")


RESNET_NORM = NormalizationParams(mean=RESNET_MEAN, std=RESNET_STD)


def _channels_first(img):
    """View any (H,W) or (C,H,W) array as (C,H,W) plus a restore flag."""
    img = np.asarray(img, dtype=np.float64)
    if img.ndim == 2:
        return img[None], True
    if img.ndim == 3:
        return img, False
    raise PreprocessError(f"expected (H, W) or (C, H, W) image, got shape {img.shape}")


def _haar_level(x):
    # one separable analysis step keeping the scaling band; the detail
    # bands are discarded, so the orthonormal sqrt(2) factors cancel with
    # the final rescale and the step reduces to pair averaging, which is
    # exact for constant regions
    a = (x[:, 0::2, :] + x[:, 1::2, :]) / 2.0
    return (a[:, :, 0::2] + a[:, :, 1::2]) / 2.0


def haar_downsize(img, levels: int):
    """Downsize by 2^levels via Haar scaling coefficients (block means)."""
    if levels < 1:
        raise PreprocessError(f"levels must be >= 1, got {levels}")
    x, squeeze = _channels_first(img)
    _, h, w = x.shape
    block = 2**levels
    if min(h, w) < block:
        raise PreprocessError(f"{levels} levels would collapse a {h}x{w} image")
    pad_h = (-h) % block
    pad_w = (-w) % block
    x = np.pad(x, ((0, 0), (0, pad_h), (0, pad_w)), mode="edge")
    for _ in range(levels):
        x = _haar_level(x)
    return x[0] if squeeze else x


def bilinear_resize(img, out_h: int, out_w: int):
    """Standard align-corners=False bilinear sampling."""
    if out_h < 1 or out_w < 1:
        raise PreprocessError(f"bad output size {out_h}x{out_w}")
    x, squeeze = _channels_first(img)
    _, h, w = x.shape
    src_y = np.clip((np.arange(out_h) + 0.5) * (h / out_h) - 0.5, 0.0, h - 1.0)
    src_x = np.clip((np.arange(out_w) + 0.5) * (w / out_w) - 0.5, 0.0, w - 1.0)
    y0 = np.floor(src_y).astype(int)
    x0 = np.floor(src_x).astype(int)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    wy = (src_y - y0)[None, :, None]
    wx = (src_x - x0)[None, None, :]
    top = x[:, y0][:, :, x0] * (1 - wx) + x[:, y0][:, :, x1] * wx
    bot = x[:, y1][:, :, x0] * (1 - wx) + x[:, y1][:, :, x1] * wx
    out = top * (1 - wy) + bot * wy
    return out[0] if squeeze else out


def _check_unit_range(x, op):
    if x.size and (x.min() < -1e-12 or x.max() > 1.0 + 1e-12):
        raise PreprocessError(f"{op}: values outside [0, 1]")


def hist_equalize(img, bins: int = 256):
    """Map values through the empirical CDF of the luminance histogram.

    The same mapping is applied to every channel, so gray inputs stay
    gray.  Output lands in (0, 1]; a constant image maps to a single
    level.
    """
    x, squeeze = _channels_first(img)
    _check_unit_range(x, "hist_equalize")
    lum = x.mean(axis=0)
    idx = np.minimum((lum * bins).astype(int), bins - 1)
    hist = np.bincount(idx.ravel(), minlength=bins)
    cdf = np.cumsum(hist) / lum.size
    chan_idx = np.minimum((x * bins).astype(int), bins - 1)
    out = cdf[chan_idx]
    return out[0] if squeeze else out


def _clipped_cdf(values, bins, clip_limit):
    hist = np.bincount(values, minlength=bins).astype(np.float64)
    ceiling = clip_limit * values.size / bins
    excess = np.maximum(hist - ceiling, 0.0).sum()
    hist = np.minimum(hist, ceiling) + excess / bins
    return np.cumsum(hist) / values.size


def clahe(img, clip_limit: float = 2.0, tiles: tuple[int, int] = (8, 8), bins: int = 256):
    """Contrast-limited adaptive equalization with bilinear tile blending.

    The image is cut into a tiles[0] x tiles[1] grid (edge tiles absorb
    any remainder), each tile's histogram is clipped at clip_limit times
    the uniform bin height with the excess spread evenly, and every pixel
    is mapped through a bilinear blend of the four nearest tile CDFs.
    """
    if clip_limit <= 0:
        raise PreprocessError(f"clip_limit must be positive, got {clip_limit}")
    ty, tx = tiles
    x, squeeze = _channels_first(img)
    _check_unit_range(x, "clahe")
    c, h, w = x.shape
    if ty < 1 or tx < 1 or ty > h or tx > w:
        raise PreprocessError(f"tile grid {tiles} does not fit a {h}x{w} image")
    y_edges = np.linspace(0, h, ty + 1).astype(int)
    x_edges = np.linspace(0, w, tx + 1).astype(int)
    y_centers = (y_edges[:-1] + y_edges[1:]) / 2.0
    x_centers = (x_edges[:-1] + x_edges[1:]) / 2.0

    out = np.empty_like(x)
    for ch in range(c):
        plane = x[ch]
        idx = np.minimum((plane * bins).astype(int), bins - 1)
        cdfs = np.empty((ty, tx, bins))
        for i in range(ty):
            for j in range(tx):
                tile = idx[y_edges[i] : y_edges[i + 1], x_edges[j] : x_edges[j + 1]]
                cdfs[i, j] = _clipped_cdf(tile.ravel(), bins, clip_limit)

        yy = np.arange(h, dtype=np.float64)
        xx = np.arange(w, dtype=np.float64)
        fy = np.clip(np.searchsorted(y_centers, yy) - 1, 0, max(ty - 2, 0))
        fx = np.clip(np.searchsorted(x_centers, xx) - 1, 0, max(tx - 2, 0))
        if ty > 1:
            wy = np.clip((yy - y_centers[fy]) / (y_centers[fy + 1] - y_centers[fy]), 0.0, 1.0)
        else:
            wy = np.zeros(h)
        if tx > 1:
            wx = np.clip((xx - x_centers[fx]) / (x_centers[fx + 1] - x_centers[fx]), 0.0, 1.0)
        else:
            wx = np.zeros(w)
        gy = np.minimum(fy + 1, ty - 1)
        gx = np.minimum(fx + 1, tx - 1)

        fy2 = fy[:, None]
        gy2 = gy[:, None]
        wy2 = wy[:, None]
        top = cdfs[fy2, fx[None, :], idx] * (1 - wx[None, :]) + cdfs[fy2, gx[None, :], idx] * wx[None, :]
        bot = cdfs[gy2, fx[None, :], idx] * (1 - wx[None, :]) + cdfs[gy2, gx[None, :], idx] * wx[None, :]
        out[ch] = top * (1 - wy2) + bot * wy2
    return out[0] if squeeze else out


def normalize_channels(img, params: NormalizationParams = RESNET_NORM):
    x, squeeze = _channels_first(img)
    if x.shape[0] != len(params.mean):
        raise PreprocessError(f"{x.shape[0]} channels vs {len(params.mean)} normalization channels")
    mean = np.asarray(params.mean)[:, None, None]
    std = np.asarray(params.std)[:, None, None]
    out = (x - mean) / std
    return out[0] if squeeze else out


def denormalize_channels(img, params: NormalizationParams = RESNET_NORM):
    x, squeeze = _channels_first(img)
    if x.shape[0] != len(params.mean):
        raise PreprocessError(f"{x.shape[0]} channels vs {len(params.mean)} normalization channels")
    mean = np.asarray(params.mean)[:, None, None]
    std = np.asarray(params.std)[:, None, None]
    out = x * std + mean
    return out[0] if squeeze else out


def wavelet_bilinear(img, target: int):
    """Power-of-two Haar reduction, then bilinear to target x target."""
    x, squeeze = _channels_first(img)
    _, h, w = x.shape
    levels = int(np.floor(np.log2(min(h, w) / target))) if min(h, w) >= 2 * target else 0
    if levels >= 1:
        pow2 = 2 ** int(np.ceil(np.log2(max(h, w))))
        x = np.pad(x, ((0, 0), (0, pow2 - h), (0, pow2 - w)), mode="edge")
        x = haar_downsize(x, levels)
    out = bilinear_resize(x, target, target)
    return out[0] if squeeze else out
