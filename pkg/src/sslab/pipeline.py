"""Pixel pipelines: how a decoded image becomes a network input.

Evaluation is always deterministic: preset geometry (wavelet reduction
when configured), bilinear resize to the model input size, optional
equalization, then channel normalization.  Training applies the preset
geometry, the stochastic augmentation draw for the sample's substream,
and the same normalization.  The main_text augmentation preset performs
its own random crop and equalization, so the train geometry leaves the
image at crop-source size for it.
"""

from __future__ import annotations

import numpy as np

from . import preprocess as pp
from .augment import augment, get_preset, sample_rng
from .config import ExperimentConfig


def _geometry(img, cfg: ExperimentConfig, for_train: bool):
    pre = cfg.preprocess
    size = cfg.model.input_size
    if pre.preset == "wavelet_crop":
        img = pp.haar_downsize(img, pre.haar_levels)
        if not for_train or cfg.augment.preset != "main_text":
            img = pp.bilinear_resize(img, size, size)
    elif pre.preset == "wavelet_bilinear":
        img = pp.wavelet_bilinear(img, size)
    else:
        if img.shape[-2:] != (size, size) and not (for_train and cfg.augment.preset == "main_text"):
            img = pp.bilinear_resize(img, size, size)
    return img


def _finish(img, cfg: ExperimentConfig, equalized: bool):
    pre = cfg.preprocess
    if pre.equalize == "global" and not equalized:
        img = pp.hist_equalize(img)
    elif pre.equalize == "clahe" and not equalized:
        img = pp.clahe(img)
    if pre.normalize:
        img = pp.normalize_channels(img)
    return np.ascontiguousarray(img)


def eval_transform(img, cfg: ExperimentConfig) -> np.ndarray:
    return _finish(_geometry(img, cfg, for_train=False), cfg, equalized=False)


def train_transform(img, cfg: ExperimentConfig, epoch: int, sample_index: int) -> np.ndarray:
    preset = get_preset(cfg.augment.preset, crop_size=cfg.model.input_size)
    out = _geometry(img, cfg, for_train=True)
    if preset.name != "none":
        rng = sample_rng(cfg.train.seed, epoch, sample_index)
        out = augment(out, preset, rng)
    return _finish(out, cfg, equalized=preset.equalize)
