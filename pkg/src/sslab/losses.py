"""The two training criteria: class-weighted BCE and the balanced cosine loss.

Both come in a plain-array form (returns a float, used for metric
recording and the loss probes) and a tape form (returns a scalar tensor
for backpropagation).  BCE clamps beliefs to [eps, 1-eps] before the
logs, so confident mistakes incur a large but finite penalty; the
balanced loss is bounded in [0, 2] by construction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensor as T


@dataclass(frozen=True)
class BceLoss:
    w_f: float = 1.0  # class-0 weight
    w_m: float = 1.0  # class-1 weight
    clamp_eps: float = 1e-7

    def __post_init__(self):
        if not 0.0 < self.clamp_eps < 0.5:
            raise ValueError(f"clamp_eps must be in (0, 0.5), got {self.clamp_eps}")
        if self.w_f <= 0 or self.w_m <= 0:
            raise ValueError("class weights must be positive")


@dataclass(frozen=True)
class BalancedCosineLoss:
    pass


def _check_labels(y):
    y = np.asarray(y, dtype=np.float64)
    if y.size and not np.isin(y, (0.0, 1.0)).all():
        raise T.ContractError("labels must be 0 or 1")
    return y


def bce_loss(h, y, kind: BceLoss = BceLoss()) -> float:
    """Mean weighted binary cross-entropy of beliefs h against labels y."""
    y = _check_labels(y)
    h = np.asarray(h, dtype=np.float64)
    hc = np.clip(h, kind.clamp_eps, 1.0 - kind.clamp_eps)
    w = np.where(y == 1.0, kind.w_m, kind.w_f)
    per = w * (-(y * np.log(hc) + (1.0 - y) * np.log(1.0 - hc)))
    return float(np.mean(per))


def bce_loss_t(h: T.Tensor, y, kind: BceLoss = BceLoss()) -> T.Tensor:
    """Tape op version of :func:`bce_loss`; gradient is zero where clamped."""
    y = _check_labels(y)
    if h.shape != y.shape:
        raise T.ShapeMismatchError(f"bce: beliefs {h.shape} vs labels {y.shape}")
    hd = h.data
    eps = kind.clamp_eps
    hc = np.clip(hd, eps, 1.0 - eps)
    w = np.where(y == 1.0, kind.w_m, kind.w_f)
    per = w * (-(y * np.log(hc) + (1.0 - y) * np.log(1.0 - hc)))
    n = y.size
    active = (hd > eps) & (hd < 1.0 - eps)

    def backward(g):
        d = w * (-(y / hc) + (1.0 - y) / (1.0 - hc)) / n
        return [float(g) * d * active]

    return T._emit("bce", h.tape, np.mean(per), (h,), backward)


def balanced_loss(p, y) -> float:
    """Mean balanced cosine loss: 1 + cos(pi p) for y=1, 1 - cos(pi p) for y=0.

    The y=0 branch is evaluated as 1 + cos(pi (1-p)) -- the same value --
    so the symmetry loss(p | 1) == loss(1-p | 0) holds bit-exactly.
    """
    y = _check_labels(y)
    p = np.asarray(p, dtype=np.float64)
    q = np.where(y == 1.0, p, 1.0 - p)
    return float(np.mean(1.0 + np.cos(np.pi * q)))


def balanced_loss_t(p: T.Tensor, y) -> T.Tensor:
    y = _check_labels(y)
    if p.shape != y.shape:
        raise T.ShapeMismatchError(f"balanced: beliefs {p.shape} vs labels {y.shape}")
    pd = p.data
    q = np.where(y == 1.0, pd, 1.0 - pd)
    dq_dp = np.where(y == 1.0, 1.0, -1.0)
    n = y.size

    def backward(g):
        return [float(g) * dq_dp * (-np.pi * np.sin(np.pi * q)) / n]

    return T._emit("balanced", p.tape, np.mean(1.0 + np.cos(np.pi * q)), (p,), backward)


def make_loss(kind: str, w_f: float = 1.0, w_m: float = 1.0, clamp_eps: float = 1e-7):
    """Loss selection by config key: 'bce' or 'balanced'."""
    if kind == "bce":
        spec = BceLoss(w_f=w_f, w_m=w_m, clamp_eps=clamp_eps)
        return (
            lambda h, y: bce_loss(h, y, spec),
            lambda h, y: bce_loss_t(h, y, spec),
        )
    if kind == "balanced":
        return balanced_loss, balanced_loss_t
    raise ValueError(f"unknown loss kind {kind!r}")
