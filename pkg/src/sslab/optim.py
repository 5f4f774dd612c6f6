"""SGD with Nesterov momentum, weight decay and exponential lr decay.

Update per parameter (decay applied once per epoch):

    g <- g + wd * theta
    v <- m * v + g
    effective <- g + m * v   (Nesterov)  |  v  (plain momentum)
    theta <- theta - lr0 * gamma^epoch * effective
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .tensor import ShapeMismatchError


@dataclass
class OptimizerState:
    lr0: float = 1e-3
    momentum: float = 0.9
    weight_decay: float = 1e-3
    nesterov: bool = True
    gamma: float = 0.99
    epoch: int = 0
    buffers: dict = field(default_factory=dict)


def lr_at(state: OptimizerState, epoch: int) -> float:
    if epoch < 0:
        raise ValueError(f"epoch must be >= 0, got {epoch}")
    return state.lr0 * state.gamma**epoch


def sgd_step(params: dict, grads: dict, state: OptimizerState) -> dict:
    """One in-place update of every parameter; velocity starts at zero."""
    lr = lr_at(state, state.epoch)
    for name, theta in params.items():
        g = grads[name]
        if g.shape != theta.shape:
            raise ShapeMismatchError(f"sgd_step: grad {g.shape} vs param {theta.shape} for {name!r}")
        g = np.asarray(g, dtype=np.float64)
        if state.weight_decay:
            g = g + state.weight_decay * theta
        if state.momentum:
            v = state.buffers.get(name)
            if v is None:
                v = np.zeros_like(theta)
            v = state.momentum * v + g
            state.buffers[name] = v
            effective = g + state.momentum * v if state.nesterov else v
        else:
            effective = g
        theta -= lr * effective
    return params
