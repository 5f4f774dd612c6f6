"""Dense float64 tensors with reverse-mode automatic differentiation.

A :class:`Tape` records every differentiable operation applied to tensors
that live on it.  :func:`backpropagate` walks the tape in reverse and
returns one gradient array per named parameter.  Tensors without a tape
node are plain immutable arrays and pass through the same ops untracked,
which is how evaluation-mode forward passes run.

Supported ops: conv2d, linear, relu, sigmoid, dropout, global_avg_pool,
elementwise add/mul, scalar multiply, sum and mean reductions.
"""

from __future__ import annotations

import numpy as np
from scipy.special import expit


class ShapeMismatchError(ValueError):
    """An op received tensors whose extents are incompatible."""


class ContractError(ValueError):
    """An op precondition was violated (e.g. non-scalar loss)."""


class Tensor:
    """A rank-<=4 dense float64 array, optionally tracked on a tape."""

    __slots__ = ("data", "tape", "node")

    def __init__(self, data, tape=None, node=None):
        arr = np.asarray(data, dtype=np.float64)
        if not arr.flags["C_CONTIGUOUS"]:
            arr = np.ascontiguousarray(arr)
        if arr.ndim > 4:
            raise ShapeMismatchError(f"tensor rank {arr.ndim} exceeds 4 (shape {arr.shape})")
        self.data = arr
        self.tape = tape
        self.node = node

    @property
    def shape(self):
        return self.data.shape

    @property
    def size(self):
        return self.data.size

    def item(self) -> float:
        if self.data.size != 1:
            raise ContractError(f"item() on tensor of size {self.data.size}")
        return float(self.data.reshape(()))

    def __repr__(self):
        tracked = "" if self.node is None else f", node={self.node}"
        return f"Tensor(shape={self.data.shape}{tracked})"


class _Node:
    __slots__ = ("kind", "parents", "backward")

    def __init__(self, kind, parents, backward):
        self.kind = kind
        self.parents = parents
        self.backward = backward


class Tape:
    """Append-only record of differentiable ops, topologically ordered."""

    def __init__(self):
        self.nodes: list[_Node] = []
        self.params: dict[str, int] = {}
        self._shapes: dict[int, tuple] = {}

    def parameter(self, name: str, data) -> Tensor:
        """Register a named leaf parameter and return its tracked tensor."""
        if name in self.params:
            raise ContractError(f"duplicate parameter name {name!r}")
        t = Tensor(data, tape=self)
        t.node = self._record("param", (), None, t.data.shape)
        self.params[name] = t.node
        return t

    def _record(self, kind, parent_nodes, backward, out_shape) -> int:
        nid = len(self.nodes)
        self.nodes.append(_Node(kind, parent_nodes, backward))
        self._shapes[nid] = out_shape
        return nid


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _result_tape(op, tensors):
    tapes = {id(t.tape): t.tape for t in tensors if t.tape is not None}
    if len(tapes) > 1:
        raise ContractError(f"{op}: inputs live on different tapes")
    return next(iter(tapes.values())) if tapes else None


def _emit(op, tape, out_data, parent_tensors, backward):
    out = Tensor(out_data, tape=tape)
    if tape is not None:
        parents = tuple(t.node for t in parent_tensors if t.node is not None)
        out.node = tape._record(op, parents, backward, out.data.shape)
    return out


def _grads_for(parent_tensors, grads):
    """Order gradient arrays to match the tracked parents of a node."""
    return [g for t, g in zip(parent_tensors, grads) if t.node is not None]


# ---------------------------------------------------------------------------
# elementwise and reduction ops

def relu(x) -> Tensor:
    x = as_tensor(x)
    tape = _result_tape("relu", (x,))
    out_data = np.maximum(x.data, 0.0)
    mask = x.data > 0

    def backward(g):
        return [g * mask]

    return _emit("relu", tape, out_data, (x,), backward)


def sigmoid(x) -> Tensor:
    x = as_tensor(x)
    tape = _result_tape("sigmoid", (x,))
    s = expit(x.data)

    def backward(g):
        return [g * s * (1.0 - s)]

    return _emit("sigmoid", tape, s, (x,), backward)


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.shape != b.shape:
        raise ShapeMismatchError(f"add: shapes {a.shape} and {b.shape} differ")
    tape = _result_tape("add", (a, b))

    def backward(g):
        return _grads_for((a, b), (g, g))

    return _emit("add", tape, a.data + b.data, (a, b), backward)


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.shape != b.shape:
        raise ShapeMismatchError(f"mul: shapes {a.shape} and {b.shape} differ")
    tape = _result_tape("mul", (a, b))
    ad, bd = a.data, b.data

    def backward(g):
        return _grads_for((a, b), (g * bd, g * ad))

    return _emit("mul", tape, ad * bd, (a, b), backward)


def scale(x, c: float) -> Tensor:
    x = as_tensor(x)
    c = float(c)
    tape = _result_tape("scale", (x,))

    def backward(g):
        return [g * c]

    return _emit("scale", tape, x.data * c, (x,), backward)


def tensor_sum(x) -> Tensor:
    x = as_tensor(x)
    tape = _result_tape("sum", (x,))
    shape = x.shape

    def backward(g):
        return [np.full(shape, float(g))]

    return _emit("sum", tape, np.sum(x.data), (x,), backward)


def tensor_mean(x) -> Tensor:
    x = as_tensor(x)
    tape = _result_tape("mean", (x,))
    shape, n = x.shape, x.size

    def backward(g):
        return [np.full(shape, float(g) / n)]

    return _emit("mean", tape, np.mean(x.data), (x,), backward)


def reshape(x, shape) -> Tensor:
    x = as_tensor(x)
    tape = _result_tape("reshape", (x,))
    old = x.shape
    try:
        out_data = x.data.reshape(shape)
    except ValueError:
        raise ShapeMismatchError(f"reshape: cannot view {old} as {shape}") from None

    def backward(g):
        return [g.reshape(old)]

    return _emit("reshape", tape, out_data, (x,), backward)


def dropout(x, p: float, mode: str = "train", rng=None) -> Tensor:
    """Inverted dropout: train-time scaling by 1/(1-p), eval is identity."""
    x = as_tensor(x)
    if not 0.0 <= p < 1.0:
        raise ContractError(f"dropout: probability {p} outside [0, 1)")
    if mode not in ("train", "eval"):
        raise ContractError(f"dropout: unknown mode {mode!r}")
    if mode == "eval" or p == 0.0:
        return x
    if rng is None:
        raise ContractError("dropout: train mode requires an rng")
    tape = _result_tape("dropout", (x,))
    mask = (rng.random(x.shape) >= p) / (1.0 - p)

    def backward(g):
        return [g * mask]

    return _emit("dropout", tape, x.data * mask, (x,), backward)


def global_avg_pool(x) -> Tensor:
    x = as_tensor(x)
    if x.data.ndim != 4:
        raise ShapeMismatchError(f"global_avg_pool: expected NCHW input, got shape {x.shape}")
    tape = _result_tape("global_avg_pool", (x,))
    n, c, h, w = x.shape

    def backward(g):
        return [np.broadcast_to(g[:, :, None, None], (n, c, h, w)) / (h * w)]

    return _emit("global_avg_pool", tape, x.data.mean(axis=(2, 3)), (x,), backward)


# ---------------------------------------------------------------------------
# affine ops

def linear(x, w, b=None) -> Tensor:
    """Dense affine map: (N, D) @ (O, D)^T + (O,)."""
    x, w = as_tensor(x), as_tensor(w)
    b = as_tensor(b) if b is not None else None
    if x.data.ndim != 2 or w.data.ndim != 2 or x.shape[1] != w.shape[1]:
        raise ShapeMismatchError(f"linear: input {x.shape} incompatible with weight {w.shape}")
    if b is not None and b.shape != (w.shape[0],):
        raise ShapeMismatchError(f"linear: bias {b.shape} incompatible with weight {w.shape}")
    inputs = (x, w) if b is None else (x, w, b)
    tape = _result_tape("linear", inputs)
    xd, wd = x.data, w.data
    out = xd @ wd.T
    if b is not None:
        out = out + b.data
    need = tuple(t.node is not None for t in inputs)

    def backward(g):
        grads = []
        if need[0]:
            grads.append(g @ wd)
        if need[1]:
            grads.append(g.T @ xd)
        if b is not None and need[2]:
            grads.append(g.sum(axis=0))
        return grads

    return _emit("linear", tape, out, inputs, backward)


def _im2col(xp, kh, kw, stride, out_h, out_w):
    # (N, C, Hp, Wp) -> (N, C*kh*kw, out_h*out_w); kernel-offset slices keep
    # every copy contiguous along the fast axis
    n, c = xp.shape[0], xp.shape[1]
    cols = np.empty((n, c, kh, kw, out_h, out_w))
    for i in range(kh):
        for j in range(kw):
            cols[:, :, i, j] = xp[:, :, i : i + stride * out_h : stride, j : j + stride * out_w : stride]
    return cols.reshape(n, c * kh * kw, out_h * out_w)


def conv2d(x, w, b=None, stride: int = 1, padding: int = 0) -> Tensor:
    """2-D cross-correlation of NCHW input with OIHW kernels."""
    x, w = as_tensor(x), as_tensor(w)
    b = as_tensor(b) if b is not None else None
    if x.data.ndim != 4 or w.data.ndim != 4:
        raise ShapeMismatchError(f"conv2d: need NCHW input and OIHW kernel, got {x.shape} and {w.shape}")
    n, c, h, wd_ = x.shape
    o, ci, kh, kw = w.shape
    if ci != c:
        raise ShapeMismatchError(f"conv2d: input channels {c} != kernel channels {ci}")
    if b is not None and b.shape != (o,):
        raise ShapeMismatchError(f"conv2d: bias {b.shape} incompatible with {o} output channels")
    if stride < 1 or padding < 0:
        raise ContractError(f"conv2d: invalid stride {stride} or padding {padding}")
    out_h = (h + 2 * padding - kh) // stride + 1
    out_w = (wd_ + 2 * padding - kw) // stride + 1
    if out_h < 1 or out_w < 1:
        raise ShapeMismatchError(
            f"conv2d: kernel {kh}x{kw} too large for input {h}x{wd_} with padding {padding}"
        )
    inputs = (x, w) if b is None else (x, w, b)
    tape = _result_tape("conv2d", inputs)

    xp = np.pad(x.data, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    cols = _im2col(xp, kh, kw, stride, out_h, out_w)  # (N, C*kh*kw, P)
    w2 = w.data.reshape(o, c * kh * kw)
    out = np.matmul(w2, cols)  # (N, O, P)
    if b is not None:
        out += b.data[:, None]
    out = out.reshape(n, o, out_h, out_w)
    padded_shape = xp.shape
    need = tuple(t.node is not None for t in inputs)

    def backward(g):
        g3 = np.ascontiguousarray(g).reshape(n, o, out_h * out_w)
        grads = []
        if need[0]:
            dcols = np.matmul(w2.T, g3).reshape(n, c, kh, kw, out_h, out_w)
            dxp = np.zeros(padded_shape)
            for i in range(kh):
                for j in range(kw):
                    dxp[:, :, i : i + stride * out_h : stride, j : j + stride * out_w : stride] += dcols[:, :, i, j]
            grads.append(dxp[:, :, padding : padding + h, padding : padding + wd_])
        if need[1]:
            dw2 = np.matmul(g3, cols.transpose(0, 2, 1)).sum(axis=0)
            grads.append(dw2.reshape(o, c, kh, kw))
        if b is not None and need[2]:
            grads.append(g3.sum(axis=(0, 2)))
        return grads

    return _emit("conv2d", tape, out, inputs, backward)


_OPS = {
    "conv2d": conv2d,
    "linear": linear,
    "relu": relu,
    "sigmoid": sigmoid,
    "dropout": dropout,
    "global_avg_pool": global_avg_pool,
    "add": add,
    "reshape": reshape,
    "mul": mul,
    "scale": scale,
    "sum": tensor_sum,
    "mean": tensor_mean,
}


def forward_op(kind: str, inputs, attrs=None) -> Tensor:
    """Dispatch an op by name; `attrs` are passed through as keyword args."""
    try:
        fn = _OPS[kind]
    except KeyError:
        raise ContractError(f"unknown op kind {kind!r}") from None
    return fn(*inputs, **(attrs or {}))


def backpropagate(tape: Tape, loss: Tensor) -> dict[str, Tensor]:
    """Reverse-sweep the tape from a scalar loss node.

    Returns one gradient tensor per registered parameter; parameters the
    loss does not reach get zeros.  The tape is not reusable afterwards.
    """
    if loss.tape is not tape or loss.node is None:
        raise ContractError("loss tensor is not recorded on this tape")
    if loss.size != 1:
        raise ContractError(f"loss must be scalar, got shape {loss.shape}")
    grads: dict[int, np.ndarray] = {loss.node: np.ones(tape._shapes[loss.node])}
    for nid in range(loss.node, -1, -1):
        g = grads.pop(nid, None)
        if g is None:
            continue
        node = tape.nodes[nid]
        if node.backward is None:
            grads[nid] = g  # parameter leaf: keep for collection below
            continue
        for pid, pg in zip(node.parents, node.backward(g)):
            if pid in grads:
                grads[pid] = grads[pid] + pg
            else:
                grads[pid] = pg
    out = {}
    for name, nid in tape.params.items():
        g = grads.get(nid)
        out[name] = Tensor(g if g is not None else np.zeros(tape._shapes[nid]))
    return out


def finite_difference_check(f, theta, step: float) -> float:
    """Max relative error between backprop and central differences.

    `f` maps a parameter tensor to a scalar tensor and must work both on
    taped and plain tensors.  Error per coordinate is
    |analytic - central| / max(1, |analytic|).
    """
    if step <= 0:
        raise ContractError(f"step must be positive, got {step}")
    theta = as_tensor(theta)
    tape = Tape()
    tracked = tape.parameter("theta", theta.data)
    out = f(tracked)
    analytic = backpropagate(tape, out).get("theta").data

    flat = theta.data.ravel()
    worst = 0.0
    for i in range(flat.size):
        bumped = flat.copy()
        bumped[i] = flat[i] + step
        hi = as_tensor(f(Tensor(bumped.reshape(theta.shape))).data).item()
        bumped[i] = flat[i] - step
        lo = as_tensor(f(Tensor(bumped.reshape(theta.shape))).data).item()
        central = (hi - lo) / (2.0 * step)
        a = analytic.ravel()[i]
        err = abs(a - central) / max(1.0, abs(a))
        worst = max(worst, err)
    return worst
