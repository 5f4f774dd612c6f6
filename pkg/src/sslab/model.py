"""Mini residual network for binary classification, with binary checkpoints.

A model is a stem conv followed by n residual units H(x) = x + F(x) where
F(x) = W2 relu(W1 x + b1) + b2 (3x3 convs, channel-preserving), ReLU
between consecutive units, then global average pooling and a two-layer
fully connected head with dropout and a sigmoid output.

Checkpoints are a tagged little-endian binary format (magic "SSLAB1")
embedding the model config, so a round trip is byte-identical.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass, fields

import numpy as np

from . import tensor as T

CHECKPOINT_MAGIC = b"SSLAB1"


class CheckpointFormatError(ValueError):
    """Bad magic, truncation, or parameters not matching the config."""


@dataclass(frozen=True)
class ModelConfig:
    input_size: int = 224
    channels: int = 3
    stem_channels: int = 16
    n_residual_units: int = 4
    hidden_layer_width: int = 2048
    dropout_p: float = 0.5
    n_fc_layers: int = 2
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.dropout_p < 1.0:
            raise ValueError(f"dropout_p must be in [0, 1), got {self.dropout_p}")
        if self.hidden_layer_width <= 0:
            raise ValueError("hidden_layer_width must be positive")
        if self.n_fc_layers != 2:
            raise ValueError("only the two-layer fully connected head is supported")

    def serialize(self) -> bytes:
        lines = [f"{f.name} = {getattr(self, f.name)!r}" for f in fields(self)]
        return ("\n".join(lines) + "\n").encode("utf-8")

    @classmethod
    def deserialize(cls, blob: bytes) -> "ModelConfig":
        kwargs = {}
        for line in blob.decode("utf-8").splitlines():
            if not line.strip():
                continue
            key, _, value = line.partition(" = ")
            kwargs[key.strip()] = eval(value, {"__builtins__": {}})  # literals only
        return cls(**kwargs)

    def hash(self) -> str:
        return hashlib.sha256(self.serialize()).hexdigest()


@dataclass
class ResidualUnitParams:
    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray

    def __post_init__(self):
        if self.w1.shape[0] != self.w2.shape[1]:
            raise T.ShapeMismatchError(
                f"residual unit: W1 out channels {self.w1.shape[0]} != W2 in channels {self.w2.shape[1]}"
            )
        if self.w1.shape[1] != self.w2.shape[0]:
            raise T.ShapeMismatchError(
                f"residual unit: input channels {self.w1.shape[1]} != output channels {self.w2.shape[0]}"
            )


def residual_forward(unit: ResidualUnitParams, x) -> T.Tensor:
    """H(x) = x + W2 relu(W1 x + b1) + b2 with channel-preserving 3x3 convs."""
    x = T.as_tensor(x)
    inner = T.relu(T.conv2d(x, unit.w1, unit.b1, stride=1, padding=1))
    f = T.conv2d(inner, unit.w2, unit.b2, stride=1, padding=1)
    return T.add(x, f)


class Model:
    """Named parameter arrays plus the config that shapes them."""

    def __init__(self, config: ModelConfig, params: dict[str, np.ndarray]):
        self.config = config
        self.params = params

    def param_names(self):
        return list(self.params.keys())

    def copy(self) -> "Model":
        return Model(self.config, {k: v.copy() for k, v in self.params.items()})


def _param_skeleton(config: ModelConfig) -> list[tuple[str, tuple]]:
    c, s = config.channels, config.stem_channels
    shapes = [("stem.w", (s, c, 3, 3)), ("stem.b", (s,))]
    for i in range(config.n_residual_units):
        shapes += [
            (f"unit{i}.w1", (s, s, 3, 3)),
            (f"unit{i}.b1", (s,)),
            (f"unit{i}.w2", (s, s, 3, 3)),
            (f"unit{i}.b2", (s,)),
        ]
    shapes += [
        ("fc1.w", (config.hidden_layer_width, s)),
        ("fc1.b", (config.hidden_layer_width,)),
        ("fc2.w", (1, config.hidden_layer_width)),
        ("fc2.b", (1,)),
    ]
    return shapes


def build_model(config: ModelConfig) -> Model:
    """He fan-in initialized weights, zero biases, deterministic in config.seed."""
    rng = np.random.default_rng(config.seed)
    params = {}
    for name, shape in _param_skeleton(config):
        if len(shape) == 1:  # biases
            params[name] = np.zeros(shape)
        elif len(shape) == 4:
            fan_in = shape[1] * shape[2] * shape[3]
            params[name] = rng.standard_normal(shape) * np.sqrt(2.0 / fan_in)
        else:
            params[name] = rng.standard_normal(shape) * np.sqrt(2.0 / shape[1])
    return Model(config, params)


def model_forward(model: Model, batch, mode: str = "eval", rng=None, tape: T.Tape | None = None) -> T.Tensor:
    """Forward pass to probabilities, optionally recording on a tape.

    When a tape is given, parameters are registered on it by name so
    backpropagate returns gradients keyed like model.params.
    """
    x = T.as_tensor(batch)
    cfg = model.config
    expected = (cfg.channels, cfg.input_size, cfg.input_size)
    if x.data.ndim != 4 or x.shape[1:] != expected:
        raise T.ShapeMismatchError(f"model input {x.shape} != (N, {expected[0]}, {expected[1]}, {expected[2]})")
    if tape is not None:
        p = {name: tape.parameter(name, arr) for name, arr in model.params.items()}
    else:
        p = {name: T.Tensor(arr) for name, arr in model.params.items()}

    h = T.relu(T.conv2d(x, p["stem.w"], p["stem.b"], stride=1, padding=1))
    for i in range(cfg.n_residual_units):
        if i > 0:
            h = T.relu(h)
        inner = T.relu(T.conv2d(h, p[f"unit{i}.w1"], p[f"unit{i}.b1"], stride=1, padding=1))
        f = T.conv2d(inner, p[f"unit{i}.w2"], p[f"unit{i}.b2"], stride=1, padding=1)
        h = T.add(h, f)
    z = T.global_avg_pool(h)
    z = T.relu(T.linear(z, p["fc1.w"], p["fc1.b"]))
    z = T.dropout(z, cfg.dropout_p, mode=mode, rng=rng)
    logits = T.linear(z, p["fc2.w"], p["fc2.b"])
    return T.reshape(T.sigmoid(logits), (x.shape[0],))


def predict_proba(model: Model, batch, mode: str = "eval", rng=None) -> np.ndarray:
    """Per-sample probabilities, guarded into the open interval (0, 1)."""
    out = model_forward(model, batch, mode=mode, rng=rng).data
    return np.clip(out, 1e-12, 1.0 - 1e-12)


# ---------------------------------------------------------------------------
# checkpoint io

def checkpoint_bytes(model: Model, epoch: int = 0, val_auc: float = -1.0) -> bytes:
    cfg_blob = model.config.serialize()
    out = bytearray()
    out += CHECKPOINT_MAGIC
    out += struct.pack("<I", len(cfg_blob))
    out += cfg_blob
    out += bytes.fromhex(model.config.hash())
    out += struct.pack("<qd", epoch, val_auc)
    out += struct.pack("<I", len(model.params))
    for name, arr in model.params.items():
        nb = name.encode("utf-8")
        out += struct.pack("<H", len(nb))
        out += nb
        out += struct.pack("<B", arr.ndim)
        out += struct.pack(f"<{arr.ndim}I", *arr.shape)
        out += np.ascontiguousarray(arr, dtype="<f8").tobytes()
    return bytes(out)


def save_checkpoint(model: Model, path, epoch: int = 0, val_auc: float = -1.0) -> None:
    with open(path, "wb") as fh:
        fh.write(checkpoint_bytes(model, epoch=epoch, val_auc=val_auc))


class _Reader:
    def __init__(self, blob: bytes):
        self.blob = blob
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.blob):
            raise CheckpointFormatError("truncated checkpoint")
        chunk = self.blob[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def load_checkpoint_bytes(blob: bytes) -> tuple[Model, dict]:
    r = _Reader(blob)
    if r.take(len(CHECKPOINT_MAGIC)) != CHECKPOINT_MAGIC:
        raise CheckpointFormatError("bad checkpoint magic")
    (cfg_len,) = r.unpack("<I")
    cfg_blob = r.take(cfg_len)
    try:
        config = ModelConfig.deserialize(cfg_blob)
    except Exception as exc:
        raise CheckpointFormatError(f"unreadable embedded config: {exc}") from exc
    stored_hash = r.take(32).hex()
    if stored_hash != config.hash():
        raise CheckpointFormatError("config hash mismatch")
    epoch, val_auc = r.unpack("<qd")
    (n_params,) = r.unpack("<I")
    expected = dict(_param_skeleton(config))
    params: dict[str, np.ndarray] = {}
    for _ in range(n_params):
        (name_len,) = r.unpack("<H")
        name = r.take(name_len).decode("utf-8")
        if name not in expected:
            raise CheckpointFormatError(f"unknown parameter name {name!r} for this config")
        (ndim,) = r.unpack("<B")
        shape = r.unpack(f"<{ndim}I")
        if shape != expected[name]:
            raise CheckpointFormatError(f"parameter {name!r} has shape {shape}, expected {expected[name]}")
        count = int(np.prod(shape)) if shape else 1
        data = np.frombuffer(r.take(count * 8), dtype="<f8").reshape(shape).copy()
        params[name] = data
    missing = [n for n, _ in _param_skeleton(config) if n not in params]
    if missing:
        raise CheckpointFormatError(f"missing parameters: {missing}")
    if r.pos != len(blob):
        raise CheckpointFormatError("trailing bytes after checkpoint payload")
    ordered = {name: params[name] for name, _ in _param_skeleton(config)}
    return Model(config, ordered), {"epoch": epoch, "val_auc": val_auc, "config_hash": stored_hash}


def load_checkpoint(path) -> Model:
    model, _ = load_checkpoint_with_metadata(path)
    return model


def load_checkpoint_with_metadata(path) -> tuple[Model, dict]:
    with open(path, "rb") as fh:
        return load_checkpoint_bytes(fh.read())
