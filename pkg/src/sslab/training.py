"""The epoch loop: shuffle, augment, step, record, early-stop, checkpoint.

Every epoch shuffles the training partition with a seeded stream,
optimizes in mini-batches, then scores both partitions with the frozen
end-of-epoch model in evaluation mode.  The checkpoint kept is the one
from the epoch with the highest monitored validation metric; training
halts after `patience` epochs without improvement (but never before
`min_epochs`), or at `max_epochs`.

Belief histograms (per class, fixed-width bins over [0, 1]) are recorded
for both partitions each epoch; on small overfit runs they reproduce the
drift toward confident predictions that makes validation BCE rise while
AUC holds, which `bce_increase_probe` isolates in closed form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .config import ExperimentConfig
from .data import Manifest
from .losses import make_loss, bce_loss, balanced_loss, BceLoss
from .metrics import ScoreSet, accuracy, auc
from .model import Model, build_model, model_forward, predict_proba
from .optim import OptimizerState, lr_at, sgd_step
from .pipeline import eval_transform, train_transform

_EVAL_BATCH = 64


class TrainingError(RuntimeError):
    pass


@dataclass
class EpochRecord:
    epoch: int
    train_acc: float
    train_bce: float
    train_auc: float
    val_acc: float
    val_bce: float
    val_auc: float
    lr: float

    HEADER = "epoch,train_acc,train_bce,train_auc,val_acc,val_bce,val_auc,lr"

    def csv_row(self) -> str:
        return (
            f"{self.epoch},{self.train_acc!r},{self.train_bce!r},{self.train_auc!r},"
            f"{self.val_acc!r},{self.val_bce!r},{self.val_auc!r},{self.lr!r}"
        )


@dataclass
class BeliefHistogram:
    epoch: int
    partition: str
    class0_bins: np.ndarray
    class1_bins: np.ndarray

    @property
    def n_bins(self):
        return len(self.class0_bins)

    def csv_text(self) -> str:
        lines = ["bin_lo,bin_hi,class0,class1"]
        n = self.n_bins
        for k in range(n):
            lines.append(f"{k / n!r},{(k + 1) / n!r},{int(self.class0_bins[k])},{int(self.class1_bins[k])}")
        return "\n".join(lines) + "\n"


@dataclass
class TrainResult:
    model: Model  # best-epoch weights
    best_epoch: int
    best_metric: float
    records: list[EpochRecord]
    histograms: list[BeliefHistogram]
    criterion_values: list[tuple[float, float]]  # (train, val) active loss per epoch


def belief_histogram(probs, labels, epoch: int, partition: str, n_bins: int = 20) -> BeliefHistogram:
    probs = np.asarray(probs)
    labels = np.asarray(labels)
    idx = np.minimum((probs * n_bins).astype(int), n_bins - 1)
    c0 = np.bincount(idx[labels == 0], minlength=n_bins)
    c1 = np.bincount(idx[labels == 1], minlength=n_bins)
    return BeliefHistogram(epoch=epoch, partition=partition, class0_bins=c0, class1_bins=c1)


def record_beliefs(model: Model, images: np.ndarray, labels, epoch: int, partition: str, n_bins: int = 20):
    probs = _predict_batched(model, images)
    return belief_histogram(probs, labels, epoch, partition, n_bins)


def _predict_batched(model: Model, images: np.ndarray) -> np.ndarray:
    chunks = [
        predict_proba(model, images[i : i + _EVAL_BATCH])
        for i in range(0, len(images), _EVAL_BATCH)
    ]
    return np.concatenate(chunks) if chunks else np.empty(0)


class _EvalSplit:
    def __init__(self, entries, store, cfg):
        self.ids = [e.sample_id for e in entries]
        self.labels = np.array([e.label for e in entries], dtype=np.int64)
        self.images = np.stack([eval_transform(store[e.sample_id], cfg) for e in entries])


def _metrics_on(model, split: _EvalSplit, loss_fn):
    probs = _predict_batched(model, split.images)
    scores = ScoreSet(split.ids, split.labels, np.clip(probs, 0.0, 1.0))
    plain_bce = bce_loss(probs, split.labels)  # unweighted metric, fixed definition
    return probs, accuracy(scores), plain_bce, auc(scores), loss_fn(probs, split.labels)


def train(manifest: Manifest, store: dict[str, np.ndarray], cfg: ExperimentConfig, model: Model | None = None) -> TrainResult:
    """Run the full training recipe on a partitioned manifest.

    `store` maps sample ids to decoded (3, H, W) float images in [0, 1].
    Deterministic: identical (manifest, store, config) give bit-identical
    records and weights.
    """
    train_entries = manifest.partition("train")
    val_entries = manifest.partition("val")
    if not train_entries or not val_entries:
        raise TrainingError("manifest needs nonempty train and val partitions")

    if model is None:
        model = build_model(cfg.model)
    loss_fn, loss_t = make_loss(cfg.loss.kind, cfg.loss.w_f, cfg.loss.w_m, cfg.loss.clamp_eps)

    opt = OptimizerState(
        lr0=cfg.optim.lr0,
        momentum=cfg.optim.momentum,
        weight_decay=cfg.optim.weight_decay,
        nesterov=cfg.optim.nesterov,
        gamma=cfg.optim.gamma,
    )

    train_labels = np.array([e.label for e in train_entries], dtype=np.float64)
    train_raw = [store[e.sample_id] for e in train_entries]
    eval_train = _EvalSplit(train_entries, store, cfg)
    eval_val = _EvalSplit(val_entries, store, cfg)

    records: list[EpochRecord] = []
    histograms: list[BeliefHistogram] = []
    criterion_values: list[tuple[float, float]] = []
    best_metric = -math.inf
    best_epoch = 0
    best_params = None
    n = len(train_entries)
    batch = cfg.train.batch_size

    for epoch_index in range(cfg.train.max_epochs):
        epoch = epoch_index + 1
        opt.epoch = epoch_index
        order = np.random.default_rng(
            np.random.SeedSequence([cfg.train.seed, epoch_index, 0])
        ).permutation(n)
        for b_start in range(0, n, batch):
            sel = order[b_start : b_start + batch]
            xs = np.stack([train_transform(train_raw[i], cfg, epoch_index, int(i)) for i in sel])
            ys = train_labels[sel]
            drop_rng = np.random.default_rng(
                np.random.SeedSequence([cfg.train.seed, epoch_index, b_start, 1])
            )
            tape = T.Tape()
            probs = model_forward(model, xs, mode="train", rng=drop_rng, tape=tape)
            loss = loss_t(probs, ys)
            loss_value = loss.item()
            if not math.isfinite(loss_value):
                raise TrainingError(
                    f"non-finite loss {loss_value} at epoch {epoch}, batch {b_start // batch}"
                )
            grads = T.backpropagate(tape, loss)
            sgd_step(model.params, {k: g.data for k, g in grads.items()}, opt)

        t_probs, t_acc, t_bce, t_auc, t_crit = _metrics_on(model, eval_train, loss_fn)
        v_probs, v_acc, v_bce, v_auc, v_crit = _metrics_on(model, eval_val, loss_fn)
        rec = EpochRecord(
            epoch=epoch,
            train_acc=t_acc,
            train_bce=t_bce,
            train_auc=t_auc,
            val_acc=v_acc,
            val_bce=v_bce,
            val_auc=v_auc,
            lr=lr_at(opt, epoch_index),
        )
        records.append(rec)
        criterion_values.append((t_crit, v_crit))
        histograms.append(belief_histogram(t_probs, eval_train.labels, epoch, "train", cfg.train.belief_bins))
        histograms.append(belief_histogram(v_probs, eval_val.labels, epoch, "val", cfg.train.belief_bins))

        monitored = v_auc if cfg.train.monitor == "val_auc" else v_acc
        if monitored > best_metric:
            best_metric = monitored
            best_epoch = epoch
            best_params = {k: v.copy() for k, v in model.params.items()}
        if epoch >= cfg.train.min_epochs and (epoch - best_epoch) >= cfg.train.patience:
            break

    best_model = Model(cfg.model, best_params)
    return TrainResult(
        model=best_model,
        best_epoch=best_epoch,
        best_metric=best_metric,
        records=records,
        histograms=histograms,
        criterion_values=criterion_values,
    )


def metrics_csv_text(records: list[EpochRecord]) -> str:
    return EpochRecord.HEADER + "\n" + "".join(r.csv_row() + "\n" for r in records)


def parse_metrics_csv(text: str) -> list[EpochRecord]:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0] != EpochRecord.HEADER:
        raise TrainingError("bad metrics.csv header")
    out = []
    for ln in lines[1:]:
        parts = ln.split(",")
        out.append(
            EpochRecord(
                epoch=int(parts[0]),
                train_acc=float(parts[1]),
                train_bce=float(parts[2]),
                train_auc=float(parts[3]),
                val_acc=float(parts[4]),
                val_bce=float(parts[5]),
                val_auc=float(parts[6]),
                lr=float(parts[7]),
            )
        )
    return out


def bce_increase_probe(confidences, error_rate: float) -> list[dict]:
    """Mean BCE and mean balanced loss for a sharpening belief family.

    The family holds the error rate r fixed while pushing confidence c
    toward 1: a fraction 1-r of beliefs sit at c (correct) and r at 1-c
    (wrong).  Mean BCE is (1-r)(-ln c) + r(-ln(1-c)), eventually
    increasing in c for r > 0; the balanced loss converges to 2r.
    """
    if not 0.0 <= error_rate <= 1.0:
        raise ValueError(f"error rate must be in [0, 1], got {error_rate}")
    unweighted = BceLoss()
    rows = []
    for c in confidences:
        if not 0.0 <= c <= 1.0:
            raise ValueError(f"confidence must be in [0, 1], got {c}")
        beliefs = np.array([c, 1.0 - c])
        labels = np.array([1.0, 1.0])
        weights = np.array([1.0 - error_rate, error_rate])
        mean_bce = float(weights @ [bce_loss(np.array([b]), np.array([1.0]), unweighted) for b in beliefs])
        mean_balanced = float(weights @ [balanced_loss(np.array([b]), np.array([1.0])) for b in beliefs])
        rows.append({"confidence": float(c), "mean_bce": mean_bce, "mean_balanced": mean_balanced})
    return rows
