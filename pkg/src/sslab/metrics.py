"""Accuracy, ROC curves and AUC for binary probabilistic classifiers.

AUC is computed from exact integer pair counts (concordant plus half the
tied pairs over all positive/negative pairs), which coincides with the
trapezoidal area under the ROC curve built here.  Ties get half credit,
matching linear interpolation on the curve.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class DegenerateScoresError(ValueError):
    """AUC/ROC need at least one sample of each class."""


@dataclass
class ScoreSet:
    """(id, true label, predicted probability) triples."""

    ids: list[str]
    labels: np.ndarray
    scores: np.ndarray

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=np.int64)
        self.scores = np.asarray(self.scores, dtype=np.float64)
        if not (len(self.ids) == self.labels.size == self.scores.size):
            raise ValueError("ids, labels and scores must have equal length")
        if self.labels.size and not np.isin(self.labels, (0, 1)).all():
            raise ValueError("labels must be 0 or 1")
        if self.scores.size and (self.scores.min() < 0.0 or self.scores.max() > 1.0):
            raise ValueError("scores must lie in [0, 1]")

    def __len__(self):
        return self.labels.size

    @classmethod
    def from_triples(cls, triples):
        ids, labels, scores = zip(*triples) if triples else ((), (), ())
        return cls(list(ids), np.array(labels), np.array(scores))

    def to_csv(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("id,label,score\n")
            for i, y, s in zip(self.ids, self.labels, self.scores):
                fh.write(f"{i},{int(y)},{float(s)!r}\n")

    @classmethod
    def from_csv(cls, path):
        ids, labels, scores = [], [], []
        with open(path, encoding="utf-8") as fh:
            header = fh.readline().strip()
            if header != "id,label,score":
                raise ValueError(f"bad score file header: {header!r}")
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                i, y, s = line.split(",")
                ids.append(i)
                labels.append(int(y))
                scores.append(float(s))
        return cls(ids, np.array(labels), np.array(scores))


@dataclass
class RocCurve:
    """ROC points sorted by fpr, with the thresholds that produced them."""

    fpr: np.ndarray
    tpr: np.ndarray
    thresholds: np.ndarray = field(default=None)

    def points(self):
        return list(zip(self.fpr.tolist(), self.tpr.tolist()))


def accuracy(scores: ScoreSet, threshold: float = 0.5) -> float:
    """Fraction of samples where (score > threshold) matches the label."""
    if len(scores) == 0:
        raise DegenerateScoresError("accuracy of an empty score set")
    predicted = scores.scores > threshold
    return float(np.mean(predicted == (scores.labels == 1)))


def _pair_counts(labels: np.ndarray, scores: np.ndarray):
    """Exact (concordant, tied, n_pos, n_neg) pair counts via one sort."""
    order = np.argsort(scores, kind="stable")
    s = scores[order]
    pos = (labels[order] == 1).astype(np.int64)
    # group boundaries of equal scores along the sorted order
    boundary = np.empty(s.size, dtype=bool)
    boundary[0] = True
    np.not_equal(s[1:], s[:-1], out=boundary[1:])
    starts = np.flatnonzero(boundary)
    pos_per = np.add.reduceat(pos, starts)
    tot_per = np.diff(np.append(starts, s.size))
    neg_per = tot_per - pos_per
    neg_before = np.concatenate(([0], np.cumsum(neg_per)[:-1]))
    concordant = int(np.sum(pos_per * neg_before))
    tied = int(np.sum(pos_per * neg_per))
    n_pos = int(pos.sum())
    return concordant, tied, n_pos, labels.size - n_pos


def auc_from_arrays(labels, scores) -> float:
    labels = np.asarray(labels, dtype=np.int64)
    scores = np.asarray(scores, dtype=np.float64)
    n_pos = int((labels == 1).sum())
    if n_pos == 0 or n_pos == labels.size:
        raise DegenerateScoresError("AUC needs both classes present")
    concordant, tied, n_pos, n_neg = _pair_counts(labels, scores)
    return (2 * concordant + tied) / (2 * n_pos * n_neg)


def auc(scores: ScoreSet) -> float:
    """Probability a random positive outscores a random negative (ties half)."""
    return auc_from_arrays(scores.labels, scores.scores)


def roc_curve(scores: ScoreSet) -> RocCurve:
    """Threshold sweep with strict score > threshold decisions.

    Thresholds are the unique scores in descending order plus a -inf
    sentinel, so the curve always starts at (0, 0) and ends at (1, 1).
    """
    labels = scores.labels
    vals = scores.scores
    n_pos = int((labels == 1).sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise DegenerateScoresError("ROC needs both classes present")
    uniq = np.unique(vals)[::-1]
    thresholds = np.concatenate([uniq, [-np.inf]])
    pos_sorted = np.sort(vals[labels == 1])
    neg_sorted = np.sort(vals[labels == 0])
    # count of scores strictly greater than each threshold
    tpr = (n_pos - np.searchsorted(pos_sorted, thresholds, side="right")) / n_pos
    fpr = (n_neg - np.searchsorted(neg_sorted, thresholds, side="right")) / n_neg
    return RocCurve(fpr=fpr, tpr=tpr, thresholds=thresholds)


def trapezoid_auc(curve: RocCurve) -> float:
    """Area under the ROC by the trapezoid rule (cross-check for auc)."""
    return float(np.trapezoid(curve.tpr, curve.fpr))
