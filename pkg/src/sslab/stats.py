"""Nonparametric bootstrap for AUC and Benjamini-Hochberg adjustment.

Confidence intervals are plain percentile intervals over replicate AUCs;
the empirical p-value is the add-one one-sided form
(1 + #{replicates <= mu_ref}) / (B + 1), which can never be exactly zero
and reproduces the "p <= 1/(B+1)" reporting convention at count zero.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .metrics import ScoreSet, auc_from_arrays, DegenerateScoresError

_MAX_REDRAWS = 100


@dataclass(frozen=True)
class BootstrapConfig:
    B: int = 1000
    alpha: float = 0.05
    seed: int = 0
    mu_ref: float = 0.5

    def __post_init__(self):
        if self.B < 1:
            raise ValueError(f"B must be >= 1, got {self.B}")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must be in (0, 1), got {self.alpha}")


@dataclass
class BootstrapReport:
    name: str
    estimate: float
    ci_lo: float
    ci_hi: float
    p_empir: float
    p_adj: float | None
    B: int
    alpha: float
    n: int
    n_skipped: int = 0  # replicates dropped after repeated single-class redraws

    @property
    def p_empir_at_floor(self) -> bool:
        """True when no replicate fell at or below mu_ref ("p <= 1/(B+1)")."""
        return self.p_empir * (self.B + 1) <= 1.0 + 1e-12

    def p_empir_text(self) -> str:
        """Display form: the add-one floor reads as an upper bound."""
        if self.p_empir_at_floor:
            return f"<= {1.0 / (self.B + 1):.2g}"
        return f"{self.p_empir:.4g}"

    def to_json_dict(self) -> dict:
        return {
            "name": self.name,
            "estimate": self.estimate,
            "ci_lo": self.ci_lo,
            "ci_hi": self.ci_hi,
            "p_empir": self.p_empir,
            "p_adj": self.p_adj,
            "B": self.B,
            "alpha": self.alpha,
            "n": self.n,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), indent=2) + "\n"


def bootstrap_auc(scores: ScoreSet, cfg: BootstrapConfig = BootstrapConfig(), name: str = "auc") -> BootstrapReport:
    """Percentile bootstrap of the AUC of a score set.

    Each replicate resamples the n (label, score) pairs with replacement;
    single-class replicates are redrawn (bounded retries, then skipped).
    Replicate RNG streams derive from (seed, replicate index), so results
    do not depend on evaluation order.
    """
    labels = scores.labels
    vals = scores.scores
    n = labels.size
    if n < 2:
        raise DegenerateScoresError(f"bootstrap needs n >= 2, got {n}")
    estimate = auc_from_arrays(labels, vals)

    reps = np.empty(cfg.B)
    n_ok = 0
    n_skipped = 0
    for b in range(cfg.B):
        rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, b]))
        for _ in range(_MAX_REDRAWS):
            idx = rng.integers(0, n, n)
            lab = labels[idx]
            pos = int(lab.sum())
            if 0 < pos < n:
                reps[n_ok] = auc_from_arrays(lab, vals[idx])
                n_ok += 1
                break
        else:
            n_skipped += 1
    reps = reps[:n_ok]
    if n_ok == 0:
        raise DegenerateScoresError("all bootstrap replicates were single-class")

    lo, hi = np.quantile(reps, [cfg.alpha / 2.0, 1.0 - cfg.alpha / 2.0])
    count_le = int(np.sum(reps <= cfg.mu_ref))
    p_empir = (1 + count_le) / (n_ok + 1)
    return BootstrapReport(
        name=name,
        estimate=estimate,
        ci_lo=float(lo),
        ci_hi=float(hi),
        p_empir=p_empir,
        p_adj=None,
        B=cfg.B,
        alpha=cfg.alpha,
        n=n,
        n_skipped=n_skipped,
    )


def benjamini_hochberg(pvals) -> np.ndarray:
    """Step-up FDR adjustment; returns adjusted p-values in input order."""
    p = np.asarray(pvals, dtype=np.float64)
    if p.size == 0:
        return p.copy()
    if p.min() <= 0.0 or p.max() > 1.0:
        raise ValueError("p-values must lie in (0, 1]")
    m = p.size
    order = np.argsort(p, kind="stable")
    ranks = np.arange(1, m + 1, dtype=np.float64)
    # multiply by the precomputed ratio m/rank (>= 1) so the adjusted value
    # can never round below the input p-value
    scaled = p[order] * (m / ranks)
    adj_sorted = np.minimum(1.0, np.minimum.accumulate(scaled[::-1])[::-1])
    out = np.empty(m)
    out[order] = adj_sorted
    return out


def adjust_reports(reports: list[BootstrapReport]) -> list[BootstrapReport]:
    """One bulk BH adjustment across a family of bootstrap reports (in place)."""
    adjusted = benjamini_hochberg([r.p_empir for r in reports])
    for r, a in zip(reports, adjusted):
        r.p_adj = float(a)
    return reports


def significance_marker(p_adj: float, alpha: float = 0.05) -> str:
    """'*' for significant, '#' for trend (alpha <= p < 0.1), '' otherwise."""
    if p_adj < alpha:
        return "*"
    if p_adj < 0.1:
        return "#"
    return ""


def significance_table(reports: list[BootstrapReport], alpha: float = 0.05) -> list[dict]:
    """Rows of estimates, CIs, p-values and their significance markers."""
    rows = []
    for r in reports:
        if r.p_adj is None:
            raise ValueError(f"report {r.name!r} lacks p_adj; run adjust_reports first")
        rows.append(
            {
                "name": r.name,
                "estimate": r.estimate,
                "ci_lo": r.ci_lo,
                "ci_hi": r.ci_hi,
                "p_empir": r.p_empir,
                "p_adj": r.p_adj,
                "marker": significance_marker(r.p_adj, alpha),
            }
        )
    return rows
