"""Best-of-L probability-averaging ensembles and the reshuffle study.

An (ell, L) ensemble averages the output probabilities of the ell best
of L trained models, ranked by validation AUC (ties broken by member
id).  The reshuffle sweep retrains n models on fresh train/val splits of
a development set, then measures mean test AUC of random k-member
ensembles for each requested size k, and regresses ensemble test AUC on
summaries of member validation performance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .config import ExperimentConfig
from .data import Manifest, PartitionSpec, split_patients
from .metrics import ScoreSet, accuracy, auc, auc_from_arrays
from .training import train, _predict_batched, _EvalSplit


@dataclass(frozen=True)
class MemberRef:
    member_id: str
    val_auc: float


@dataclass(frozen=True)
class EnsembleSpec:
    ell: int
    L: int
    members: tuple

    def __post_init__(self):
        if not 1 <= self.ell <= self.L:
            raise ValueError(f"need 1 <= ell <= L, got ell={self.ell}, L={self.L}")
        if len(self.members) != self.L:
            raise ValueError(f"got {len(self.members)} members for L={self.L}")

    @classmethod
    def from_members(cls, ell: int, members) -> "EnsembleSpec":
        refs = tuple(
            sorted(
                (MemberRef(m[0], float(m[1])) if not isinstance(m, MemberRef) else m for m in members),
                key=lambda r: (-r.val_auc, r.member_id),
            )
        )
        return cls(ell=ell, L=len(refs), members=refs)

    def selected_ids(self) -> list[str]:
        return [r.member_id for r in self.members[: self.ell]]


def ensemble_scores(spec: EnsembleSpec, scores_by_member: dict[str, np.ndarray]) -> np.ndarray:
    """Mean probability over the selected members' per-sample scores.

    Members are summed in sorted-id order (so the output is invariant to
    how the member list was ordered) and the result is clipped to the
    per-sample member envelope, which keeps the mean-bounds invariant
    exact and makes an ensemble of identical members exactly the member.
    """
    cols = []
    for mid in sorted(spec.selected_ids()):
        if mid not in scores_by_member:
            raise KeyError(f"missing member scores for {mid!r}")
        cols.append(np.asarray(scores_by_member[mid], dtype=np.float64))
    stacked = np.stack(cols)
    return np.clip(stacked.mean(axis=0), stacked.min(axis=0), stacked.max(axis=0))


def ensemble_predict(spec: EnsembleSpec, models_by_id: dict, batch) -> np.ndarray:
    """Average predict_proba over the selected member models."""
    from .model import predict_proba

    cols = {}
    for mid in spec.selected_ids():
        if mid not in models_by_id:
            raise KeyError(f"missing member model for {mid!r}")
        cols[mid] = predict_proba(models_by_id[mid], batch)
    return ensemble_scores(spec, cols)


# ---------------------------------------------------------------------------
# linear regression

@dataclass
class RegressionFit:
    coeffs: np.ndarray
    intercept: float
    r2: float
    adjusted_r2: float
    mae: float
    predictor_names: tuple

    @property
    def slope(self) -> float:
        return float(self.coeffs[0])


def fit_linear(xs, ys, n_predictors: int = 1, predictor_names=None) -> RegressionFit:
    """Ordinary least squares with intercept; errors on collinear input."""
    x = np.asarray(xs, dtype=np.float64)
    y = np.asarray(ys, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    n, p = x.shape
    if p != n_predictors:
        raise ValueError(f"got {p} predictor columns for n_predictors={n_predictors}")
    if y.shape != (n,):
        raise ValueError(f"xs has {n} rows but ys has shape {y.shape}")
    if n < n_predictors + 2:
        raise ValueError(f"need at least {n_predictors + 2} points, got {n}")
    centered = x - x.mean(axis=0)
    if np.linalg.matrix_rank(centered, tol=1e-10 * max(1.0, np.abs(x).max())) < p:
        raise ValueError("zero-variance or collinear predictor column")
    design = np.hstack([x, np.ones((n, 1))])
    beta, *_ = np.linalg.lstsq(design, y, rcond=None)
    fitted = design @ beta
    residuals = y - fitted
    ss_res = float(residuals @ residuals)
    ss_tot = float(((y - y.mean()) ** 2).sum())
    r2 = 0.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    adjusted = 1.0 - (1.0 - r2) * (n - 1) / (n - p - 1) if n - p - 1 > 0 else float("nan")
    names = tuple(predictor_names) if predictor_names else tuple(f"x{i}" for i in range(p))
    return RegressionFit(
        coeffs=beta[:p],
        intercept=float(beta[p]),
        r2=r2,
        adjusted_r2=adjusted,
        mae=float(np.abs(residuals).mean()),
        predictor_names=names,
    )


# ---------------------------------------------------------------------------
# reshuffled ensembling

@dataclass
class SweepTrial:
    size: int
    trial: int
    member_ids: tuple
    test_auc: float
    ens_val_auc: float
    ens_val_acc: float
    min_member_val_auc: float
    max_member_val_auc: float
    mean_member_val_auc: float


@dataclass
class SweepResult:
    member_val_auc: dict[str, float]
    member_test_auc: dict[str, float]
    trials: list[SweepTrial]
    summary: list[dict]  # per size: mean test AUC and percentile CI

    def sweep_csv_text(self) -> str:
        lines = ["size,trial,test_auc"]
        for t in self.trials:
            lines.append(f"{t.size},{t.trial},{t.test_auc!r}")
        return "\n".join(lines) + "\n"


def _derived_seed(seed: int, k: int) -> int:
    return int(np.random.SeedSequence([seed, k]).generate_state(1)[0])


def reshuffle_ensemble_sweep(
    dev_manifest: Manifest,
    test_manifest: Manifest,
    store: dict[str, np.ndarray],
    cfg: ExperimentConfig,
    n_models: int,
    sizes,
    trials_per_size: int,
    seed: int = 0,
    dev_proportions: tuple[float, float] = (0.8, 0.2),
) -> SweepResult:
    """Train n models on reshuffled dev splits and sweep ensemble sizes.

    Dev and test must be patient-disjoint.  For each size k, subsets are
    enumerated when there are at most trials_per_size of them, otherwise
    sampled (members drawn without replacement within a trial).  Member
    test scores are computed once; ensembles average the cached vectors.
    """
    sizes = sorted(set(int(s) for s in sizes))
    if any(s < 1 or s > n_models for s in sizes):
        raise ValueError(f"sizes {sizes} must lie in [1, {n_models}]")
    dev_pids = {e.patient_id for e in dev_manifest}
    test_pids = {e.patient_id for e in test_manifest}
    if dev_pids & test_pids:
        raise ValueError("dev and test manifests share patients")

    test_entries = list(test_manifest)
    test_split = _EvalSplit(test_entries, store, cfg)
    dev_entries = list(dev_manifest)
    dev_split = _EvalSplit(dev_entries, store, cfg)

    member_val_auc: dict[str, float] = {}
    member_test_auc: dict[str, float] = {}
    test_scores: dict[str, np.ndarray] = {}
    dev_scores: dict[str, np.ndarray] = {}
    p_train, p_val = dev_proportions
    for j in range(n_models):
        mid = f"m{j:02d}"
        split = split_patients(
            dev_manifest, PartitionSpec(proportions=(p_train, p_val, 0.0), seed=_derived_seed(seed, 2 * j))
        )
        run_cfg = replace(cfg, train=replace(cfg.train, seed=_derived_seed(seed, 2 * j + 1) % 2**31))
        result = train(split, store, run_cfg)
        member_val_auc[mid] = result.best_metric if run_cfg.train.monitor == "val_auc" else _val_auc(result)
        probs = _predict_batched(result.model, test_split.images)
        test_scores[mid] = probs
        member_test_auc[mid] = auc_from_arrays(test_split.labels, probs)
        dev_scores[mid] = _predict_batched(result.model, dev_split.images)

    member_ids = sorted(test_scores)
    trials: list[SweepTrial] = []
    for size in sizes:
        n_subsets = math.comb(n_models, size)
        if n_subsets <= trials_per_size:
            subsets = _enumerate_subsets(member_ids, size)
        else:
            rng = np.random.default_rng(np.random.SeedSequence([seed, size]))
            subsets = [
                tuple(sorted(np.array(member_ids)[rng.choice(n_models, size, replace=False)]))
                for _ in range(trials_per_size)
            ]
        for t_idx, subset in enumerate(subsets):
            test_mean = np.mean([test_scores[m] for m in subset], axis=0)
            dev_mean = np.mean([dev_scores[m] for m in subset], axis=0)
            vals = [member_val_auc[m] for m in subset]
            dev_scoreset = ScoreSet(dev_split.ids, dev_split.labels, np.clip(dev_mean, 0.0, 1.0))
            trials.append(
                SweepTrial(
                    size=size,
                    trial=t_idx,
                    member_ids=subset,
                    test_auc=auc_from_arrays(test_split.labels, test_mean),
                    ens_val_auc=auc(dev_scoreset),
                    ens_val_acc=accuracy(dev_scoreset),
                    min_member_val_auc=min(vals),
                    max_member_val_auc=max(vals),
                    mean_member_val_auc=float(np.mean(vals)),
                )
            )

    summary = []
    for size in sizes:
        aucs = np.array([t.test_auc for t in trials if t.size == size])
        lo, hi = np.quantile(aucs, [0.025, 0.975])
        summary.append({"size": size, "mean_test_auc": float(aucs.mean()), "ci_lo": float(lo), "ci_hi": float(hi)})
    return SweepResult(
        member_val_auc=member_val_auc,
        member_test_auc=member_test_auc,
        trials=trials,
        summary=summary,
    )


def _val_auc(result):
    return result.records[result.best_epoch - 1].val_auc


def _enumerate_subsets(ids, size):
    from itertools import combinations

    return [tuple(c) for c in combinations(ids, size)]


# the fixed predictor subsets of the regression study, in report order
PREDICTOR_SUBSETS = (
    ("ens_val_auc",),
    ("ens_val_acc",),
    ("min_member_val_auc",),
    ("max_member_val_auc",),
    ("mean_member_val_auc",),
    ("min_member_val_auc", "max_member_val_auc"),
    ("min_member_val_auc", "max_member_val_auc", "mean_member_val_auc"),
    ("ens_val_auc", "ens_val_acc", "min_member_val_auc", "max_member_val_auc"),
)


def predictor_study(sweep: SweepResult, subsets=PREDICTOR_SUBSETS) -> list[RegressionFit]:
    """Regress ensemble test AUC on validation-side predictors, per subset."""
    y = np.array([t.test_auc for t in sweep.trials])
    fits = []
    for names in subsets:
        x = np.column_stack([[getattr(t, name) for t in sweep.trials] for name in names])
        fits.append(fit_linear(x, y, n_predictors=len(names), predictor_names=names))
    return fits


def fits_csv_text(fits: list[RegressionFit]) -> str:
    lines = ["predictors,coeffs,intercept,r2,adjusted_r2,mae"]
    for f in fits:
        coeffs = ";".join(repr(float(c)) for c in f.coeffs)
        lines.append(f"{'+'.join(f.predictor_names)},{coeffs},{f.intercept!r},{f.r2!r},{f.adjusted_r2!r},{f.mae!r}")
    return "\n".join(lines) + "\n"
