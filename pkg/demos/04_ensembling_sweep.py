"""Reshuffled ensembling: size sweep and validation-to-test regression.

Trains n models, each on a fresh train/val reshuffle of a development
set, then measures the test AUC of random k-member probability-averaging
ensembles for k = 1..n, and regresses ensemble test AUC on summaries of
member validation performance.  The mean member validation AUC tends to
be the most informative single predictor.

Run:  python3 demos/04_ensembling_sweep.py
"""

import tempfile
from pathlib import Path

from sslab.config import parse_config
from sslab.data import Manifest, PartitionSpec, SyntheticSpec, generate_synthetic, load_images, split_patients
from sslab.ensemble import predictor_study, reshuffle_ensemble_sweep

work = Path(tempfile.mkdtemp(prefix="sslab_demo4_"))
manifest, _ = generate_synthetic(SyntheticSpec(100, 2.0, image_size=16, seed=42), work)
split = split_patients(manifest, PartitionSpec((0.75, 0.0, 0.25), seed=0))
dev = Manifest([e for e in split if e.partition == "train"])
test = Manifest([e for e in split if e.partition == "test"])
store = load_images(manifest, work)

cfg = parse_config(
    """
model.input_size = 16
model.stem_channels = 4
model.n_residual_units = 1
model.hidden_layer_width = 16
model.dropout_p = 0.3
optim.lr0 = 0.02
train.batch_size = 16
train.max_epochs = 15
train.patience = 15
"""
)
sweep = reshuffle_ensemble_sweep(
    dev, test, store, cfg, n_models=10, sizes=list(range(1, 11)), trials_per_size=25, seed=1
)

print("ensemble size sweep (test AUC):")
for row in sweep.summary:
    bar = "#" * int(60 * (row["mean_test_auc"] - 0.5) / 0.5)
    print(f"  k={row['size']:>2}  mean {row['mean_test_auc']:.3f}  CI ({row['ci_lo']:.3f}, {row['ci_hi']:.3f})  {bar}")

print("\nregressing ensemble test AUC on validation-side predictors:")
print(f"{'predictors':<55} {'R^2':>6} {'adjR^2':>7} {'MAE':>7}")
for fit in predictor_study(sweep):
    name = "+".join(fit.predictor_names)
    print(f"{name:<55} {fit.r2:>6.3f} {fit.adjusted_r2:>7.3f} {fit.mae:>7.4f}")
