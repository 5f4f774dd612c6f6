"""Why validation BCE rises while accuracy and AUC keep improving.

Two views of the same phenomenon:

1. Closed form -- hold the error rate fixed at r and let the model grow
   more confident (beliefs at c or 1-c).  Mean BCE eventually increases
   in c because one confident mistake outweighs many confident correct
   answers; the bounded cosine loss converges to 2r instead.
2. A small overfitting run trained twice, once per loss, recording
   per-epoch validation criteria and belief histograms.

Run:  python3 demos/03_loss_comparison.py
"""

import tempfile
from pathlib import Path

import numpy as np

from sslab.config import parse_config
from sslab.data import PartitionSpec, SyntheticSpec, generate_synthetic, load_images, split_patients
from sslab.training import bce_increase_probe, train

print("closed-form sharpening family at error rate r = 0.1")
print(f"{'confidence':>11} {'mean BCE':>9} {'mean balanced':>14}")
for row in bce_increase_probe([0.6, 0.9, 0.99, 0.999, 0.9999], error_rate=0.1):
    print(f"{row['confidence']:>11.4f} {row['mean_bce']:>9.4f} {row['mean_balanced']:>14.4f}")
print("note the BCE dip-then-rise; the balanced loss approaches 2r = 0.2\n")

work = Path(tempfile.mkdtemp(prefix="sslab_demo3_"))
manifest, _ = generate_synthetic(SyntheticSpec(40, 2.0, image_size=16, seed=0), work)
manifest = split_patients(manifest, PartitionSpec((0.5, 0.5, 0.0), seed=0))
store = load_images(manifest, work)

base = """
model.input_size = 16
model.stem_channels = 4
model.n_residual_units = 1
model.hidden_layer_width = 16
model.dropout_p = 0.0
optim.lr0 = 0.01
optim.weight_decay = 0
train.batch_size = 16
train.max_epochs = 400
train.patience = 400
train.seed = 0
"""
print("validation criterion every 50 epochs (same data, same optimizer):")
for kind in ("bce", "balanced"):
    result = train(manifest, store, parse_config(base + f"loss.kind = {kind}\n"))
    crit = np.array([v for _, v in result.criterion_values])
    k = int(np.argmin(crit))
    path = " ".join(f"{crit[i]:.3f}" for i in range(0, len(crit), 50))
    print(
        f"{kind:>8}: {path}  (min {crit[k]:.3f} at ep {k + 1}, final {crit[-1]:.3f}, "
        f"final val AUC {result.records[-1].val_auc:.3f})"
    )
print(
    "\nthe bounded loss keeps declining in tandem with training; BCE flattens\n"
    "and turns upward once confident mistakes appear (the acceptance suite\n"
    "pins a sharper instance of the rise at a higher learning rate)"
)
