"""Domain adaptation: test a trained model on a shifted external dataset.

Dataset B carries the same planted separability as the training source A
but different vessel texture (and different draws).  Scoring the entire
external manifest -- its partition labels are ignored -- mirrors the
cross-testing protocol, and the drop relative to in-domain test AUC
measures how well the model travels across the shift.

Run:  python3 demos/05_domain_shift.py
"""

import json
import tempfile
from pathlib import Path

from sslab.cli import main

work = Path(tempfile.mkdtemp(prefix="sslab_demo5_"))

assert main(["synth", "--patients", "150", "--delta", "2.0", "--image-size", "32",
             "--seed", "21", "--out", str(work / "A")]) == 0
# same separability, shifted texture: denser vasculature, fresh draws
assert main(["synth", "--patients", "120", "--delta", "2.0", "--image-size", "32",
             "--seed", "22", "--vessel-density", "1.6", "--out", str(work / "B")]) == 0

cfg = work / "run.cfg"
cfg.write_text(
    f"""
run.name = source
data.manifest = {work / 'A' / 'manifest.csv'}
model.input_size = 32
model.stem_channels = 8
model.n_residual_units = 2
model.hidden_layer_width = 32
model.dropout_p = 0.5
optim.lr0 = 0.01
train.batch_size = 16
train.max_epochs = 40
train.patience = 10
train.seed = 3
""",
    encoding="utf-8",
)
assert main(["train", "--config", str(cfg), "--runs-root", str(work / "runs")]) == 0
ckpt = work / "runs" / "source" / "best.ckpt"

assert main(["eval", "--checkpoint", str(ckpt), "--manifest", str(work / "A" / "manifest.csv"),
             "--partition", "test", "--name", "A", "--out", str(work / "eval_A")]) == 0
assert main(["crosstest", "--checkpoint", str(ckpt), "--manifest", str(work / "B" / "manifest.csv"),
             "--train-manifest", str(work / "A" / "manifest.csv"),
             "--name", "A_on_B", "--out", str(work / "eval_B")]) == 0

in_domain = json.loads((work / "eval_A" / "report_test.json").read_text())
shifted = json.loads((work / "eval_B" / "report_ext.json").read_text())
print(f"\nin-domain test AUC: {in_domain['estimate']:.3f} CI ({in_domain['ci_lo']:.3f}, {in_domain['ci_hi']:.3f})")
print(f"shifted-domain AUC: {shifted['estimate']:.3f} CI ({shifted['ci_lo']:.3f}, {shifted['ci_hi']:.3f}) on n={shifted['n']}")
print(f"degradation: {in_domain['estimate'] - shifted['estimate']:+.3f}")
