"""Train a mini residual network end to end and bootstrap its test AUC.

Uses the desk-scale variant of the D recipe (SGD with Nesterov momentum,
weight decay, exponential lr decay, class-weighted BCE, color-jitter and
flip augmentation, early stopping on validation AUC), then evaluates the
best checkpoint on the held-out test partition with B=1000 bootstrap
replicates and renders the training curves as SVG.

Run:  python3 demos/02_train_and_evaluate.py
"""

import tempfile
from pathlib import Path

from sslab.cli import main

work = Path(tempfile.mkdtemp(prefix="sslab_demo2_"))
data = work / "data"
runs = work / "runs"

assert main(["synth", "--patients", "150", "--delta", "2.0", "--image-size", "32",
             "--seed", "11", "--out", str(data)]) == 0

cfg = work / "run.cfg"
cfg.write_text(
    f"""
run.name = demo
data.manifest = {data / 'manifest.csv'}
model.input_size = 32
model.stem_channels = 8
model.n_residual_units = 2
model.hidden_layer_width = 32
model.dropout_p = 0.5
augment.preset = appendix
loss.kind = bce
loss.w_f = 0.98
loss.w_m = 1.02
optim.lr0 = 0.01
train.batch_size = 16
train.max_epochs = 40
train.patience = 10
train.seed = 1
""",
    encoding="utf-8",
)

assert main(["train", "--config", str(cfg), "--runs-root", str(runs)]) == 0
assert main([
    "eval",
    "--checkpoint", str(runs / "demo" / "best.ckpt"),
    "--manifest", str(data / "manifest.csv"),
    "--partition", "all",
    "--name", "demo",
    "--out", str(work / "eval"),
]) == 0
assert main(["report", "--run", str(runs / "demo"), "--out", str(work / "plots")]) == 0

print(f"\nartifacts under {work}:")
for p in sorted(work.rglob("*")):
    if p.is_file() and p.suffix in (".csv", ".json", ".svg", ".ckpt", ".cfg"):
        print(f"  {p.relative_to(work)}")
