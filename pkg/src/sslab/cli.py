"""Command-line front end: synth | train | eval | crosstest | ensemble | reshuffle | report.

Exit codes: 0 success, 1 usage or configuration error, 2 runtime failure.
Every command writes byte-identical artifacts when rerun with --force on
identical inputs.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from importlib import resources
from pathlib import Path

import numpy as np

from .config import ConfigError, ExperimentConfig, format_config, load_config, parse_config
from .data import (
    Manifest,
    PartitionSpec,
    SyntheticSpec,
    dataset_stats,
    format_stats,
    generate_synthetic,
    load_images,
    split_patients,
    write_ground_truth,
)
from .ensemble import EnsembleSpec, ensemble_scores, fits_csv_text, predictor_study, reshuffle_ensemble_sweep
from .metrics import ScoreSet
from .model import load_checkpoint_with_metadata, save_checkpoint
from .plots import line_panels_svg, scatter_svg
from .stats import BootstrapConfig, adjust_reports, bootstrap_auc, significance_marker
from .training import metrics_csv_text, parse_metrics_csv, train


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _resolve_config_path(name: str) -> Path:
    p = Path(name)
    if p.exists():
        return p
    stem = p.stem if p.suffix == ".cfg" else name
    packaged = resources.files("sslab").joinpath(f"presets/{stem}.cfg")
    if packaged.is_file():
        return Path(str(packaged))
    raise UsageError(f"config {name!r} not found (no such file, no preset of that name)")


def _prepare_out_dir(path: Path, force: bool) -> Path:
    if path.exists() and any(path.iterdir()):
        if not force:
            raise UsageError(f"output directory {path} is not empty (use --force to overwrite)")
    path.mkdir(parents=True, exist_ok=True)
    return path


def _load_manifest_and_images(manifest_path: Path):
    manifest = Manifest.from_csv(manifest_path)
    return manifest, load_images(manifest, manifest_path.parent)


def _parse_proportions(text: str):
    parts = [float(x) for x in text.split(",")]
    if len(parts) != 3:
        raise UsageError(f"expected three comma-separated proportions, got {text!r}")
    return tuple(parts)


# ---------------------------------------------------------------------------
# commands

def cmd_synth(args) -> int:
    out = Path(args.out)
    _prepare_out_dir(out, args.force)
    if args.delta == 0.0:
        print("warning: delta = 0 plants no signal; expect chance-level AUC", file=sys.stderr)
    spec = SyntheticSpec(
        n_patients=args.patients,
        separability_delta=args.delta,
        image_size=args.image_size,
        seed=args.seed,
        vessel_density=args.vessel_density,
    )
    manifest, ground_truth = generate_synthetic(spec, out)
    if not args.no_split:
        manifest = split_patients(manifest, PartitionSpec(proportions=_parse_proportions(args.split), seed=args.seed))
    manifest.to_csv(out / "manifest.csv")
    write_ground_truth(ground_truth, out / "groundtruth.csv")
    print(format_stats(dataset_stats(manifest)), end="")
    print(f"wrote {2 * args.patients} images to {out}")
    return 0


def cmd_train(args) -> int:
    cfg = load_config(_resolve_config_path(args.config))
    if args.manifest:
        cfg = replace(cfg, data=replace(cfg.data, manifest=str(Path(args.manifest).resolve())))
    if not cfg.data.manifest:
        raise UsageError("no manifest: set data.manifest in the config or pass --manifest")
    manifest_path = Path(cfg.data.manifest)
    if not manifest_path.exists():
        raise UsageError(f"manifest {manifest_path} does not exist")
    run_dir = Path(args.runs_root) / cfg.run.name
    _prepare_out_dir(run_dir, args.force)

    manifest, store = _load_manifest_and_images(manifest_path)
    result = train(manifest, store, cfg)

    (run_dir / "resolved.cfg").write_text(format_config(cfg), encoding="utf-8")
    (run_dir / "metrics.csv").write_text(metrics_csv_text(result.records), encoding="utf-8")
    best_val_auc = result.records[result.best_epoch - 1].val_auc
    save_checkpoint(result.model, run_dir / "best.ckpt", epoch=result.best_epoch, val_auc=best_val_auc)
    by_epoch: dict[int, list] = {}
    for hist in result.histograms:
        by_epoch.setdefault(hist.epoch, []).append(hist)
    for epoch, hists in by_epoch.items():
        lines = ["partition,bin_lo,bin_hi,class0,class1"]
        for h in hists:
            n = h.n_bins
            for k in range(n):
                lines.append(
                    f"{h.partition},{k / n!r},{(k + 1) / n!r},{int(h.class0_bins[k])},{int(h.class1_bins[k])}"
                )
        (run_dir / f"beliefs_epoch{epoch}.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    print(
        f"run {cfg.run.name}: {len(result.records)} epochs, best epoch {result.best_epoch} "
        f"({cfg.train.monitor} = {result.best_metric:.4f}) -> {run_dir}"
    )
    return 0


def _eval_config_for(args, model_config) -> ExperimentConfig:
    if getattr(args, "config", None):
        cfg = load_config(_resolve_config_path(args.config))
    else:
        cfg = parse_config("")
    return replace(cfg, model=model_config)


def _score_entries(model, entries, store, cfg) -> ScoreSet:
    from .training import _EvalSplit, _predict_batched

    split = _EvalSplit(entries, store, cfg)
    probs = _predict_batched(model, split.images)
    return ScoreSet(split.ids, split.labels, np.clip(probs, 0.0, 1.0))


def _bootstrap_cfg(args) -> BootstrapConfig:
    return BootstrapConfig(B=args.B, alpha=args.alpha, seed=args.boot_seed, mu_ref=args.mu_ref)


def cmd_eval(args) -> int:
    model, meta = load_checkpoint_with_metadata(args.checkpoint)
    cfg = _eval_config_for(args, model.config)
    manifest_path = Path(args.manifest)
    manifest, store = _load_manifest_and_images(manifest_path)
    out = _prepare_out_dir(Path(args.out), args.force)
    (out / "resolved.cfg").write_text(format_config(cfg), encoding="utf-8")
    partitions = ("val", "test") if args.partition == "all" else (args.partition,)
    reports = []
    for part in partitions:
        entries = manifest.partition(part)
        if not entries:
            raise UsageError(f"manifest has no rows in partition {part!r}")
        scores = _score_entries(model, entries, store, cfg)
        scores.to_csv(out / f"scores_{part}.csv")
        reports.append(bootstrap_auc(scores, _bootstrap_cfg(args), name=f"{args.name}/{part}"))
    adjust_reports(reports)
    for part, report in zip(partitions, reports):
        (out / f"report_{part}.json").write_text(report.to_json(), encoding="utf-8")
        marker = significance_marker(report.p_adj, args.alpha)
        print(
            f"{report.name}: AUC {report.estimate:.4f}{marker} "
            f"CI ({report.ci_lo:.4f}, {report.ci_hi:.4f}) p_empir {report.p_empir_text()} "
            f"p_adj {report.p_adj:.4g} n={report.n}"
        )
    return 0


def cmd_crosstest(args) -> int:
    model, meta = load_checkpoint_with_metadata(args.checkpoint)
    cfg = _eval_config_for(args, model.config)
    manifest_path = Path(args.manifest)
    manifest, store = _load_manifest_and_images(manifest_path)
    if args.train_manifest:
        train_manifest = Manifest.from_csv(Path(args.train_manifest))
        shared = {e.patient_id for e in train_manifest} & {e.patient_id for e in manifest}
        if shared:
            raise UsageError(f"id collision between manifests: {sorted(shared)[:5]} ...")
    out = _prepare_out_dir(Path(args.out), args.force)
    (out / "resolved.cfg").write_text(format_config(cfg), encoding="utf-8")
    entries = list(manifest)  # the whole external database; partitions ignored
    scores = _score_entries(model, entries, store, cfg)
    scores.to_csv(out / "scores_ext.csv")
    report = bootstrap_auc(scores, _bootstrap_cfg(args), name=f"{args.name}/ext")
    adjust_reports([report])
    (out / "report_ext.json").write_text(report.to_json(), encoding="utf-8")
    print(
        f"{report.name}: AUC {report.estimate:.4f} CI ({report.ci_lo:.4f}, {report.ci_hi:.4f}) "
        f"p_adj {report.p_adj:.4g} n={report.n}"
    )
    return 0


def cmd_ensemble(args) -> int:
    if len(args.runs) < args.L:
        raise UsageError(f"need L={args.L} member runs, got {len(args.runs)}")
    members = []
    for run_dir in args.runs[: args.L]:
        ckpt = Path(run_dir) / "best.ckpt"
        if not ckpt.exists():
            raise UsageError(f"no best.ckpt under {run_dir}")
        model, meta = load_checkpoint_with_metadata(ckpt)
        members.append((Path(run_dir).name, meta["val_auc"], model, meta))
    spec = EnsembleSpec.from_members(args.ell, [(m[0], m[1]) for m in members])
    models_by_id = {m[0]: m[2] for m in members}
    meta_by_id = {m[0]: m[3] for m in members}
    cfg = _eval_config_for(args, members[0][2].config)

    manifest_path = Path(args.manifest)
    manifest, store = _load_manifest_and_images(manifest_path)
    out = _prepare_out_dir(Path(args.out), args.force)
    (out / "resolved.cfg").write_text(format_config(cfg), encoding="utf-8")

    rows = []
    reports = []
    ens_scores = {}
    boot = _bootstrap_cfg(args)
    for part in ("val", "test"):
        entries = manifest.partition(part)
        if not entries:
            raise UsageError(f"manifest has no rows in partition {part!r}")
        per_member = {}
        labels = None
        ids = None
        for mid, model in models_by_id.items():
            scores = _score_entries(model, entries, store, cfg)
            per_member[mid] = scores.scores
            labels, ids = scores.labels, scores.ids
        for mid in spec.selected_ids():
            reports.append(bootstrap_auc(ScoreSet(ids, labels, per_member[mid]), boot, name=f"{mid}/{part}"))
        mean_scores = ensemble_scores(spec, per_member)
        ens = ScoreSet(ids, labels, np.clip(mean_scores, 0.0, 1.0))
        ens_scores[part] = ens
        reports.append(bootstrap_auc(ens, boot, name=f"E*/{part}"))
    adjust_reports(reports)
    by_name = {r.name: r for r in reports}
    for mid in spec.selected_ids():
        rv, rt = by_name[f"{mid}/val"], by_name[f"{mid}/test"]
        rows.append(_ensemble_row(mid, meta_by_id[mid]["epoch"], rv, rt, args.alpha))
    rv, rt = by_name["E*/val"], by_name["E*/test"]
    rows.append(_ensemble_row("E*", "", rv, rt, args.alpha))
    header = "run,epoch,auc_val,auc_test,ci_val,ci_test,p_adj_val,p_adj_test,marker_val,marker_test"
    (out / "ensemble.csv").write_text("\n".join([header] + rows) + "\n", encoding="utf-8")
    (out / "report_ens_val.json").write_text(by_name["E*/val"].to_json(), encoding="utf-8")
    (out / "report_ens_test.json").write_text(by_name["E*/test"].to_json(), encoding="utf-8")
    print("\n".join([header] + rows))
    return 0


def _ensemble_row(name, epoch, rv, rt, alpha) -> str:
    return (
        f"{name},{epoch},{rv.estimate!r},{rt.estimate!r},"
        f"({rv.ci_lo:.4f}; {rv.ci_hi:.4f}),({rt.ci_lo:.4f}; {rt.ci_hi:.4f}),"
        f"{rv.p_adj!r},{rt.p_adj!r},{significance_marker(rv.p_adj, alpha)},{significance_marker(rt.p_adj, alpha)}"
    )


def cmd_reshuffle(args) -> int:
    cfg = load_config(_resolve_config_path(args.config))
    dev_path, test_path = Path(args.dev_manifest), Path(args.test_manifest)
    dev_manifest, dev_store = _load_manifest_and_images(dev_path)
    test_manifest, test_store = _load_manifest_and_images(test_path)
    store = {**dev_store, **test_store}
    out = _prepare_out_dir(Path(args.out), args.force)
    (out / "resolved.cfg").write_text(format_config(cfg), encoding="utf-8")
    sizes = [int(s) for s in args.sizes.split(",")]
    sweep = reshuffle_ensemble_sweep(
        dev_manifest,
        test_manifest,
        store,
        cfg,
        n_models=args.n_models,
        sizes=sizes,
        trials_per_size=args.trials,
        seed=args.seed,
    )
    (out / "sweep.csv").write_text(sweep.sweep_csv_text(), encoding="utf-8")
    summary_lines = ["size,mean_test_auc,ci_lo,ci_hi"]
    for row in sweep.summary:
        summary_lines.append(f"{row['size']},{row['mean_test_auc']!r},{row['ci_lo']!r},{row['ci_hi']!r}")
    (out / "summary.csv").write_text("\n".join(summary_lines) + "\n", encoding="utf-8")
    fits = predictor_study(sweep)
    (out / "fits.csv").write_text(fits_csv_text(fits), encoding="utf-8")
    fits_json = [
        {
            "predictors": list(f.predictor_names),
            "coeffs": [float(c) for c in f.coeffs],
            "intercept": f.intercept,
            "r2": f.r2,
            "adjusted_r2": f.adjusted_r2,
            "mae": f.mae,
        }
        for f in fits
    ]
    (out / "fits.json").write_text(json.dumps(fits_json, indent=2) + "\n", encoding="utf-8")
    for line in summary_lines:
        print(line)
    return 0


def cmd_report(args) -> int:
    if not args.run and not args.evals:
        raise UsageError("nothing to report: pass --run and/or --evals")
    out = _prepare_out_dir(Path(args.out), args.force)
    wrote = []
    if args.run:
        run_dir = Path(args.run)
        metrics_path = run_dir / "metrics.csv"
        if not metrics_path.exists():
            raise UsageError(f"no metrics.csv under {run_dir}")
        records = parse_metrics_csv(metrics_path.read_text(encoding="utf-8"))
        if not records:
            raise UsageError(f"metrics.csv under {run_dir} is empty")
        best_epoch = max(records, key=lambda r: r.val_auc).epoch
        ckpt = run_dir / "best.ckpt"
        if ckpt.exists():
            _, meta = load_checkpoint_with_metadata(ckpt)
            best_epoch = meta["epoch"]
        epochs = [r.epoch for r in records]
        panels = []
        for metric in ("acc", "bce", "auc"):
            for part in ("train", "val"):
                field_name = f"{part}_{metric}"
                ys = [getattr(r, field_name) for r in records]
                panels.append((field_name, [(field_name, epochs, ys)]))
        svg = line_panels_svg(panels, vline_x=best_epoch)
        path = out / "training_curves.svg"
        path.write_text(svg, encoding="utf-8")
        wrote.append(path)
    if args.evals:
        points = []
        rows = ["name,val_auc,test_auc,n_val,n_test"]
        for eval_dir in args.evals:
            val_path = Path(eval_dir) / "report_val.json"
            test_path = Path(eval_dir) / "report_test.json"
            if not val_path.exists() or not test_path.exists():
                raise UsageError(f"{eval_dir} lacks report_val.json/report_test.json")
            rv = json.loads(val_path.read_text(encoding="utf-8"))
            rt = json.loads(test_path.read_text(encoding="utf-8"))
            label = rv["name"].split("/")[0]
            points.append({"x": rv["estimate"], "y": rt["estimate"], "label": label, "size": rv["n"] + rt["n"]})
            rows.append(f"{label},{rv['estimate']!r},{rt['estimate']!r},{rv['n']},{rt['n']}")
        svg = scatter_svg(points, "validation vs test AUC", "validation AUC", "test AUC")
        path = out / "val_test_scatter.svg"
        path.write_text(svg, encoding="utf-8")
        (out / "summary.csv").write_text("\n".join(rows) + "\n", encoding="utf-8")
        wrote.append(path)
    for p in wrote:
        print(f"wrote {p}")
    return 0


# ---------------------------------------------------------------------------
# wiring

def _add_bootstrap_flags(p):
    p.add_argument("--B", type=int, default=1000, help="bootstrap replicates")
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--boot-seed", type=int, default=0)
    p.add_argument("--mu-ref", type=float, default=0.5)


def build_parser() -> _Parser:
    parser = _Parser(prog="sslab", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic dataset")
    p.add_argument("--patients", type=int, required=True)
    p.add_argument("--delta", type=float, required=True, help="class separability of the planted statistic")
    p.add_argument("--image-size", type=int, default=32)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--vessel-density", type=float, default=1.0)
    p.add_argument("--split", default="0.7,0.15,0.15")
    p.add_argument("--no-split", action="store_true", help="leave the manifest unpartitioned")
    p.add_argument("--out", required=True)
    p.add_argument("--force", action="store_true")
    p.set_defaults(fn=cmd_synth)

    p = sub.add_parser("train", help="train one model from a config")
    p.add_argument("--config", required=True, help="config path or preset name (D, N, C, E, mini)")
    p.add_argument("--manifest", help="override data.manifest")
    p.add_argument("--runs-root", default="runs")
    p.add_argument("--force", action="store_true")
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("eval", help="score a checkpoint and bootstrap its AUC")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--partition", choices=("val", "test", "all"), default="all")
    p.add_argument("--config", help="config supplying the eval pixel pipeline")
    p.add_argument("--name", default="model")
    p.add_argument("--out", required=True)
    p.add_argument("--force", action="store_true")
    _add_bootstrap_flags(p)
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("crosstest", help="score a checkpoint on an entire external dataset")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--manifest", required=True, help="external manifest; partition labels are ignored")
    p.add_argument("--train-manifest", help="optional: error on patient id collisions with this manifest")
    p.add_argument("--config", help="config supplying the eval pixel pipeline")
    p.add_argument("--name", default="model")
    p.add_argument("--out", required=True)
    p.add_argument("--force", action="store_true")
    _add_bootstrap_flags(p)
    p.set_defaults(fn=cmd_crosstest)

    p = sub.add_parser("ensemble", help="evaluate an (ell, L) ensemble of trained runs")
    p.add_argument("--runs", nargs="+", required=True, help="run directories containing best.ckpt")
    p.add_argument("--ell", type=int, required=True)
    p.add_argument("--L", type=int, required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--config", help="config supplying the eval pixel pipeline")
    p.add_argument("--out", required=True)
    p.add_argument("--force", action="store_true")
    _add_bootstrap_flags(p)
    p.set_defaults(fn=cmd_ensemble)

    p = sub.add_parser("reshuffle", help="reshuffled-ensembling size sweep and regression study")
    p.add_argument("--dev-manifest", required=True)
    p.add_argument("--test-manifest", required=True)
    p.add_argument("--config", required=True)
    p.add_argument("--n-models", type=int, default=10)
    p.add_argument("--sizes", default="1,2,3,4,5,6,7,8,9,10")
    p.add_argument("--trials", type=int, default=30)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--force", action="store_true")
    p.set_defaults(fn=cmd_reshuffle)

    p = sub.add_parser("report", help="emit SVG plots and summary tables")
    p.add_argument("--run", help="run directory with metrics.csv")
    p.add_argument("--evals", nargs="*", default=[], help="eval output directories (val+test reports)")
    p.add_argument("--out", required=True)
    p.add_argument("--force", action="store_true")
    p.set_defaults(fn=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.fn(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # runtime failure: IO, training abort, bad data
        print(f"runtime failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
