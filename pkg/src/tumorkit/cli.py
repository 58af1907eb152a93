"""Command-line front end.

Subcommands: synth, preprocess, elbow, segment, train, evaluate.  The
global flags --config/--seed/--out are accepted before or after the
subcommand; every output lands under the --out directory (default "out",
or the config file's output_dir).
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import image_io, report
from .config import load_config
from .dataset import load_manifest, load_sample, split
from .errors import ConfigError, TumorkitError
from .imgproc import preprocess_pipeline
from .metrics import overlap_report
from .nn.network import build_network, load_checkpoint, save_checkpoint
from .nn.train import TrainConfig, evaluate, train
from .pipeline import build_model_inputs, segment_sample
from .rng import derive_rng, derive_seed
from .segment import KMeansConfig, elbow_scan
from .synth import generate_corpus


def _global_flags(parser, suppress=False):
    default = {"default": argparse.SUPPRESS} if suppress else {}
    parser.add_argument("--config", help="TOML pipeline configuration", **default)
    parser.add_argument("--seed", type=int, help="top-level seed (overrides config)", **default)
    parser.add_argument("--out", help="output directory (overrides config)", **default)


def _build_parser():
    parser = argparse.ArgumentParser(prog="tumorkit", description=__doc__)
    _global_flags(parser)
    shared = argparse.ArgumentParser(add_help=False)
    _global_flags(shared, suppress=True)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", parents=[shared], help="generate a synthetic corpus")
    p.add_argument("--n", type=int, default=200, help="total samples (even, half positive)")
    p.add_argument("--size", type=int, default=64, help="image side length in pixels")

    p = sub.add_parser("preprocess", parents=[shared], help="write preprocessed images")
    p.add_argument("ids", nargs="*", help="sample ids to process")
    p.add_argument("--all", action="store_true", help="process every manifest entry")

    p = sub.add_parser("elbow", parents=[shared], help="scan cluster counts and pick the elbow")
    p.add_argument("--k-max", type=int, help="largest k to scan (default from config)")
    p.add_argument("--per-image", action="store_true",
                   help="scan each image separately instead of pooling pixels")

    p = sub.add_parser("segment", parents=[shared], help="predict tumor masks and report IoU")
    p.add_argument("ids", nargs="*", help="restrict to these sample ids (default: all)")

    p = sub.add_parser("train", parents=[shared], help="train the classifier")
    p.add_argument("--train-on", choices=("raw", "preprocessed", "masked"),
                   help="input representation (default from config)")

    p = sub.add_parser("evaluate", parents=[shared], help="evaluate a checkpoint on a split")
    p.add_argument("--checkpoint", required=True, help="checkpoint JSON written by train")
    p.add_argument("--split", choices=("train", "test"), default="test")
    p.add_argument("--train-on", choices=("raw", "preprocessed", "masked"),
                   help="input representation; must match how the checkpoint was trained")
    return parser


def cmd_synth(cfg, args) -> int:
    manifest = generate_corpus(cfg.output_dir, args.n, args.size, cfg.seed)
    print(f"wrote {args.n} samples ({args.n // 2} positive) to {manifest}")
    return 0


def cmd_preprocess(cfg, args) -> int:
    manifest = load_manifest(cfg.manifest_path())
    ids = list(manifest.ids()) if args.all else list(args.ids)
    out_dir = Path(cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    failures = 0
    for sample_id in ids:
        try:
            sample = load_sample(manifest, sample_id)
            pre = preprocess_pipeline(sample.image, cfg.preprocess_steps)
            image_io.write_gray(out_dir / f"{sample_id}_pre.png", pre)
        except (TumorkitError, OSError) as exc:
            failures += 1
            print(f"error: {sample_id}: {exc}", file=sys.stderr)
    print(f"preprocessed {len(ids) - failures}/{len(ids)} image(s) into {out_dir}")
    return 1 if failures else 0


def _pooled_intensities(manifest, ids, cfg):
    chunks = []
    for sample_id in ids:
        sample = load_sample(manifest, sample_id)
        chunks.append(preprocess_pipeline(sample.image, cfg.preprocess_steps).ravel())
    points = np.concatenate(chunks)
    if len(points) > cfg.elbow_max_points:
        rng = derive_rng(cfg.seed, "elbow", "subsample")
        points = points[rng.choice(len(points), cfg.elbow_max_points, replace=False)]
    return points


def cmd_elbow(cfg, args) -> int:
    k_max = args.k_max if args.k_max is not None else cfg.elbow_k_max
    if k_max < 3:
        raise ConfigError(f"--k-max must be >= 3, got {k_max}")
    manifest = load_manifest(cfg.manifest_path())
    ids = manifest.ids()
    if not ids:
        raise ConfigError("manifest has no samples to scan")
    out_dir = Path(cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    base = KMeansConfig(
        k=1, restarts=cfg.kmeans_restarts, max_iters=cfg.kmeans_max_iters, tol=cfg.kmeans_tol,
        seed=cfg.seed,
    )
    scope = "per-image" if args.per_image else cfg.elbow_scope
    if scope == "pooled":
        points = _pooled_intensities(manifest, ids, cfg)
        result = elbow_scan(
            points, k_max,
            KMeansConfig(k=1, restarts=base.restarts, max_iters=base.max_iters,
                         tol=base.tol, seed=derive_seed(cfg.seed, "elbow", "pooled")),
        )
        report.write_elbow_csv(out_dir / "elbow.csv", result.ks, result.wcss_curve)
        report.plot_elbow(out_dir / "elbow.svg", result.ks, result.wcss_curve, result.chosen_k)
        print(f"chosen k = {result.chosen_k}")
    else:
        chosen = []
        for sample_id in ids:
            sample = load_sample(manifest, sample_id)
            pre = preprocess_pipeline(sample.image, cfg.preprocess_steps)
            result = elbow_scan(
                pre, k_max,
                KMeansConfig(k=1, restarts=base.restarts, max_iters=base.max_iters,
                             tol=base.tol, seed=derive_seed(cfg.seed, "elbow", sample_id)),
            )
            report.write_elbow_csv(out_dir / f"elbow_{sample_id}.csv",
                                   result.ks, result.wcss_curve)
            report.plot_elbow(out_dir / f"elbow_{sample_id}.svg",
                              result.ks, result.wcss_curve, result.chosen_k)
            chosen.append(result.chosen_k)
            print(f"{sample_id}: chosen k = {result.chosen_k}")
        modal = int(np.bincount(chosen).argmax())
        print(f"chosen k = {modal} (mode over {len(chosen)} images)")
    return 0


def cmd_segment(cfg, args) -> int:
    manifest = load_manifest(cfg.manifest_path())
    ids = list(args.ids) if args.ids else manifest.ids()
    out_dir = Path(cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows, skipped = [], 0
    for sample_id in ids:
        if manifest.entry(sample_id).mask_path is None:
            skipped += 1
            print(f"warning: {sample_id}: no ground-truth mask, skipping", file=sys.stderr)
            continue
        seg = segment_sample(
            manifest, sample_id, cfg.preprocess_steps, cfg.kmeans_config(), cfg.seed
        )
        image_io.write_mask(out_dir / f"{sample_id}_mask.png", seg.pred_mask)
        rows.append((seg.id, seg.label, seg.pred_mask, seg.truth_mask))
    if not rows:
        raise ConfigError("no samples with ground-truth masks to evaluate")
    iou_report = overlap_report(rows, cfg.detect_threshold)
    report.write_iou_report_csv(out_dir / "iou_report.csv", iou_report)
    for line in report.format_class_summaries(iou_report):
        print(line)
    print(f"skipped {skipped} sample(s) without masks")
    return 0


def _split_ids(cfg, manifest):
    train_ids, test_ids = split(manifest, cfg.split_spec())
    if not train_ids or not test_ids:
        raise ConfigError("both train and test splits must be nonempty")
    return train_ids, test_ids


def cmd_train(cfg, args) -> int:
    train_on = args.train_on or cfg.train_on
    manifest = load_manifest(cfg.manifest_path())
    train_ids, test_ids = _split_ids(cfg, manifest)
    out_dir = Path(cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    input_hw = cfg.network_input[:2]
    kcfg = cfg.kmeans_config()
    xtr, ytr = build_model_inputs(
        manifest, train_ids, cfg.preprocess_steps, kcfg, cfg.seed, train_on, input_hw
    )
    xte, yte = build_model_inputs(
        manifest, test_ids, cfg.preprocess_steps, kcfg, cfg.seed, train_on, input_hw
    )
    network = build_network(cfg.network_input, cfg.network_layers, seed=cfg.seed)
    train_cfg = TrainConfig(
        epochs=cfg.epochs, batch_size=cfg.batch_size, seed=cfg.seed, augment=cfg.augment
    )
    with report.TrainReportWriter(out_dir / "train_report.csv") as writer:
        result, adam = train(
            network, xtr, ytr, xte, yte, train_cfg, cfg.adam, on_epoch=writer.write_row
        )
    report.plot_accuracy(out_dir / "accuracy.svg", result)
    report.plot_loss(out_dir / "loss.svg", result)
    save_checkpoint(out_dir / "checkpoint.json", network, adam)
    print(f"peak train accuracy = {max(result.train_acc):.4f}")
    print(f"peak test accuracy = {max(result.test_acc):.4f}")
    print(f"final train accuracy = {result.train_acc[-1]:.4f}")
    print(f"final test accuracy = {result.test_acc[-1]:.4f}")
    return 0


def cmd_evaluate(cfg, args) -> int:
    network, _ = load_checkpoint(args.checkpoint)
    if network.input_shape != tuple(cfg.network_input):
        raise ConfigError(
            f"checkpoint input shape {network.input_shape} does not match "
            f"configured network input {tuple(cfg.network_input)}"
        )
    manifest = load_manifest(cfg.manifest_path())
    train_ids, test_ids = _split_ids(cfg, manifest)
    ids = train_ids if args.split == "train" else test_ids
    images, labels = build_model_inputs(
        manifest, ids, cfg.preprocess_steps, cfg.kmeans_config(), cfg.seed,
        cfg.train_on, cfg.network_input[:2],
    )
    loss, acc = evaluate(network, images, labels)
    print(f"{args.split} loss = {loss!r}")
    print(f"{args.split} accuracy = {acc!r}")
    return 0


_COMMANDS = {
    "synth": cmd_synth,
    "preprocess": cmd_preprocess,
    "elbow": cmd_elbow,
    "segment": cmd_segment,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = load_config(
            getattr(args, "config", None),
            seed=getattr(args, "seed", None),
            out_dir=getattr(args, "out", None),
        )
        if getattr(args, "train_on", None):
            cfg.train_on = args.train_on
            cfg.validate()
        return _COMMANDS[args.command](cfg, args)
    except (TumorkitError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
