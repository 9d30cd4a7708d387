"""Command-line interface: ``irlsr train | eval | sr | ablate``.

Exit codes: 0 success, 2 usage or configuration error, 3 data or I/O error,
4 numerical failure (non-finite training loss).

Experiment configuration is an INI file::

    [model]
    scale = 4
    n_blocks = 4          # master residual blocks; each residual branch halves it
    n_feats = 16
    variant = up          # up | down
    master_loss = L1
    residual_loss = L2
    res_scale = 1.0

    [train]
    iterations = 1000           # master budget
    residual_iterations = 250   # per residual stage; defaults to 25% of the master's
    batch_size = 16
    patch_size = 12             # LR patch side
    lr = 1e-4
    master_lr =                 # optional override for stage 0
    beta1 = 0.9
    beta2 = 0.99
    eps = 1e-8
    decay_fraction = 0.5
    val_every = 250
    augment = true
    tile =                      # LR tile side for validation; empty = whole image
    seed = 0

    [data]
    train_dir = images/train    # HR PNGs; relative paths resolve against the config file
    val_dir =                   # optional; otherwise the last n_val training images
    n_val = 4
    cache_lr = false            # write <stem>_x<s>.png next to each HR image

    [output]
    dir = runs/toy
"""
from __future__ import annotations

import argparse
import configparser
import copy
import logging
import sys
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .data import ImageIOError, EvalProtocol, load_dataset, load_png, save_png, split_dataset
from .data.io import is_png
from .model import ConfigError, ModelConfig, WiringError
from .training import (
    CheckpointError,
    NumericalError,
    StageError,
    TrainConfig,
    format_csv,
    format_markdown,
    load_checkpoint,
    run_ablation,
    save_checkpoint,
    train_stage,
    validate,
)
from .training.metrics_csv import metric_rows, write_metrics_csv
from .training.train import compose_arrays, infer

log = logging.getLogger("irlsr")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4

_KEYS = {
    "model": {"scale": int, "n_blocks": int, "n_feats": int, "variant": str,
              "master_loss": str, "residual_loss": str, "res_scale": float},
    "train": {"iterations": int, "residual_iterations": int, "batch_size": int,
              "patch_size": int, "lr": float, "master_lr": float, "beta1": float,
              "beta2": float, "eps": float, "decay_fraction": float, "val_every": int,
              "augment": bool, "tile": int, "seed": int},
    "data": {"train_dir": Path, "val_dir": Path, "n_val": int, "cache_lr": bool},
    "output": {"dir": Path},
}


class UsageError(Exception):
    """Invalid configuration or arguments (exit 2)."""


@dataclass
class ExperimentConfig:
    model: ModelConfig
    train: TrainConfig
    residual_iterations: int
    master_lr: float
    train_dir: Path
    val_dir: Path | None = None
    n_val: int = 4
    cache_lr: bool = False
    output_dir: Path = field(default_factory=lambda: Path("runs"))

    def stage_config(self, stage: int, seed: int | None = None) -> TrainConfig:
        cfg = replace(self.train, stage=stage)
        if stage > 0:
            cfg.iterations = self.residual_iterations
        else:
            cfg.lr = self.master_lr
        if seed is not None:
            cfg.seed = seed
        return cfg

    def checkpoint_path(self, stage: int) -> Path:
        return self.output_dir / f"stage{stage}.irl"


def _convert(section: str, key: str, raw: str, parser: configparser.ConfigParser, base: Path):
    kind = _KEYS[section][key]
    try:
        if kind is bool:
            return parser.getboolean(section, key)
        if kind is Path:
            p = Path(raw).expanduser()
            return p if p.is_absolute() else base / p
        return kind(raw)
    except ValueError as exc:
        raise UsageError(f"[{section}] {key}: invalid value {raw!r}") from exc


def load_config(path) -> ExperimentConfig:
    """Parse and validate an experiment file; dataset paths must exist."""
    path = Path(path)
    if not path.is_file():
        raise UsageError(f"config file not found: {path}")
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        parser.read(path, encoding="utf-8")
    except configparser.Error as exc:
        raise UsageError(f"{path}: {exc}") from exc
    values: dict = {}
    for section in parser.sections():
        if section not in _KEYS:
            raise UsageError(f"{path}: unknown section [{section}]")
        for key, raw in parser.items(section):
            if key not in _KEYS[section]:
                raise UsageError(f"{path}: unknown key {key!r} in [{section}]")
            if raw.strip() == "":
                continue
            values[(section, key)] = _convert(section, key, raw.strip(), parser, path.parent)

    def get(section, key, default=None):
        return values.get((section, key), default)

    try:
        model = ModelConfig.default(
            scale=get("model", "scale", 4), n_blocks=get("model", "n_blocks", 4),
            n_feats=get("model", "n_feats", 16), variant=get("model", "variant", "up"),
            master_loss=get("model", "master_loss", "L1"),
            residual_loss=get("model", "residual_loss", "L2"),
            res_scale=get("model", "res_scale", 1.0),
        )
        train = TrainConfig(
            iterations=get("train", "iterations", 1000),
            batch_size=get("train", "batch_size", 16),
            patch_size=get("train", "patch_size", 12),
            lr=get("train", "lr", 1e-4),
            beta1=get("train", "beta1", 0.9), beta2=get("train", "beta2", 0.99),
            eps=get("train", "eps", 1e-8),
            decay_fraction=get("train", "decay_fraction", 0.5),
            seed=get("train", "seed", 0), val_every=get("train", "val_every", 250),
            augment=get("train", "augment", True), tile=get("train", "tile"),
        )
        train.validate()
    except (ConfigError, ValueError) as exc:
        raise UsageError(f"{path}: {exc}") from exc
    residual_iterations = get("train", "residual_iterations", max(1, train.iterations // 4))
    if residual_iterations < 0:
        raise UsageError(f"{path}: residual_iterations must be non-negative")

    train_dir = get("data", "train_dir")
    if train_dir is None:
        raise UsageError(f"{path}: [data] train_dir is required")
    val_dir = get("data", "val_dir")
    for p in (train_dir, val_dir):
        if p is not None and not p.is_dir():
            raise ImageIOError(f"dataset directory not found: {p}")
    return ExperimentConfig(
        model=model, train=train, residual_iterations=residual_iterations,
        master_lr=get("train", "master_lr", train.lr), train_dir=train_dir, val_dir=val_dir,
        n_val=get("data", "n_val", 4), cache_lr=get("data", "cache_lr", False),
        output_dir=get("output", "dir", path.parent / "runs"),
    )


def load_data(exp: ExperimentConfig):
    s = exp.model.scale
    pairs = load_dataset(exp.train_dir, s, exp.cache_lr)
    if exp.val_dir is not None:
        return pairs, load_dataset(exp.val_dir, s, exp.cache_lr)
    try:
        return split_dataset(pairs, exp.n_val)
    except ValueError as exc:
        raise ImageIOError(f"{exp.train_dir}: {exc}") from exc


def _config_label(model: ModelConfig, n_branches: int) -> str:
    if n_branches == 1:
        return "master"
    spec = model.branches[n_branches - 1]
    return f"stage{n_branches - 1}-{spec.variant}-{spec.loss}"


def _print_table(metrics) -> None:
    width = max([len("mean")] + [len(m.name) for m in metrics.per_image])
    print(f"{'image':<{width}}  {'PSNR (dB)':>10}  {'SSIM':>7}")
    for m in metrics.per_image:
        print(f"{m.name:<{width}}  {m.psnr:>10.4f}  {m.ssim:>7.4f}")
    print(f"{'mean':<{width}}  {metrics.mean_psnr:>10.4f}  {metrics.mean_ssim:>7.4f}")


# --- commands -------------------------------------------------------------------

def cmd_train(args) -> int:
    exp = load_config(args.config)
    stage = args.stage
    if stage < 0 or stage > exp.model.n_residual:
        raise UsageError(f"stage must be in 0..{exp.model.n_residual} for scale x{exp.model.scale}")
    prior = None
    if args.resume is not None:
        prior = load_checkpoint(args.resume)
    elif stage > 0:
        prev = exp.checkpoint_path(stage - 1)
        if not prev.is_file():
            raise StageError(f"stage {stage} needs the stage-{stage - 1} checkpoint {prev}")
        prior = load_checkpoint(prev)
    train_pairs, val_pairs = load_data(exp)
    exp.output_dir.mkdir(parents=True, exist_ok=True)

    cfg = exp.stage_config(stage, args.seed)
    ckpt = train_stage(cfg, exp.model, train_pairs, val_pairs, prior=prior)
    out = exp.checkpoint_path(stage)
    save_checkpoint(ckpt, out)
    metrics = validate(ckpt, val_pairs, cfg.tile)
    rows = metric_rows(stage, _config_label(ckpt.model_config, ckpt.n_branches), metrics,
                       ckpt.stage_seconds[stage])
    write_metrics_csv(exp.output_dir / "metrics.csv", rows, append=True)
    _print_table(metrics)
    print(f"wrote {out}")
    return EXIT_OK


def _save_eval_images(directory: Path, pair, preds: list) -> None:
    directory.mkdir(parents=True, exist_ok=True)
    acc = np.zeros_like(preds[0])
    for i, p in enumerate(preds):
        if i > 0:
            # image-space residual left by branches 0..i-1, and what branch i predicts of it
            save_png(pair.hr - acc + 128.0, directory / f"{pair.name}_R{i}.png")
            save_png(p + 128.0, directory / f"{pair.name}_P{i}.png")
        acc = acc + p
        save_png(acc, directory / f"{pair.name}_sum{i}.png")


def cmd_eval(args) -> int:
    ckpt = load_checkpoint(args.ckpt)
    scale = ckpt.scale
    if args.scale is not None and args.scale != scale:
        raise UsageError(f"checkpoint is for scale x{scale}, --scale says x{args.scale}")
    pairs = load_dataset(args.dataset, scale)
    metrics = validate(ckpt, pairs, args.tile)
    if args.save_images is not None:
        for pair in pairs:
            _save_eval_images(Path(args.save_images), pair, infer(ckpt.branches, pair.lr, args.tile))
    csv_path = Path(args.csv) if args.csv else Path(args.ckpt).with_suffix(".eval.csv")
    # training time from the checkpoint keeps the CSV identical across reruns
    wall = float(sum(ckpt.stage_seconds))
    rows = metric_rows(ckpt.n_branches - 1, _config_label(ckpt.model_config, ckpt.n_branches),
                       metrics, wall)
    write_metrics_csv(csv_path, rows)
    _print_table(metrics)
    return EXIT_OK


def cmd_sr(args) -> int:
    ckpt = load_checkpoint(args.ckpt)
    if not is_png(args.input):
        raise ImageIOError(f"not a PNG file: {args.input}")
    lr = load_png(args.input)
    sr = compose_arrays(infer(ckpt.branches, lr, args.tile))
    save_png(sr, args.output)
    return EXIT_OK


def _parse_axes(text: str) -> dict:
    axes = {}
    for name in (t.strip().lower() for t in text.split(",") if t.strip()):
        if name not in ("variant", "loss"):
            raise UsageError(f"unknown ablation axis {name!r}; use variant and/or loss")
        axes[name] = ("up", "down") if name == "variant" else ("L1", "L2")
    if not axes:
        raise UsageError("--axes needs at least one of variant, loss")
    return axes


def cmd_ablate(args) -> int:
    exp = load_config(args.config)
    axes = _parse_axes(args.axes)
    train_pairs, val_pairs = load_data(exp)
    exp.output_dir.mkdir(parents=True, exist_ok=True)
    master_path = Path(args.master) if args.master else exp.checkpoint_path(0)
    if master_path.is_file():
        master = load_checkpoint(master_path)
        if master.scale != exp.model.scale:
            raise StageError(f"{master_path} is for scale x{master.scale}")
    else:
        log.info("no master checkpoint at %s; training one", master_path)
        master = train_stage(exp.stage_config(0, args.seed), exp.model, train_pairs, val_pairs)
        save_checkpoint(master, master_path)
    cfg = exp.stage_config(1, args.seed)
    rows = run_ablation(exp.model, cfg, master, train_pairs, val_pairs, axes, args.depth)
    md, csv_text = format_markdown(rows), format_csv(rows)
    (exp.output_dir / "ablation.md").write_text(md + "\n")
    (exp.output_dir / "ablation.csv").write_text(csv_text)
    print(md)
    print()
    print(csv_text, end="")
    return EXIT_OK


# --- entry point ----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="irlsr", description="Incremental residual learning for image super-resolution.")
    parser.add_argument("-q", "--quiet", action="store_true", help="only log warnings and errors")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train one stage (0 = master, i > 0 = residual branch i)")
    p.add_argument("--config", required=True, help="experiment INI file")
    p.add_argument("--stage", type=int, required=True, help="stage index to train")
    p.add_argument("--resume", metavar="CKPT",
                   help="checkpoint to continue from (default: <output dir>/stage<N-1>.irl)")
    p.add_argument("--seed", type=int, help="override [train] seed")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="PSNR/SSIM of a checkpoint on a directory of HR PNGs")
    p.add_argument("--ckpt", required=True, help="checkpoint file")
    p.add_argument("--dataset", required=True, help="directory of HR PNG images")
    p.add_argument("--scale", type=int, help="expected scale; must match the checkpoint")
    p.add_argument("--csv", help="metrics CSV path (default: <ckpt>.eval.csv)")
    p.add_argument("--save-images", metavar="DIR",
                   help="write partial compositions and residual visualisations here")
    p.add_argument("--tile", type=int, help="LR tile side for tiled inference")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sr", help="super-resolve one PNG")
    p.add_argument("--ckpt", required=True, help="checkpoint file")
    p.add_argument("--input", required=True, help="LR PNG image")
    p.add_argument("--output", required=True, help="output PNG path")
    p.add_argument("--tile", type=int, help="LR tile side for tiled inference")
    p.set_defaults(func=cmd_sr)

    p = sub.add_parser("ablate", help="compare residual-branch variants and losses")
    p.add_argument("--config", required=True, help="experiment INI file")
    p.add_argument("--axes", default="variant,loss",
                   help="comma-separated subset of: variant, loss (default: both)")
    p.add_argument("--master", metavar="CKPT",
                   help="master checkpoint (default: <output dir>/stage0.irl, trained if absent)")
    p.add_argument("--depth", type=int, default=1, help="residual stages per configuration")
    p.add_argument("--seed", type=int, help="override [train] seed")
    p.set_defaults(func=cmd_ablate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(asctime)s %(levelname)s %(message)s")
    try:
        return args.func(args)
    except (UsageError, ConfigError, StageError, WiringError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ImageIOError, CheckpointError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
