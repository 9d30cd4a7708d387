"""Residual-branch ablations over variant (up/down) and residual loss (L1/L2)."""
from __future__ import annotations

import copy
import csv
import io
import itertools
import time
from dataclasses import dataclass, replace

from ..model import ModelConfig
from .checkpoint import Checkpoint
from .train import TrainConfig, train_stage, validate

# Row order: variant outer (up, down), loss inner (L1, L2).
AXIS_ORDER = {"variant": ("up", "down"), "loss": ("L1", "L2")}


@dataclass
class AblationRow:
    variant: str
    loss: str
    psnr: float
    ssim: float
    master_psnr: float
    wall_clock_s: float

    @property
    def label(self) -> str:
        return f"{self.variant}/{self.loss}"


def expand_axes(axes: dict, base: ModelConfig) -> list:
    """Cartesian product of the requested axes in the documented order.

    Axes that are not requested keep the base configuration's value.
    """
    unknown = set(axes) - set(AXIS_ORDER)
    if unknown:
        raise ValueError(f"unknown ablation axes {sorted(unknown)}; use variant and/or loss")
    spec = base.branches[1]
    choices = []
    for name in ("variant", "loss"):
        values = axes.get(name)
        if values is None:
            choices.append([spec.variant if name == "variant" else spec.loss])
            continue
        values = [v.upper() if name == "loss" else v.lower() for v in values]
        bad = [v for v in values if v not in AXIS_ORDER[name]]
        if bad:
            raise ValueError(f"invalid {name} values {bad}")
        choices.append([v for v in AXIS_ORDER[name] if v in values])
    return list(itertools.product(*choices))


def variant_config(base: ModelConfig, variant: str, loss: str) -> ModelConfig:
    cfg = copy.deepcopy(base)
    for spec in cfg.branches[1:]:
        spec.variant = variant
        spec.loss = loss
    cfg.validate()
    return cfg


def run_ablation(base: ModelConfig, train_cfg: TrainConfig, master: Checkpoint, train_pairs,
                 val_pairs, axes: dict, depth: int = 1) -> list:
    """Train residual stages ``1..depth`` from the same master for every configuration."""
    if master.n_branches < 1:
        raise ValueError("ablation needs a trained master checkpoint")
    if not 1 <= depth <= base.n_residual:
        raise ValueError(f"depth must be in 1..{base.n_residual}")
    master_branches = master.branches[:1]
    master_ckpt = Checkpoint(master.model_config, master_branches, None, [],
                             master.stage_seconds[:1], master.stage_configs[:1])
    master_psnr = validate(master_branches, val_pairs, train_cfg.tile).mean_psnr
    rows = []
    for variant, loss in expand_axes(axes, base):
        cfg = variant_config(base, variant, loss)
        ckpt = master_ckpt
        t0 = time.perf_counter()
        for stage in range(1, depth + 1):
            ckpt = train_stage(replace(train_cfg, stage=stage, loss=None), cfg, train_pairs,
                               val_pairs, prior=ckpt)
        m = validate(ckpt.branches, val_pairs, train_cfg.tile)
        rows.append(AblationRow(variant, loss, m.mean_psnr, m.mean_ssim, master_psnr,
                                time.perf_counter() - t0))
    return rows


def format_markdown(rows: list) -> str:
    lines = ["| variant | residual loss | PSNR (dB) | SSIM | gain over master (dB) |",
             "|---|---|---|---|---|"]
    for r in rows:
        lines.append(f"| {r.variant} | {r.loss} | {r.psnr:.4f} | {r.ssim:.4f} | "
                     f"{r.psnr - r.master_psnr:+.4f} |")
    return "\n".join(lines)


def format_csv(rows: list) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["variant", "loss", "psnr_db", "ssim", "master_psnr_db", "wall_clock_s"])
    for r in rows:
        w.writerow([r.variant, r.loss, f"{r.psnr:.6f}", f"{r.ssim:.6f}",
                    f"{r.master_psnr:.6f}", f"{r.wall_clock_s:.3f}"])
    return buf.getvalue()
