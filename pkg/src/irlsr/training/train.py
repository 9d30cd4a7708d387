"""Sequential stage training and validation."""
from __future__ import annotations

import copy
import logging
import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from ..data import EvalProtocol, PatchSampler
from ..model import (
    Branch,
    ModelConfig,
    build_master,
    build_residual_branch,
    branch_inputs,
    forward,
    freeze,
    receptive_radius,
    residual_label,
)
from ..tensor import Adam, AdamState, Tape, Tensor, get_loss, no_grad
from .checkpoint import Checkpoint, TrainState

log = logging.getLogger(__name__)


class StageError(ValueError):
    """Stage prerequisites are not met (missing or mismatched prior checkpoint)."""


class NumericalError(FloatingPointError):
    """The training loss became NaN or infinite."""


@dataclass
class TrainConfig:
    stage: int = 0
    iterations: int = 1000
    batch_size: int = 16
    patch_size: int = 12
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.99
    eps: float = 1e-8
    loss: str | None = None  # None: use the branch spec (L1 master, L2 residual)
    decay_fraction: float = 0.5  # halve lr after each such fraction of the budget
    seed: int = 0
    val_every: int = 250
    augment: bool = True
    tile: int | None = None  # LR tile size for validation; None = whole image

    def validate(self) -> None:
        if self.stage < 0:
            raise StageError("stage must be non-negative")
        if self.iterations < 0 or self.batch_size < 1 or self.patch_size < 4:
            raise ValueError("iterations >= 0, batch_size >= 1 and patch_size >= 4 required")
        if self.loss is not None and self.loss.upper() not in ("L1", "L2"):
            raise ValueError(f"loss must be L1 or L2, got {self.loss!r}")

    def lr_at(self, step: int) -> float:
        period = max(1, int(self.iterations * self.decay_fraction))
        return self.lr * 0.5 ** (step // period)


@dataclass
class ImageMetrics:
    name: str
    psnr: float
    ssim: float


@dataclass
class Metrics:
    per_image: list = field(default_factory=list)

    @property
    def mean_psnr(self) -> float:
        return float(np.mean([m.psnr for m in self.per_image]))

    @property
    def mean_ssim(self) -> float:
        return float(np.mean([m.ssim for m in self.per_image]))


# --- inference ------------------------------------------------------------------

def _to_tensor(img: np.ndarray) -> Tensor:
    return Tensor(np.ascontiguousarray(img.transpose(2, 0, 1)[None] / 255.0, dtype=np.float32))


def _forward_arrays(branches, lr_img: np.ndarray) -> list:
    """Per-branch predictions as ``(h, w, 3)`` arrays on the [0, 255] scale."""
    with no_grad():
        preds, _ = forward(branches, _to_tensor(lr_img))
    return [p.data[0].transpose(1, 2, 0) * 255.0 for p in preds]


def _tile_starts(n: int, tile: int, overlap: int) -> list:
    if n <= tile:
        return [0]
    step = tile - overlap
    starts = list(range(0, n - tile, step))
    starts.append(n - tile)
    return starts


def _blend_ramp(length: int, overlap: int, at_start: bool, at_end: bool, scale: int) -> np.ndarray:
    w = np.ones(length * scale)
    ramp = overlap * scale
    if ramp > 0:
        pos = (np.arange(ramp) + 0.5) / ramp
        if not at_start:
            w[:ramp] = np.minimum(w[:ramp], pos)
        if not at_end:
            w[-ramp:] = np.minimum(w[-ramp:], pos[::-1])
    return w


def infer(branches, lr_img: np.ndarray, tile: int | None = None, overlap: int = 8) -> list:
    """Per-branch predictions for a whole LR image (``(h, w, 3)``, [0, 255]).

    With ``tile`` set, the image is processed in ``tile x tile`` LR windows that
    overlap by ``overlap`` pixels and are linearly blended there. Each window is
    run with enough surrounding context that every kept output pixel sees the
    same inputs as in an untiled pass.
    """
    h, w = lr_img.shape[:2]
    if tile is None or (h <= tile and w <= tile):
        return _forward_arrays(branches, lr_img)
    if tile <= overlap:
        raise ValueError("tile must be larger than the overlap")
    s = branches[0].scale
    ctx = receptive_radius(branches)
    acc = [np.zeros((h * s, w * s, 3)) for _ in branches]
    wsum = np.zeros((h * s, w * s, 1))
    ys, xs = _tile_starts(h, tile, overlap), _tile_starts(w, tile, overlap)
    for y0 in ys:
        th = min(tile, h - y0)
        for x0 in xs:
            tw = min(tile, w - x0)
            cy0, cx0 = max(0, y0 - ctx), max(0, x0 - ctx)
            cy1, cx1 = min(h, y0 + th + ctx), min(w, x0 + tw + ctx)
            preds = _forward_arrays(branches, lr_img[cy0:cy1, cx0:cx1])
            oy, ox = (y0 - cy0) * s, (x0 - cx0) * s
            wy = _blend_ramp(th, overlap, y0 == 0, y0 + th == h, s)
            wx = _blend_ramp(tw, overlap, x0 == 0, x0 + tw == w, s)
            weight = (wy[:, None] * wx[None, :])[..., None]
            region = (slice(y0 * s, (y0 + th) * s), slice(x0 * s, (x0 + tw) * s))
            for a, p in zip(acc, preds):
                a[region] += weight * p[oy:oy + th * s, ox:ox + tw * s]
            wsum[region] += weight
    return [a / wsum for a in acc]


def compose_arrays(preds: list) -> np.ndarray:
    out = preds[0].copy()
    for p in preds[1:]:
        out += p
    return out


def validate(branches, val_pairs, tile: int | None = None, overlap: int = 8) -> Metrics:
    """Y-channel PSNR/SSIM of the composed output, border shaved by the scale."""
    if isinstance(branches, Checkpoint):
        branches = branches.branches
    s = branches[0].scale
    proto = EvalProtocol.for_scale(s)
    metrics = Metrics()
    for pair in val_pairs:
        if min(pair.hr.shape[:2]) <= 2 * s:
            raise ValueError(f"validation image {pair.name} too small for scale {s}")
        sr = np.clip(compose_arrays(infer(branches, pair.lr, tile, overlap)), 0.0, 255.0)
        metrics.per_image.append(ImageMetrics(pair.name, proto.psnr(sr, pair.hr), proto.ssim(sr, pair.hr)))
    return metrics


# --- training -------------------------------------------------------------------

def _prepare_stack(cfg: TrainConfig, model_cfg: ModelConfig, prior: Checkpoint | None):
    """Branch list for stage ``cfg.stage`` and the state to resume from, if any."""
    i = cfg.stage
    if i > model_cfg.n_residual:
        raise StageError(f"scale x{model_cfg.scale} has no stage {i} (last is {model_cfg.n_residual})")
    if prior is None:
        if i > 0:
            raise StageError(f"stage {i} needs a checkpoint holding branches 0..{i - 1}")
        return [build_master(model_cfg, cfg.seed)], None
    if prior.model_config.scale != model_cfg.scale:
        raise StageError(
            f"checkpoint is for scale x{prior.model_config.scale}, config says x{model_cfg.scale}"
        )
    branches = list(prior.branches)
    if len(branches) == i + 1:
        resume = prior.state if prior.state is not None and prior.state.stage == i else None
        if resume is None:
            raise StageError(f"checkpoint already holds branch {i} but no stage-{i} train state")
    elif len(branches) == i:
        resume = None
    else:
        raise StageError(f"stage {i} needs branches 0..{i - 1}; checkpoint holds {len(branches)}")
    for b in branches[:i]:
        freeze(b)
    if resume is None and i > 0:
        # the new branch follows the current config (variant/loss may differ from the prior's)
        branches.append(build_residual_branch(model_cfg, i, cfg.seed))
    return branches, resume


def train_stage(cfg: TrainConfig, model_cfg: ModelConfig, train_pairs, val_pairs,
                prior: Checkpoint | None = None, on_validate=None) -> Checkpoint:
    """Train branch ``cfg.stage`` with every earlier branch frozen.

    The master regresses the HR patch; branch ``i > 0`` regresses what
    branches ``0..i-1`` leave over. The best-validating parameters of the stage
    are kept.
    """
    cfg.validate()
    model_cfg = copy.deepcopy(model_cfg)
    i = cfg.stage
    if cfg.loss is not None:
        model_cfg.branches[i].loss = cfg.loss.upper()
    model_cfg.validate()
    branches, resume = _prepare_stack(cfg, model_cfg, prior)
    branch: Branch = branches[i]
    if prior is not None:
        # frozen predecessors keep the architecture they were trained with
        for j in range(i):
            model_cfg.branches[j] = copy.deepcopy(prior.model_config.branches[j])
    loss_fn = get_loss(model_cfg.branches[i].loss)

    params = branch.trainable()
    state = resume or TrainState(stage=i, adam=AdamState.zeros_like([p.data for p in params]))
    opt = Adam(params, cfg.lr, (cfg.beta1, cfg.beta2), cfg.eps, state=state.adam)
    rng = np.random.default_rng([cfg.seed, i, 1])
    if state.rng_state is not None:
        rng.bit_generator.state = state.rng_state
    sampler = PatchSampler(train_pairs, model_cfg.scale, cfg.patch_size, rng, cfg.augment)

    history = list(prior.history) if prior is not None else []
    stage_seconds = list(prior.stage_seconds[:i]) if prior is not None else []
    stage_configs = list(prior.stage_configs[:i]) if prior is not None else []
    elapsed = prior.stage_seconds[i] if resume is not None and len(prior.stage_seconds) > i else 0.0
    best = None
    if resume is not None and math.isfinite(state.best_psnr):
        best = (state.best_psnr, [p.data.copy() for p in branch.params.values()], state.step)

    start = time.perf_counter()
    while state.step < cfg.iterations:
        lr_np, hr_np = sampler.batch(cfg.batch_size)
        lr_t, hr_t = Tensor(lr_np), Tensor(hr_np)
        with no_grad():
            prev, _ = forward(branches, lr_t, upto=i)
        label = residual_label(hr_t, prev, i)
        opt.lr = cfg.lr_at(state.step)
        with Tape() as tape:
            x = lr_t if i == 0 else branch_inputs(branches, i)
            loss = loss_fn(branch(x), label)
            value = loss.data.item()
            if not math.isfinite(value):
                raise NumericalError(f"stage {i} step {state.step}: loss is {value}")
            tape.backward(loss)
        opt.step()
        opt.zero_grad()
        state.losses.append(value)
        state.step += 1

        if state.step % cfg.val_every == 0 or state.step == cfg.iterations:
            m = validate(branches, val_pairs, cfg.tile)
            record = {"stage": i, "step": state.step, "mean_psnr": m.mean_psnr,
                      "mean_ssim": m.mean_ssim, "loss": value}
            history.append(record)
            log.info("stage %d step %d loss %.6g val psnr %.4f ssim %.4f",
                     i, state.step, value, m.mean_psnr, m.mean_ssim)
            if on_validate is not None:
                on_validate(record)
            if best is None or m.mean_psnr > best[0]:
                best = (m.mean_psnr, [p.data.copy() for p in branch.params.values()], state.step)
                state.best_psnr = m.mean_psnr

    elapsed += time.perf_counter() - start
    if best is not None:
        for p, arr in zip(branch.params.values(), best[1]):
            p.data = arr
    state.rng_state = rng.bit_generator.state
    stage_seconds.append(elapsed)
    stage_configs.append(asdict(cfg))
    if i > 0 and stage_seconds and stage_seconds[0] > 0:
        log.info("stage %d wall clock %.1fs = %.1f%% of master training time",
                 i, elapsed, 100.0 * elapsed / stage_seconds[0])
    return Checkpoint(model_cfg, branches, state, history, stage_seconds, stage_configs)


def initial_stage_loss(branches, lr_np, hr_np, i: int, loss_name: str) -> tuple[float, float]:
    """Loss of branch ``i`` before any update, and ``loss(0, R_i)`` for comparison."""
    lr_t, hr_t = Tensor(lr_np), Tensor(hr_np)
    with no_grad():
        prev, _ = forward(branches, lr_t, upto=i)
        label = residual_label(hr_t, prev, i)
        pred = branches[i](branch_inputs(branches, i) if i else lr_t)
        fn = get_loss(loss_name)
        return fn(pred, label).data.item(), fn(Tensor(np.zeros_like(label.data)), label).data.item()
