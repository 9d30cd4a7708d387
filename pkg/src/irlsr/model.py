"""Master and residual branches for incremental residual learning.

A master branch maps the LR image to a full-resolution prediction and exposes
the feature maps produced along its upsampling tail. Each residual branch ``i``
reads the features every earlier branch produced at one resolution level,
concatenated along channels, and predicts what the branches before it still
get wrong. Predictions are summed at inference time.

Resolution levels: level 0 is LR resolution and each ``x2`` upsampling stage
adds one level. At scale 3 there is a single ``x3`` stage, so level 1 means
``x3``. The "up" variant of branch ``i`` reads level ``i`` (post-upsample
features); the "down" variant reads level ``i - 1`` and performs one extra
upsampling stage itself.
"""
from __future__ import annotations

import hashlib
from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .tensor import Tensor, add, concat_channels, conv2d, no_grad, pixel_shuffle, relu, scale, sum_all

SCALES = (2, 3, 4)
VARIANTS = ("up", "down")
LOSS_NAMES = ("L1", "L2")


class ConfigError(ValueError):
    """A model description breaks one of the structural rules."""


class WiringError(ValueError):
    """Branch inputs cannot be assembled from the available feature maps."""


def num_residual_branches(scale: int) -> int:
    if scale not in SCALES:
        raise ConfigError(f"scale must be one of {SCALES}, got {scale}")
    return 2 if scale == 4 else 1


def num_levels(scale: int) -> int:
    """Number of upsampling stages the master uses to reach ``scale``."""
    if scale not in SCALES:
        raise ConfigError(f"scale must be one of {SCALES}, got {scale}")
    return {2: 1, 3: 1, 4: 2}[scale]


def stage_factor(scale: int) -> int:
    return 3 if scale == 3 else 2


def level_factor(scale: int, level: int) -> int:
    """Spatial magnification of a feature map at ``level`` relative to LR."""
    return stage_factor(scale) ** level


def halved_blocks(n_blocks: int, i: int) -> int:
    for _ in range(i):
        n_blocks = max(1, n_blocks // 2)
    return n_blocks


def tap_sources(i: int) -> list:
    """Declared inputs of branch ``i``: ``[(0, i), (1, i - 1), ..., (i - 1, 1)]``."""
    return [(j, i - j) for j in range(i)]


@dataclass
class BranchSpec:
    index: int
    n_blocks: int
    n_feats: int
    loss: str = "L1"
    variant: str = "up"
    input_taps: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "index": self.index, "n_blocks": self.n_blocks, "n_feats": self.n_feats,
            "loss": self.loss, "variant": self.variant,
            "input_taps": [list(t) for t in self.input_taps],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "BranchSpec":
        return cls(d["index"], d["n_blocks"], d["n_feats"], d["loss"], d["variant"],
                   [tuple(t) for t in d["input_taps"]])


@dataclass
class ModelConfig:
    scale: int
    branches: list
    res_scale: float = 1.0

    @classmethod
    def default(cls, scale: int = 4, n_blocks: int = 4, n_feats: int = 16, variant: str = "up",
                master_loss: str = "L1", residual_loss: str = "L2",
                res_scale: float = 1.0) -> "ModelConfig":
        specs = [BranchSpec(0, n_blocks, n_feats, master_loss, "up", [])]
        for i in range(1, num_residual_branches(scale) + 1):
            specs.append(BranchSpec(i, halved_blocks(n_blocks, i), n_feats, residual_loss,
                                    variant, tap_sources(i)))
        cfg = cls(scale, specs, res_scale)
        cfg.validate()
        return cfg

    @property
    def n_residual(self) -> int:
        return len(self.branches) - 1

    def validate(self) -> None:
        n = num_residual_branches(self.scale)
        if len(self.branches) != n + 1:
            raise ConfigError(
                f"scale x{self.scale} uses {n} residual branch(es); got {len(self.branches) - 1}"
            )
        for i, spec in enumerate(self.branches):
            if spec.index != i:
                raise ConfigError(f"branch specs must be indexed 0..{n}, found {spec.index} at {i}")
            if spec.loss not in LOSS_NAMES:
                raise ConfigError(f"branch {i}: loss must be L1 or L2, got {spec.loss!r}")
            if spec.variant not in VARIANTS:
                raise ConfigError(f"branch {i}: variant must be up or down, got {spec.variant!r}")
            if spec.n_feats < 1 or spec.n_blocks < 1:
                raise ConfigError(f"branch {i}: n_feats and n_blocks must be positive")
            if [tuple(t) for t in spec.input_taps] != tap_sources(i):
                raise ConfigError(f"branch {i}: input taps must be {tap_sources(i)}")
            if i > 0:
                expected = max(1, self.branches[i - 1].n_blocks // 2)
                if spec.n_blocks != expected:
                    raise ConfigError(
                        f"branch {i}: n_blocks must halve the previous branch ({expected})"
                    )

    def to_dict(self) -> dict:
        return {"scale": self.scale, "res_scale": self.res_scale,
                "branches": [b.to_dict() for b in self.branches]}

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        cfg = cls(d["scale"], [BranchSpec.from_dict(b) for b in d["branches"]], d["res_scale"])
        cfg.validate()
        return cfg


def _conv_params(rng: np.random.Generator, cin: int, cout: int, k: int = 3, zero: bool = False):
    """Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weight and bias."""
    if zero:
        return np.zeros((cout, cin, k, k), np.float32), np.zeros(cout, np.float32)
    bound = 1.0 / np.sqrt(cin * k * k)
    w = rng.uniform(-bound, bound, size=(cout, cin, k, k)).astype(np.float32)
    b = rng.uniform(-bound, bound, size=cout).astype(np.float32)
    return w, b


class Branch:
    """One network of the stack (master when ``spec.index == 0``).

    After each forward call ``features`` maps resolution level to the feature
    map the branch produced there (its body output at the input level, then
    the output of every upsampling stage) and ``taps`` maps stage number
    ``k >= 1`` to the output of its k-th upsampling stage.
    """

    def __init__(self, spec: BranchSpec, scale: int, in_channels: int, in_level: int,
                 res_scale: float, rng: np.random.Generator, zero_output: bool):
        self.spec = spec
        self.scale = scale
        self.in_channels = in_channels
        self.in_level = in_level
        self.res_scale = res_scale
        self.frozen = False
        self.params: "OrderedDict[str, Tensor]" = OrderedDict()
        self.features: dict = {}
        self.taps: dict = {}

        f = spec.n_feats
        self._add_conv("head", rng, in_channels, f)
        for b in range(spec.n_blocks):
            self._add_conv(f"block{b}.conv1", rng, f, f)
            self._add_conv(f"block{b}.conv2", rng, f, f)
        self._add_conv("body_end", rng, f, f)
        r = stage_factor(scale)
        self.n_stages = num_levels(scale) - in_level
        for k in range(1, self.n_stages + 1):
            self._add_conv(f"up{k}", rng, f, f * r * r)
        self._add_conv("out", rng, f, 3, zero=zero_output)

    def _add_conv(self, name: str, rng, cin: int, cout: int, zero: bool = False) -> None:
        w, b = _conv_params(rng, cin, cout, zero=zero)
        self.params[f"{name}.weight"] = Tensor(w, requires_grad=True, name=f"{name}.weight")
        self.params[f"{name}.bias"] = Tensor(b, requires_grad=True, name=f"{name}.bias")

    def _conv(self, name: str, x: Tensor) -> Tensor:
        return conv2d(x, self.params[f"{name}.weight"], self.params[f"{name}.bias"], padding=1)

    @property
    def is_master(self) -> bool:
        return self.spec.index == 0

    def trainable(self) -> list:
        return [p for p in self.params.values() if p.requires_grad]

    def n_params(self) -> int:
        return sum(p.size for p in self.params.values())

    def __call__(self, x: Tensor) -> Tensor:
        if x.shape[1] != self.in_channels:
            raise WiringError(
                f"branch {self.spec.index} expects {self.in_channels} input channels, got {x.shape[1]}"
            )
        h = self._conv("head", x)
        res = h
        for b in range(self.spec.n_blocks):
            t = relu(self._conv(f"block{b}.conv1", res))
            t = self._conv(f"block{b}.conv2", t)
            if self.res_scale != 1.0:
                t = scale(t, self.res_scale)
            res = add(res, t)
        feat = add(self._conv("body_end", res), h)
        self.features = {self.in_level: feat}
        self.taps = {}
        r = stage_factor(self.scale)
        for k in range(1, self.n_stages + 1):
            feat = pixel_shuffle(self._conv(f"up{k}", feat), r)
            self.features[self.in_level + k] = feat
            self.taps[k] = feat
        return self._conv("out", feat)


def input_level(cfg: ModelConfig, i: int) -> int:
    if i == 0:
        return 0
    return i if cfg.branches[i].variant == "up" else i - 1


def build_master(cfg: ModelConfig, seed: int = 0, zero_output: bool = False) -> Branch:
    """EDSR-baseline-shaped master: head, residual blocks, body skip,
    upsampling tail and a 3-channel output conv."""
    cfg.validate()
    spec = cfg.branches[0]
    rng = np.random.default_rng([seed, 0])
    return Branch(spec, cfg.scale, 3, 0, cfg.res_scale, rng, zero_output=zero_output)


def build_residual_branch(cfg: ModelConfig, i: int, seed: int = 0) -> Branch:
    """Residual branch ``i`` with a zero-initialised output conv, so a new
    branch starts out predicting exactly zero."""
    cfg.validate()
    if not 1 <= i <= cfg.n_residual:
        raise ConfigError(f"residual branch index must be in 1..{cfg.n_residual}, got {i}")
    spec = cfg.branches[i]
    in_channels = sum(cfg.branches[j].n_feats for j, _ in spec.input_taps)
    rng = np.random.default_rng([seed, i])
    return Branch(spec, cfg.scale, in_channels, input_level(cfg, i), cfg.res_scale, rng,
                  zero_output=True)


def build_stack(cfg: ModelConfig, n_branches: int, seed: int = 0) -> list:
    branches = [build_master(cfg, seed)]
    for i in range(1, n_branches):
        branches.append(build_residual_branch(cfg, i, seed))
    return branches


def branch_inputs(branches: Sequence[Branch], i: int) -> Tensor:
    """Concatenate the level-matched features of branches ``0..i-1`` for branch ``i``."""
    target = branches[i]
    level = target.in_level
    parts = []
    for j, _ in target.spec.input_taps:
        if j >= len(branches) or j >= i:
            raise WiringError(f"branch {i} needs features of branch {j}, which has not run")
        feats = branches[j].features
        if level not in feats:
            raise WiringError(
                f"branch {j} exposes levels {sorted(feats)}, branch {i} needs level {level}"
            )
        parts.append(feats[level])
    return concat_channels(parts)


def forward(branches: Sequence[Branch], lr: Tensor, upto: int | None = None):
    """Run branches ``0..upto-1`` in order.

    Returns the list of predictions and, per branch, its tap registry.
    """
    if lr.data.ndim != 4 or lr.shape[1] != 3:
        raise WiringError(f"expected an (n, 3, h, w) LR batch, got {lr.shape}")
    if min(lr.shape[2:]) < 4:
        raise WiringError("LR spatial dims must be at least 4")
    upto = len(branches) if upto is None else upto
    preds = []
    for i in range(upto):
        x = lr if i == 0 else branch_inputs(branches, i)
        preds.append(branches[i](x))
    return preds, [dict(b.taps) for b in branches[:upto]]


def predict(branches: Sequence[Branch], lr: Tensor) -> list:
    """Inference-mode forward returning plain prediction arrays."""
    with no_grad():
        preds, _ = forward(branches, lr)
    return [p.data for p in preds]


def residual_label(hr: Tensor, preds: Sequence[Tensor], i: int) -> Tensor:
    """Training target of branch ``i``: ``hr`` for the master, otherwise ``hr``
    minus the summed predictions of branches ``0..i-1``. Never differentiable."""
    if i < 0:
        raise ValueError("branch index must be non-negative")
    if i == 0:
        return Tensor(hr.data, dtype=hr.dtype)
    if len(preds) < i:
        raise ValueError(f"label {i} needs {i} predictions, got {len(preds)}")
    for p in preds[:i]:
        if p.shape != hr.shape:
            raise ValueError(f"prediction shape {p.shape} does not match HR {hr.shape}")
    acc = preds[0].data
    for p in preds[1:i]:
        acc = acc + p.data
    return Tensor(hr.data - acc, dtype=hr.dtype)


def compose(preds: Sequence[Tensor]) -> Tensor:
    """Final output: elementwise sum of all branch predictions (no clipping)."""
    if not preds:
        raise ValueError("compose needs at least one prediction")
    return sum_all(list(preds))


def freeze(branch: Branch) -> None:
    for p in branch.params.values():
        p.requires_grad = False
        p.grad = None
    branch.frozen = True


def trainable_params(branches: Sequence[Branch]) -> list:
    return [p for b in branches for p in b.trainable()]


def param_digest(branches: Sequence[Branch] | Branch) -> str:
    """SHA-256 over names, shapes and raw bytes of the parameters."""
    if isinstance(branches, Branch):
        branches = [branches]
    h = hashlib.sha256()
    for b in branches:
        for name, p in b.params.items():
            h.update(f"{b.spec.index}/{name}{p.shape}".encode())
            h.update(p.data.tobytes())
    return h.hexdigest()


def receptive_radius(branches: Sequence[Branch]) -> int:
    """Conservative LR-pixel radius beyond which an output pixel cannot see."""
    total = 0.0
    for b in branches:
        lr_convs = 2 + 2 * b.spec.n_blocks
        radius = lr_convs / level_factor(b.scale, b.in_level)
        for k in range(1, b.n_stages + 1):
            radius += 1.0 / level_factor(b.scale, b.in_level + k - 1)
        radius += 1.0 / b.scale
        total = max(total, radius) if b.is_master else total + radius
    return int(np.ceil(total)) + 1
