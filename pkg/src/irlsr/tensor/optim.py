"""Bias-corrected Adam."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .tensor import Tensor


@dataclass
class AdamState:
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)
    t: int = 0

    @classmethod
    def zeros_like(cls, params: Sequence[np.ndarray]) -> "AdamState":
        return cls([np.zeros_like(p) for p in params], [np.zeros_like(p) for p in params], 0)


def adam_step(params, grads, state: AdamState, lr: float = 1e-4, beta1: float = 0.9,
              beta2: float = 0.99, eps: float = 1e-8) -> None:
    """Update ``params`` (numpy arrays) in place from ``grads``.

    A ``None`` gradient is treated as zero. Moments are created lazily on a
    fresh state.
    """
    if not state.m:
        state.m = [np.zeros_like(p) for p in params]
        state.v = [np.zeros_like(p) for p in params]
    if len(state.m) != len(params) or len(grads) != len(params):
        raise ValueError("params, grads and optimizer state are misaligned")
    state.t += 1
    t = state.t
    bc1 = 1.0 - beta1 ** t
    bc2 = 1.0 - beta2 ** t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if m.shape != p.shape:
            raise ValueError(f"moment shape {m.shape} does not match parameter {p.shape}")
        if g is None:
            g = np.zeros_like(p)
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * np.square(g)
        m_hat = m / bc1
        v_hat = v / bc2
        p -= (lr * m_hat / (np.sqrt(v_hat) + eps)).astype(p.dtype, copy=False)


class Adam:
    """Adam over a list of trainable tensors, reading ``.grad``."""

    def __init__(self, params: Sequence[Tensor], lr: float = 1e-4, betas=(0.9, 0.99),
                 eps: float = 1e-8, state: AdamState | None = None):
        self.params = list(params)
        for p in self.params:
            if not p.requires_grad:
                raise ValueError(f"parameter {p.name or p.shape} is frozen")
        self.lr = lr
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.state = state if state is not None else AdamState.zeros_like([p.data for p in self.params])

    def step(self) -> None:
        adam_step([p.data for p in self.params], [p.grad for p in self.params], self.state,
                  self.lr, self.beta1, self.beta2, self.eps)

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad = None
