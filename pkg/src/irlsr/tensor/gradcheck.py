"""Central finite-difference gradient checking in float64."""
from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .tensor import Tape, Tensor, make_result, no_grad


def _project(y: Tensor, weights: np.ndarray) -> Tensor:
    """Scalar ``sum(y * weights)`` with a constant weight array."""
    out = np.asarray(np.sum(y.data * weights), dtype=y.dtype)
    return make_result(out, (y,), lambda g: (g * weights,))


def numerical_grad(fn: Callable[..., Tensor], arrays: Sequence[np.ndarray], which: int,
                   weights: np.ndarray | None, delta: float = 1e-3) -> np.ndarray:
    """d/dx_which of ``sum(fn(*arrays) * weights)`` (or of the scalar output)."""
    arrays = [np.array(a, dtype=np.float64) for a in arrays]
    target = arrays[which]
    grad = np.zeros_like(target)
    flat = target.reshape(-1)
    gflat = grad.reshape(-1)

    def phi():
        with no_grad():
            out = fn(*[Tensor(a, dtype=np.float64) for a in arrays]).data
        return float(np.sum(out * weights)) if weights is not None else float(out.reshape(-1)[0])

    for idx in range(flat.size):
        orig = flat[idx]
        flat[idx] = orig + delta
        plus = phi()
        flat[idx] = orig - delta
        minus = phi()
        flat[idx] = orig
        gflat[idx] = (plus - minus) / (2 * delta)
    return grad


def analytic_grads(fn: Callable[..., Tensor], arrays: Sequence[np.ndarray],
                   weights: np.ndarray | None) -> list[np.ndarray]:
    tensors = [Tensor(a, requires_grad=True, dtype=np.float64) for a in arrays]
    with Tape() as tape:
        out = fn(*tensors)
        loss = _project(out, weights) if weights is not None else out
        tape.backward(loss)
    return [t.grad if t.grad is not None else np.zeros_like(t.data) for t in tensors]


def relative_error(a: np.ndarray, b: np.ndarray) -> float:
    denom = max(np.linalg.norm(a), np.linalg.norm(b))
    if denom == 0.0:
        return 0.0
    return float(np.linalg.norm(a - b) / denom)


def check_gradients(fn: Callable[..., Tensor], arrays: Sequence[np.ndarray], seed: int = 0,
                    delta: float = 1e-3) -> list[float]:
    """Relative error between analytic and central-difference gradients per input.

    Non-scalar outputs are reduced with a fixed random projection so every
    output element contributes.
    """
    with no_grad():
        probe = fn(*[Tensor(a, dtype=np.float64) for a in arrays])
    weights = None
    if probe.size != 1:
        weights = np.random.default_rng(seed).standard_normal(probe.shape)
    analytic = analytic_grads(fn, arrays, weights)
    return [
        relative_error(analytic[i], numerical_grad(fn, arrays, i, weights, delta))
        for i in range(len(arrays))
    ]
