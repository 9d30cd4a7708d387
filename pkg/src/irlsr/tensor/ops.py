"""Differentiable ops: convolution, activation, arithmetic, channel concat,
sub-pixel shuffle and the pixel losses."""
from __future__ import annotations

from typing import Sequence

import numpy as np

from . import backend
from .tensor import Tensor, make_result


class ShapeError(ValueError):
    """Operand shapes violate an op's precondition."""


def conv2d(x: Tensor, weight: Tensor, bias: Tensor | None = None, padding: int = 0) -> Tensor:
    """Stride-1 2-d cross-correlation with zero padding.

    ``x`` is ``(n, ci, h, w)``, ``weight`` is ``(co, ci, k, k)`` and ``bias``
    is ``(co,)``. The output is ``(n, co, h + 2p - k + 1, w + 2p - k + 1)``.
    """
    if x.data.ndim != 4 or weight.data.ndim != 4:
        raise ShapeError("conv2d expects a rank-4 input and a rank-4 weight")
    n, ci, h, w = x.shape
    co, wci, kh, kw = weight.shape
    if kh != kw:
        raise ShapeError(f"only square kernels are supported, got {kh}x{kw}")
    if wci != ci:
        raise ShapeError(f"channel mismatch: input has {ci}, weight expects {wci}")
    if padding < 0:
        raise ShapeError("padding must be non-negative")
    if bias is not None and bias.shape != (co,):
        raise ShapeError(f"bias shape {bias.shape} does not match {co} output channels")
    k, p = kh, padding
    hp, wp = h + 2 * p, w + 2 * p
    if k > hp or k > wp:
        raise ShapeError(f"kernel {k} larger than padded input {hp}x{wp}")
    ho, wo = hp - k + 1, wp - k + 1
    dtype = np.result_type(x.data, weight.data)

    xp = np.zeros((n, ci, hp, wp), dtype=dtype)
    xp[:, :, p:p + h, p:p + w] = x.data
    cols = np.empty((n, ci * k * k, ho * wo), dtype=dtype)
    backend.im2col(xp, k, cols)
    w2 = weight.data.reshape(co, ci * k * k).astype(dtype, copy=False)
    out = np.matmul(w2, cols)
    if bias is not None:
        out += bias.data.astype(dtype, copy=False)[None, :, None]
    out = out.reshape(n, co, ho, wo)

    def _backward(g):
        g2 = g.reshape(n, co, ho * wo)
        gx = gw = gb = None
        if x.requires_grad:
            if co < ci:
                gx = _conv_input_grad_transposed(g, weight.data.astype(dtype, copy=False), p, h, w)
            else:
                dcols = np.matmul(np.ascontiguousarray(w2.T), g2)
                dxp = np.zeros((n, ci, hp, wp), dtype=dtype)
                backend.col2im(dcols, k, dxp)
                gx = dxp[:, :, p:p + h, p:p + w]
        if weight.requires_grad:
            gw = np.matmul(g2, cols.transpose(0, 2, 1)).sum(axis=0).reshape(weight.shape)
        if bias is not None and bias.requires_grad:
            gb = g2.sum(axis=(0, 2))
        return (gx, gw, gb) if bias is not None else (gx, gw)

    inputs = (x, weight, bias) if bias is not None else (x, weight)
    return make_result(out, inputs, _backward)


def _conv_input_grad_transposed(g, wt, p, h, w):
    """Input gradient as a full correlation of ``g`` with the flipped kernel.

    Cheaper than the scatter path when the layer has fewer output than input
    channels, since the gathered buffer scales with ``co`` instead of ``ci``.
    """
    n, co, ho, wo = g.shape
    _, ci, k, _ = wt.shape
    q = k - 1
    gp = np.zeros((n, co, ho + 2 * q, wo + 2 * q), dtype=g.dtype)
    gp[:, :, q:q + ho, q:q + wo] = g
    fh, fw = ho + q, wo + q  # = padded input extent
    cols = np.empty((n, co * k * k, fh * fw), dtype=g.dtype)
    backend.im2col(gp, k, cols)
    wf = np.ascontiguousarray(wt[:, :, ::-1, ::-1].transpose(1, 0, 2, 3)).reshape(ci, co * k * k)
    full = np.matmul(wf, cols).reshape(n, ci, fh, fw)
    return full[:, :, p:p + h, p:p + w]


def relu(x: Tensor) -> Tensor:
    mask = x.data > 0
    out = np.where(mask, x.data, 0).astype(x.dtype, copy=False)
    return make_result(out, (x,), lambda g: (g * mask,))


def add(a: Tensor, b: Tensor) -> Tensor:
    if a.shape != b.shape:
        raise ShapeError(f"add: shape mismatch {a.shape} vs {b.shape}")
    return make_result(a.data + b.data, (a, b), lambda g: (g, g))


def scale(a: Tensor, s: float) -> Tensor:
    s = float(s)
    return make_result(a.data * a.dtype.type(s), (a,), lambda g: (g * g.dtype.type(s),))


def sum_all(parts: Sequence[Tensor]) -> Tensor:
    """Elementwise sum of one or more equally shaped tensors."""
    if not parts:
        raise ShapeError("sum of an empty list")
    out = parts[0]
    for p in parts[1:]:
        out = add(out, p)
    return out


def concat_channels(parts: Sequence[Tensor]) -> Tensor:
    if not parts:
        raise ShapeError("concat of an empty list")
    n, _, h, w = parts[0].shape
    for t in parts[1:]:
        if t.data.ndim != 4 or (t.shape[0], t.shape[2], t.shape[3]) != (n, h, w):
            raise ShapeError(
                f"concat: batch/spatial mismatch {parts[0].shape} vs {t.shape}"
            )
    if len(parts) == 1:
        return parts[0]
    sizes = [t.shape[1] for t in parts]
    bounds = np.cumsum([0] + sizes)
    out = np.concatenate([t.data for t in parts], axis=1)

    def _backward(g):
        return tuple(g[:, bounds[i]:bounds[i + 1]] for i in range(len(parts)))

    return make_result(out, tuple(parts), _backward)


def _shuffle(a: np.ndarray, r: int) -> np.ndarray:
    n, c, h, w = a.shape
    oc = c // (r * r)
    return a.reshape(n, oc, r, r, h, w).transpose(0, 1, 4, 2, 5, 3).reshape(n, oc, h * r, w * r)


def _unshuffle(a: np.ndarray, r: int) -> np.ndarray:
    n, c, h, w = a.shape
    return (
        a.reshape(n, c, h // r, r, w // r, r)
        .transpose(0, 1, 3, 5, 2, 4)
        .reshape(n, c * r * r, h // r, w // r)
    )


def pixel_shuffle(x: Tensor, r: int) -> Tensor:
    """Rearrange ``(n, c*r*r, h, w)`` into ``(n, c, h*r, w*r)``.

    ``out[n, c, h*r + i, w*r + j] = in[n, c*r*r + i*r + j, h, w]``
    """
    if r < 1:
        raise ShapeError("upscale factor must be >= 1")
    if x.shape[1] % (r * r):
        raise ShapeError(f"channels {x.shape[1]} not divisible by r^2={r * r}")
    out = np.ascontiguousarray(_shuffle(x.data, r))
    return make_result(out, (x,), lambda g: (np.ascontiguousarray(_unshuffle(g, r)),))


def pixel_unshuffle(x: Tensor, r: int) -> Tensor:
    """Exact inverse permutation of :func:`pixel_shuffle`."""
    if x.shape[2] % r or x.shape[3] % r:
        raise ShapeError(f"spatial dims {x.shape[2:]} not divisible by {r}")
    out = np.ascontiguousarray(_unshuffle(x.data, r))
    return make_result(out, (x,), lambda g: (np.ascontiguousarray(_shuffle(g, r)),))


def mean(x: Tensor) -> Tensor:
    n = x.size
    out = np.asarray(x.data.mean(dtype=np.float64), dtype=x.dtype)
    return make_result(out, (x,), lambda g: (np.full(x.shape, g / n, dtype=x.dtype),))


def _check_pair(pred: Tensor, target: Tensor, name: str) -> None:
    if pred.shape != target.shape:
        raise ShapeError(f"{name}: shape mismatch {pred.shape} vs {target.shape}")


def l1_loss(pred: Tensor, target: Tensor) -> Tensor:
    """Mean absolute error; the target never receives a gradient."""
    _check_pair(pred, target, "l1_loss")
    d = pred.data - target.data
    n = d.size
    out = np.asarray(np.abs(d).mean(dtype=np.float64), dtype=pred.dtype)
    return make_result(out, (pred,), lambda g: (np.sign(d) * (g / n),))


def l2_loss(pred: Tensor, target: Tensor) -> Tensor:
    """Mean squared error; the target never receives a gradient."""
    _check_pair(pred, target, "l2_loss")
    d = pred.data - target.data
    n = d.size
    out = np.asarray(np.square(d).mean(dtype=np.float64), dtype=pred.dtype)
    return make_result(out, (pred,), lambda g: (d * (2 * g / n),))


LOSSES = {"L1": l1_loss, "L2": l2_loss}


def get_loss(name: str):
    try:
        return LOSSES[name.upper()]
    except KeyError:
        raise ValueError(f"unknown loss {name!r}; expected L1 or L2") from None
