"""Separable bicubic resampling with the Keys kernel (a = -0.5)."""
from __future__ import annotations

from fractions import Fraction

import numpy as np

SUPPORTED = {Fraction(1, 2), Fraction(1, 3), Fraction(1, 4), Fraction(2), Fraction(3), Fraction(4)}


def keys_kernel(x: np.ndarray, a: float = -0.5) -> np.ndarray:
    x = np.abs(np.asarray(x, dtype=np.float64))
    x2, x3 = x * x, x * x * x
    near = (a + 2) * x3 - (a + 3) * x2 + 1
    far = a * x3 - 5 * a * x2 + 8 * a * x - 4 * a
    return np.where(x <= 1, near, np.where(x < 2, far, 0.0))


def resize_weights(in_len: int, out_len: int, factor: float):
    """Per-output-sample source indices and normalised weights for one axis.

    Output sample ``i`` sits at input coordinate ``(i + 0.5) / factor - 0.5``.
    When shrinking, the kernel is stretched by ``1 / factor`` so it also acts
    as the anti-aliasing filter. Indices outside the input are clamped to the
    border.
    """
    stretch = 1.0 / factor if factor < 1 else 1.0
    width = 4.0 * stretch
    centers = (np.arange(out_len) + 0.5) / factor - 0.5
    left = np.floor(centers - width / 2).astype(np.int64) + 1
    taps = int(np.ceil(width)) + 1
    idx = left[:, None] + np.arange(taps)[None, :]
    w = keys_kernel((centers[:, None] - idx) / stretch) / stretch
    w /= w.sum(axis=1, keepdims=True)
    return np.clip(idx, 0, in_len - 1), w


def resize_matrix(in_len: int, out_len: int, factor: float) -> np.ndarray:
    idx, w = resize_weights(in_len, out_len, factor)
    m = np.zeros((out_len, in_len))
    rows = np.repeat(np.arange(out_len), idx.shape[1])
    np.add.at(m, (rows, idx.ravel()), w.ravel())
    return m


def output_size(n: int, factor: Fraction) -> int:
    return int(np.ceil(n * factor))


def bicubic_resize(img: np.ndarray, factor) -> np.ndarray:
    """Resize an ``(h, w)`` or ``(h, w, c)`` float image by ``factor``.

    ``factor`` may be an int, float or :class:`fractions.Fraction`; it must be
    one of 1/2, 1/3, 1/4, 2, 3 or 4.
    """
    f = Fraction(factor).limit_denominator(8)
    if f not in SUPPORTED:
        raise ValueError(f"unsupported resize factor {factor}")
    img = np.asarray(img, dtype=np.float64)
    h, w = img.shape[:2]
    oh, ow = output_size(h, f), output_size(w, f)
    if oh < 1 or ow < 1:
        raise ValueError(f"degenerate output size {oh}x{ow} for {h}x{w} at factor {f}")
    mh = resize_matrix(h, oh, float(f))
    mw = resize_matrix(w, ow, float(f))
    out = np.tensordot(mh, img, axes=(1, 0))
    out = np.moveaxis(np.tensordot(mw, out, axes=(1, 1)), 0, 1)
    return out.astype(np.float32)


def mod_crop(img: np.ndarray, scale: int) -> np.ndarray:
    """Trim so both spatial dims are multiples of ``scale``."""
    h, w = img.shape[:2]
    return img[: h - h % scale, : w - w % scale]


def degrade(hr: np.ndarray, scale: int) -> np.ndarray:
    """LR counterpart of a (mod-cropped) HR image, quantised to 8 bits."""
    lr = bicubic_resize(mod_crop(hr, scale), Fraction(1, scale))
    return np.floor(np.clip(lr, 0, 255) + 0.5).astype(np.float32)
