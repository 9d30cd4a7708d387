"""PSNR / SSIM and the luma-with-shaved-border evaluation protocol."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import correlate1d

from .color import rgb_to_y

PSNR_CAP = 99.0


def _shave(img: np.ndarray, shave: int) -> np.ndarray:
    if shave <= 0:
        return img
    return img[shave:-shave, shave:-shave]


def psnr(a: np.ndarray, b: np.ndarray, shave: int = 0, peak: float = 255.0,
         cap: float = PSNR_CAP) -> float:
    """Peak signal-to-noise ratio in dB; ``cap`` when the images are identical."""
    a = _shave(np.asarray(a, dtype=np.float64), shave)
    b = _shave(np.asarray(b, dtype=np.float64), shave)
    if a.shape != b.shape:
        raise ValueError(f"psnr: dimension mismatch {a.shape} vs {b.shape}")
    if a.size == 0:
        raise ValueError("psnr: nothing left after shaving")
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return cap
    return float(10.0 * np.log10(peak * peak / mse))


def gaussian_window(size: int = 11, sigma: float = 1.5) -> np.ndarray:
    x = np.arange(size, dtype=np.float64) - (size - 1) / 2
    g = np.exp(-(x * x) / (2 * sigma * sigma))
    return g / g.sum()


def ssim(a: np.ndarray, b: np.ndarray, shave: int = 0, peak: float = 255.0,
         size: int = 11, sigma: float = 1.5) -> float:
    """Mean SSIM over every fully contained ``size x size`` Gaussian window.

    Single-channel inputs; multi-channel inputs are averaged per channel.
    """
    a = _shave(np.asarray(a, dtype=np.float64), shave)
    b = _shave(np.asarray(b, dtype=np.float64), shave)
    if a.shape != b.shape:
        raise ValueError(f"ssim: dimension mismatch {a.shape} vs {b.shape}")
    if a.ndim == 3:
        return float(np.mean([ssim(a[..., c], b[..., c], 0, peak, size, sigma)
                              for c in range(a.shape[2])]))
    if min(a.shape) < size:
        raise ValueError(f"ssim: image {a.shape} smaller than the {size}x{size} window")
    c1 = (0.01 * peak) ** 2
    c2 = (0.03 * peak) ** 2
    g = gaussian_window(size, sigma)
    half = size // 2

    def blur(x):
        y = correlate1d(correlate1d(x, g, axis=0, mode="constant"), g, axis=1, mode="constant")
        return y[half:x.shape[0] - half, half:x.shape[1] - half]

    mu_a, mu_b = blur(a), blur(b)
    var_a = blur(a * a) - mu_a ** 2
    var_b = blur(b * b) - mu_b ** 2
    cov = blur(a * b) - mu_a * mu_b
    num = (2 * mu_a * mu_b + c1) * (2 * cov + c2)
    den = (mu_a ** 2 + mu_b ** 2 + c1) * (var_a + var_b + c2)
    return float(np.mean(num / den))


@dataclass(frozen=True)
class EvalProtocol:
    """Metrics on luma with a ``shave``-pixel border dropped from both images."""

    shave: int
    cap: float = PSNR_CAP

    @classmethod
    def for_scale(cls, scale: int) -> "EvalProtocol":
        return cls(shave=scale)

    def luma(self, img: np.ndarray) -> np.ndarray:
        img = np.clip(np.asarray(img, dtype=np.float64), 0.0, 255.0)
        return rgb_to_y(img) if img.ndim == 3 else img

    def psnr(self, sr: np.ndarray, hr: np.ndarray) -> float:
        return psnr(self.luma(sr), self.luma(hr), self.shave, cap=self.cap)

    def ssim(self, sr: np.ndarray, hr: np.ndarray) -> float:
        return ssim(self.luma(sr), self.luma(hr), self.shave)
