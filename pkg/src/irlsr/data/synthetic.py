"""Procedural toy HR images: smooth backgrounds, anti-aliased shapes,
oriented gratings and band-limited texture."""
from __future__ import annotations

from pathlib import Path

import numpy as np
from scipy.ndimage import gaussian_filter, zoom

from .io import save_png


def make_toy_image(seed: int, size: int = 96) -> np.ndarray:
    rng = np.random.default_rng([seed, 7919])
    ss = 3  # supersampling for anti-aliased edges
    n = size * ss
    yy, xx = np.mgrid[0:n, 0:n] / n
    img = np.empty((n, n, 3))
    c0, c1 = rng.uniform(30, 225, 3), rng.uniform(30, 225, 3)
    ang = rng.uniform(0, np.pi)
    t = np.cos(ang) * xx + np.sin(ang) * yy
    img[:] = c0 + (c1 - c0) * ((t - t.min()) / (np.ptp(t) + 1e-9))[..., None]

    for _ in range(rng.integers(3, 7)):
        kind = rng.integers(0, 3)
        color = rng.uniform(0, 255, 3)
        cy, cx = rng.uniform(0.1, 0.9, 2)
        if kind == 0:
            ry, rx = rng.uniform(0.05, 0.3, 2)
            mask = ((yy - cy) / ry) ** 2 + ((xx - cx) / rx) ** 2 <= 1
        elif kind == 1:
            hy, hx = rng.uniform(0.05, 0.25, 2)
            th = rng.uniform(0, np.pi)
            u = np.cos(th) * (xx - cx) + np.sin(th) * (yy - cy)
            v = -np.sin(th) * (xx - cx) + np.cos(th) * (yy - cy)
            mask = (np.abs(u) <= hx) & (np.abs(v) <= hy)
        else:
            r = rng.uniform(0.1, 0.3)
            freq = rng.uniform(8, 30)
            th = rng.uniform(0, np.pi)
            u = np.cos(th) * xx + np.sin(th) * yy
            stripes = np.sin(2 * np.pi * freq * u) > 0
            mask = stripes & (((yy - cy) ** 2 + (xx - cx) ** 2) <= r * r)
        img[mask] = color

    small = img.reshape(size, ss, size, ss, 3).mean(axis=(1, 3))
    noise = gaussian_filter(rng.standard_normal((size // 4 + 1, size // 4 + 1)), 0.7)
    texture = zoom(noise, size / noise.shape[0], order=3)[:size, :size]
    small += rng.uniform(4, 12) * texture[..., None]
    return np.clip(small, 0, 255).astype(np.float32)


def write_toy_dataset(directory, count: int = 24, size: int = 96, seed: int = 0) -> list:
    """Write ``count`` PNGs named ``toy_000.png`` ... and return their paths."""
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for i in range(count):
        p = out / f"toy_{i:03d}.png"
        save_png(make_toy_image(seed * 100003 + i, size), p)
        paths.append(p)
    return paths
