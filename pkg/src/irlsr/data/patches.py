"""Aligned LR/HR patch sampling with 8-way flip/rotate augmentation."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .resize import degrade, mod_crop


@dataclass
class PatchPair:
    lr_patch: np.ndarray
    hr_patch: np.ndarray
    image_id: str
    top: int
    left: int
    aug: int = 0


def augment(img: np.ndarray, code: int) -> np.ndarray:
    """Dihedral transform ``code`` in 0..7: ``code % 4`` quarter turns, then a
    horizontal flip when ``code >= 4``."""
    out = np.rot90(img, code % 4, axes=(0, 1))
    if code >= 4:
        out = out[:, ::-1]
    return np.ascontiguousarray(out)


def _draw(hr, lr, scale, patch, rng, use_aug, image_id):
    lh, lw = lr.shape[:2]
    top = int(rng.integers(0, lh - patch + 1))
    left = int(rng.integers(0, lw - patch + 1))
    code = int(rng.integers(0, 8)) if use_aug else 0
    lr_p = lr[top:top + patch, left:left + patch]
    hs, ws, hp = scale * top, scale * left, scale * patch
    hr_p = hr[hs:hs + hp, ws:ws + hp]
    return PatchPair(augment(lr_p, code), augment(hr_p, code), image_id, top, left, code)


def sample_patches(hr: np.ndarray, scale: int, patch: int, count: int, rng_seed,
                   augment_patches: bool = False, lr: np.ndarray | None = None,
                   image_id: str = "") -> list:
    """Draw ``count`` aligned pairs; the HR window starts at ``scale * (top, left)``."""
    hr = mod_crop(hr, scale)
    if lr is None:
        lr = degrade(hr, scale)
    if lr.shape[0] < patch or lr.shape[1] < patch:
        raise ValueError(f"LR image {lr.shape[:2]} smaller than patch {patch}")
    rng = np.random.default_rng(rng_seed)
    return [_draw(hr, lr, scale, patch, rng, augment_patches, image_id) for _ in range(count)]


class PatchSampler:
    """Random training batches over a list of :class:`~irlsr.data.dataset.ImagePair`."""

    def __init__(self, pairs, scale: int, patch: int, rng: np.random.Generator,
                 augment_patches: bool = True):
        if not pairs:
            raise ValueError("no training images")
        for p in pairs:
            if min(p.lr.shape[:2]) < patch:
                raise ValueError(f"image {p.name} LR {p.lr.shape[:2]} smaller than patch {patch}")
        self.pairs = pairs
        self.scale = scale
        self.patch = patch
        self.rng = rng
        self.augment = augment_patches

    def batch(self, size: int):
        """``(lr, hr)`` float32 arrays shaped ``(n, 3, h, w)`` scaled to [0, 1]."""
        items = []
        for _ in range(size):
            pair = self.pairs[int(self.rng.integers(0, len(self.pairs)))]
            items.append(_draw(pair.hr, pair.lr, self.scale, self.patch, self.rng,
                               self.augment, pair.name))
        lr = np.stack([it.lr_patch for it in items]).transpose(0, 3, 1, 2) / 255.0
        hr = np.stack([it.hr_patch for it in items]).transpose(0, 3, 1, 2) / 255.0
        return np.ascontiguousarray(lr, np.float32), np.ascontiguousarray(hr, np.float32)
