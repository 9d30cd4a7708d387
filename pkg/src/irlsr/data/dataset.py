"""Directories of HR PNGs with bicubic LR counterparts."""
from __future__ import annotations

import os
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .io import ImageIOError, load_png, save_png
from .resize import degrade, mod_crop

_LR_SUFFIX = re.compile(r"_x\d+$")


@dataclass
class ImagePair:
    name: str
    hr: np.ndarray
    lr: np.ndarray


def list_hr_images(directory) -> list:
    directory = Path(directory)
    if not directory.is_dir():
        raise ImageIOError(f"dataset directory not found: {directory}")
    files = sorted(p for p in directory.iterdir()
                   if p.suffix.lower() == ".png" and not _LR_SUFFIX.search(p.stem))
    if not files:
        raise ImageIOError(f"no HR PNG images in {directory}")
    return files


def lr_cache_path(hr_path, scale: int) -> Path:
    p = Path(hr_path)
    return p.with_name(f"{p.stem}_x{scale}.png")


def load_pair(hr_path, scale: int, cache: bool = False) -> ImagePair:
    hr = mod_crop(load_png(hr_path), scale)
    cached = lr_cache_path(hr_path, scale)
    lr = None
    if cached.exists():
        lr = load_png(cached)
        if lr.shape[:2] != (hr.shape[0] // scale, hr.shape[1] // scale):
            lr = None
    if lr is None:
        lr = degrade(hr, scale)
        if cache:
            save_png(lr, cached)
    return ImagePair(Path(hr_path).stem, hr, lr)


def load_dataset(directory, scale: int, cache: bool = False, limit: int | None = None) -> list:
    files = list_hr_images(directory)
    if limit is not None:
        files = files[:limit]
    return [load_pair(f, scale, cache) for f in files]


def split_dataset(pairs: list, n_val: int):
    """First images train, the last ``n_val`` validate."""
    if n_val <= 0 or n_val >= len(pairs):
        raise ValueError(f"cannot hold out {n_val} of {len(pairs)} images")
    return pairs[:-n_val], pairs[-n_val:]


def write_images(directory, images: dict) -> None:
    os.makedirs(directory, exist_ok=True)
    for name, img in images.items():
        save_png(img, Path(directory) / f"{name}.png")
