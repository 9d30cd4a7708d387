"""8-bit PNG reading and writing."""
from __future__ import annotations

import os

import numpy as np
from PIL import Image

PNG_SIGNATURE = b"\x89PNG\r\n\x1a\n"


class ImageIOError(OSError):
    """Image file missing, not a PNG, or in an unsupported pixel format."""


def is_png(path) -> bool:
    try:
        with open(path, "rb") as fh:
            return fh.read(8) == PNG_SIGNATURE
    except OSError:
        return False


def load_png(path) -> np.ndarray:
    """Read an 8-bit RGB or grayscale PNG as float32 ``(h, w, 3)`` in [0, 255].

    Grayscale is replicated to three channels. 16-bit images, alpha channels
    and palettes with transparency are rejected.
    """
    path = os.fspath(path)
    if not os.path.exists(path):
        raise ImageIOError(f"no such image: {path}")
    if not is_png(path):
        raise ImageIOError(f"not a PNG file: {path}")
    try:
        with Image.open(path) as im:
            im.load()
            mode = im.mode
            if mode in ("I;16", "I;16B", "I;16L", "I", "F"):
                raise ImageIOError(f"{path}: 16-bit / non-8-bit samples are not supported ({mode})")
            if mode == "P":
                if "transparency" in im.info:
                    raise ImageIOError(f"{path}: palette image with alpha is not supported")
                im = im.convert("RGB")
            elif mode in ("RGBA", "LA", "PA"):
                raise ImageIOError(f"{path}: images with an alpha channel are not supported")
            elif mode in ("1", "L"):
                im = im.convert("L")
            elif mode != "RGB":
                raise ImageIOError(f"{path}: unsupported PNG mode {mode}")
            arr = np.asarray(im, dtype=np.uint8)
    except ImageIOError:
        raise
    except Exception as exc:  # Pillow raises a zoo of types for damaged files
        raise ImageIOError(f"{path}: cannot decode PNG ({exc})") from exc
    if arr.ndim == 2:
        arr = np.repeat(arr[:, :, None], 3, axis=2)
    return arr.astype(np.float32)


def to_uint8(img: np.ndarray) -> np.ndarray:
    """Clamp to [0, 255] and round half away from zero."""
    clipped = np.clip(np.asarray(img, dtype=np.float64), 0.0, 255.0)
    return np.floor(clipped + 0.5).astype(np.uint8)


def save_png(img: np.ndarray, path) -> None:
    arr = to_uint8(img)
    if arr.ndim == 3 and arr.shape[2] == 1:
        arr = arr[:, :, 0]
    if arr.ndim not in (2, 3) or (arr.ndim == 3 and arr.shape[2] != 3):
        raise ImageIOError(f"cannot save array of shape {arr.shape} as PNG")
    try:
        Image.fromarray(arr).save(os.fspath(path), format="PNG")
    except OSError as exc:
        raise ImageIOError(f"cannot write {path}: {exc}") from exc
