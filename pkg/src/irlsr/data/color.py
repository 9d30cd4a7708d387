import numpy as np


def rgb_to_y(img: np.ndarray) -> np.ndarray:
    """BT.601 studio-swing luma from RGB in [0, 255]; result lies in [16, 235]."""
    img = np.asarray(img, dtype=np.float64)
    return 16.0 + (65.481 * img[..., 0] + 128.553 * img[..., 1] + 24.966 * img[..., 2]) / 255.0
