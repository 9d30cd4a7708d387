"""Small dense tensor engine with reverse-mode differentiation and Adam."""
from . import backend
from .ops import (
    ShapeError,
    add,
    concat_channels,
    conv2d,
    get_loss,
    l1_loss,
    l2_loss,
    mean,
    pixel_shuffle,
    pixel_unshuffle,
    relu,
    scale,
    sum_all,
)
from .optim import Adam, AdamState, adam_step
from .tensor import Tape, Tensor, backward, current_tape, is_grad_enabled, no_grad

__all__ = [
    "Adam", "AdamState", "ShapeError", "Tape", "Tensor", "adam_step", "add", "backend",
    "backward", "concat_channels", "conv2d", "current_tape", "get_loss", "is_grad_enabled",
    "l1_loss", "l2_loss", "mean", "no_grad", "pixel_shuffle", "pixel_unshuffle", "relu",
    "scale", "sum_all",
]
