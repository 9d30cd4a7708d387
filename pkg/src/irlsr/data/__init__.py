"""Image I/O, bicubic degradation, patch sampling and quality metrics."""
from .color import rgb_to_y
from .dataset import ImagePair, load_dataset, load_pair, split_dataset
from .io import ImageIOError, load_png, save_png, to_uint8
from .metrics import PSNR_CAP, EvalProtocol, psnr, ssim
from .patches import PatchPair, PatchSampler, augment, sample_patches
from .resize import bicubic_resize, degrade, keys_kernel, mod_crop
from .synthetic import make_toy_image, write_toy_dataset

__all__ = [
    "EvalProtocol", "ImageIOError", "ImagePair", "PSNR_CAP", "PatchPair", "PatchSampler",
    "augment", "bicubic_resize", "degrade", "keys_kernel", "load_dataset", "load_pair",
    "load_png", "make_toy_image", "mod_crop", "psnr", "rgb_to_y", "sample_patches",
    "save_png", "split_dataset", "ssim", "to_uint8", "write_toy_dataset",
]
