"""Pure-numpy versions of the convolution gather/scatter kernels."""
import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def im2col(xp, k, cols, num_threads=1):
    n, c, hp, wp = xp.shape
    ho, wo = hp - k + 1, wp - k + 1
    # windows: (n, c, ho, wo, k, k) -> (n, c, k, k, ho, wo)
    windows = sliding_window_view(xp, (k, k), axis=(2, 3))
    cols.reshape(n, c, k, k, ho, wo)[...] = windows.transpose(0, 1, 4, 5, 2, 3)


def col2im(cols, k, out, num_threads=1):
    n, c, hp, wp = out.shape
    ho, wo = hp - k + 1, wp - k + 1
    blocks = cols.reshape(n, c, k, k, ho, wo)
    for i in range(k):
        for j in range(k):
            out[:, :, i:i + ho, j:j + wo] += blocks[:, :, i, j]
