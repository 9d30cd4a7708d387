"""Compare the compiled and numpy convolution kernels.

Times im2col, col2im and a full conv2d forward/backward step at the layer
shapes of the default x4 master (16 features, batch 16, 12x12 LR patches and
the 24x24 / 48x48 maps after each upsampling stage).

    python benchmarks/bench_kernels.py [--repeat 20] [--threads N]
"""
import argparse
import os
import timeit

import numpy as np

from irlsr.tensor import Tape, Tensor, backend, conv2d, mean
from irlsr.tensor import _fallback

SHAPES = [(16, 16, 12, 12), (16, 16, 24, 24), (16, 16, 48, 48)]


def _best(fn, repeat):
    fn()
    return min(timeit.repeat(fn, number=1, repeat=repeat)) * 1e3


def kernel_times(impl, shape, repeat, threads):
    n, c, h, w = shape
    rng = np.random.default_rng(0)
    xp = rng.standard_normal((n, c, h + 2, w + 2)).astype(np.float32)
    cols = np.empty((n, c * 9, h * w), np.float32)
    out = np.zeros_like(xp)
    t_im = _best(lambda: impl.im2col(xp, 3, cols, threads), repeat)
    t_col = _best(lambda: impl.col2im(cols, 3, out, threads), repeat)
    return t_im, t_col


def conv_step_time(shape, repeat):
    n, c, h, w = shape
    rng = np.random.default_rng(1)
    x = Tensor(rng.standard_normal(shape), requires_grad=True)
    wt = Tensor(rng.standard_normal((c, c, 3, 3)) * 0.1, requires_grad=True)
    b = Tensor(np.zeros(c), requires_grad=True)

    def step():
        with Tape() as tape:
            tape.backward(mean(conv2d(x, wt, b, padding=1)))
        x.grad = wt.grad = b.grad = None
    return _best(step, repeat)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=20)
    ap.add_argument("--threads", type=int, default=None,
                    help="OpenMP threads for the compiled kernels (default: IRL_THREADS or all cores)")
    args = ap.parse_args()
    if args.threads:
        os.environ["IRL_THREADS"] = str(args.threads)
    threads = backend.num_threads()
    names = backend.available()
    print(f"backends: {', '.join(names)}; threads: {threads}")
    impls = {"numpy": _fallback}
    if "cython" in names:
        from irlsr.tensor import _kernels
        impls["cython"] = _kernels

    print(f"{'shape':<18}{'backend':<9}{'im2col ms':>11}{'col2im ms':>11}{'conv step ms':>14}")
    for shape in SHAPES:
        for name, impl in impls.items():
            t_im, t_col = kernel_times(impl, shape, args.repeat, threads)
            backend.use(name)
            t_step = conv_step_time(shape, max(3, args.repeat // 4))
            print(f"{str(shape):<18}{name:<9}{t_im:>11.2f}{t_col:>11.2f}{t_step:>14.2f}")
    backend.use(names[0])


if __name__ == "__main__":
    main()
