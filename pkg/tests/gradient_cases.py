"""Seeded finite-difference cases shared by the unit and acceptance suites."""
import numpy as np

from irlsr.tensor import (
    Tensor,
    add,
    concat_channels,
    conv2d,
    l1_loss,
    l2_loss,
    mean,
    pixel_shuffle,
    pixel_unshuffle,
    relu,
    scale,
    sum_all,
)
from irlsr.tensor.gradcheck import check_gradients

N_SEEDS = 20
TOL = 1e-3
DELTA = 1e-3
KINK_MARGIN = 2e-2


def _away_from_zero(rng, shape, margin=0.1):
    return rng.choice([-1.0, 1.0], size=shape) * rng.uniform(margin, 1.0, size=shape)


def case_conv2d(seed):
    rng = np.random.default_rng(seed)
    n, ci, co = rng.integers(1, 3), rng.integers(1, 5), rng.integers(1, 5)
    h, w = rng.integers(3, 7), rng.integers(3, 7)
    k = int(rng.choice([1, 3]))
    p = int(rng.integers(0, 2)) if k == 3 else 0
    arrays = [rng.standard_normal((n, ci, h, w)), rng.standard_normal((co, ci, k, k)),
              rng.standard_normal(co)]
    return lambda x, wt, b: conv2d(x, wt, b, p), arrays


def case_conv2d_few_outputs(seed):
    # co < ci exercises the transposed-correlation input-gradient path
    rng = np.random.default_rng(seed)
    arrays = [rng.standard_normal((2, 4, 6, 6)), rng.standard_normal((2, 4, 3, 3)),
              rng.standard_normal(2)]
    return lambda x, wt, b: conv2d(x, wt, b, 1), arrays


def case_relu(seed):
    rng = np.random.default_rng(seed)
    return relu, [_away_from_zero(rng, (2, 4, 6, 6))]


def case_relu_net(seed):
    """conv -> relu -> conv -> residual add; redraws until no pre-activation
    sits within the kink margin, where finite differences are undefined."""
    sub = 0
    while True:
        rng = np.random.default_rng([seed, sub])
        x = rng.standard_normal((2, 3, 5, 5))
        w1, b1 = rng.standard_normal((4, 3, 3, 3)) * 0.5, rng.standard_normal(4) * 0.5
        w2, b2 = rng.standard_normal((3, 4, 3, 3)) * 0.5, rng.standard_normal(3) * 0.5
        pre = conv2d(Tensor(x, dtype=np.float64), Tensor(w1, dtype=np.float64),
                     Tensor(b1, dtype=np.float64), 1).data
        if np.abs(pre).min() > KINK_MARGIN:
            break
        sub += 1

    def net(x, w1, b1, w2, b2):
        h = relu(conv2d(x, w1, b1, 1))
        return add(scale(conv2d(h, w2, b2, 1), 0.5), x)

    return net, [x, w1, b1, w2, b2]


def case_pixel_shuffle(seed):
    rng = np.random.default_rng(seed)
    r = int(rng.choice([1, 2]))
    return (lambda x: pixel_shuffle(x, r)), [rng.standard_normal((2, 4, 3, 3))]


def case_pixel_unshuffle(seed):
    rng = np.random.default_rng(seed)
    return (lambda x: pixel_unshuffle(x, 2)), [rng.standard_normal((2, 3, 6, 4))]


def case_sum_all(seed):
    rng = np.random.default_rng(seed)
    arrays = [rng.standard_normal((1, 3, 4, 4)) for _ in range(int(rng.integers(1, 4)))]
    return (lambda *xs: sum_all(list(xs))), arrays


def case_mean(seed):
    rng = np.random.default_rng(seed)
    return mean, [rng.standard_normal((2, 3, 4, 5))]


def case_concat(seed):
    rng = np.random.default_rng(seed)
    arrays = [rng.standard_normal((2, int(rng.integers(1, 4)), 6, 6)) for _ in range(3)]
    return (lambda a, b, c: concat_channels([a, b, c])), arrays


def case_add_scale(seed):
    rng = np.random.default_rng(seed)
    s = float(rng.uniform(-2, 2))
    return (lambda a, b: add(scale(a, s), b)), [rng.standard_normal((2, 4, 6, 6)),
                                                 rng.standard_normal((2, 4, 6, 6))]


def case_l1(seed):
    rng = np.random.default_rng(seed)
    target = rng.standard_normal((2, 4, 6, 6))
    pred = target + _away_from_zero(rng, target.shape)
    return (lambda p: l1_loss(p, Tensor(target, dtype=np.float64))), [pred]


def case_l2(seed):
    rng = np.random.default_rng(seed)
    target = rng.standard_normal((2, 4, 6, 6))
    return (lambda p: l2_loss(p, Tensor(target, dtype=np.float64))), [rng.standard_normal(target.shape)]


CASES = {
    "conv2d": case_conv2d,
    "conv2d_few_outputs": case_conv2d_few_outputs,
    "relu": case_relu,
    "relu_net": case_relu_net,
    "pixel_shuffle": case_pixel_shuffle,
    "pixel_unshuffle": case_pixel_unshuffle,
    "sum_all": case_sum_all,
    "mean": case_mean,
    "concat_channels": case_concat,
    "add_scale": case_add_scale,
    "l1_loss": case_l1,
    "l2_loss": case_l2,
}


def max_error(name, seed):
    fn, arrays = CASES[name](seed)
    return max(check_gradients(fn, arrays, seed=seed, delta=DELTA))
