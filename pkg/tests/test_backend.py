import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from irlsr.tensor import Tensor, backend, conv2d
from irlsr.tensor import _fallback

needs_ext = pytest.mark.skipif("cython" not in backend.available(),
                               reason="compiled kernels not built")


def _kernels():
    from irlsr.tensor import _kernels
    return _kernels


@needs_ext
@settings(max_examples=40, deadline=None)
@given(n=st.integers(1, 2), c=st.integers(1, 4), h=st.integers(3, 9), w=st.integers(3, 9),
       k=st.sampled_from([1, 3]), dtype=st.sampled_from([np.float32, np.float64]),
       seed=st.integers(0, 2**16))
def test_compiled_kernels_match_numpy(n, c, h, w, k, dtype, seed):
    rng = np.random.default_rng(seed)
    xp = rng.standard_normal((n, c, h, w)).astype(dtype)
    ho, wo = h - k + 1, w - k + 1
    a = np.empty((n, c * k * k, ho * wo), dtype)
    b = np.empty_like(a)
    _fallback.im2col(xp, k, a)
    _kernels().im2col(xp, k, b, 2)
    np.testing.assert_array_equal(a, b)

    cols = rng.standard_normal(a.shape).astype(dtype)
    oa = np.zeros_like(xp)
    ob = np.zeros_like(xp)
    _fallback.col2im(cols, k, oa)
    _kernels().col2im(cols, k, ob, 2)
    np.testing.assert_allclose(oa, ob, rtol=1e-6 if dtype == np.float32 else 1e-12, atol=1e-6)


@needs_ext
def test_conv_forward_agrees_across_backends():
    rng = np.random.default_rng(0)
    x = Tensor(rng.standard_normal((2, 5, 10, 10)))
    w = Tensor(rng.standard_normal((7, 5, 3, 3)))
    prev = backend.NAME
    out = {}
    try:
        for name in ("numpy", "cython"):
            backend.use(name)
            out[name] = conv2d(x, w, padding=1).data
    finally:
        backend.use(prev)
    np.testing.assert_array_equal(out["numpy"], out["cython"])


def test_unknown_backend_rejected():
    with pytest.raises(ValueError):
        backend.use("fortran")


def test_pure_python_switch_and_thread_count():
    code = "from irlsr.tensor import backend; print(backend.NAME, backend.num_threads())"
    env = dict(os.environ, IRLSR_PURE_PYTHON="1", IRL_THREADS="3")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True)
    assert out.stdout.split() == ["numpy", "3"]
