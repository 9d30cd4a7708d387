"""Selects the compiled kernels when importable, else the numpy fallback.

Set ``IRLSR_PURE_PYTHON=1`` to force the fallback. ``IRL_THREADS`` bounds the
number of OpenMP threads the compiled kernels may use.
"""
import os

from . import _fallback

NAME = "numpy"
_impl = _fallback

if os.environ.get("IRLSR_PURE_PYTHON", "0") != "1":
    try:
        from . import _kernels as _impl  # type: ignore[no-redef]

        NAME = "cython"
    except ImportError:
        _impl = _fallback


def num_threads() -> int:
    value = os.environ.get("IRL_THREADS")
    if value:
        try:
            return max(1, int(value))
        except ValueError:
            pass
    return os.cpu_count() or 1


def im2col(xp, k, cols):
    _impl.im2col(xp, k, cols, num_threads())


def col2im(cols, k, out):
    _impl.col2im(cols, k, out, num_threads())


def use(name: str) -> None:
    """Switch kernels at runtime (``"cython"`` or ``"numpy"``); used by tests and benchmarks."""
    global _impl, NAME
    if name == "numpy":
        _impl, NAME = _fallback, "numpy"
    elif name == "cython":
        from . import _kernels

        _impl, NAME = _kernels, "cython"
    else:
        raise ValueError(f"unknown backend {name!r}")


def available() -> list:
    names = ["numpy"]
    try:
        from . import _kernels  # noqa: F401

        names.insert(0, "cython")
    except ImportError:
        pass
    return names
