# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled im2col / col2im gather-scatter for stride-1 square convolutions.

Both kernels parallelise over (batch, channel) planes; every plane writes a
disjoint region of the output, so results do not depend on thread count.
"""
from cython.parallel cimport prange

ctypedef fused real:
    float
    double


def im2col(const real[:, :, :, ::1] xp, Py_ssize_t k, real[:, :, ::1] cols, int num_threads=1):
    """Fill ``cols[n, (c*k + i)*k + j, y*wo + x] = xp[n, c, y + i, x + j]``."""
    cdef Py_ssize_t n = xp.shape[0], c = xp.shape[1]
    cdef Py_ssize_t ho = xp.shape[2] - k + 1, wo = xp.shape[3] - k + 1
    cdef Py_ssize_t plane, b, ch, i, j, y, x, row, base
    for plane in prange(n * c, nogil=True, num_threads=num_threads, schedule="static"):
        b = plane // c
        ch = plane % c
        for i in range(k):
            for j in range(k):
                row = (ch * k + i) * k + j
                for y in range(ho):
                    base = y * wo
                    for x in range(wo):
                        cols[b, row, base + x] = xp[b, ch, y + i, x + j]


def col2im(const real[:, :, ::1] cols, Py_ssize_t k, real[:, :, :, ::1] out, int num_threads=1):
    """Scatter-add the transpose of :func:`im2col` into the zeroed padded buffer ``out``."""
    cdef Py_ssize_t n = out.shape[0], c = out.shape[1]
    cdef Py_ssize_t ho = out.shape[2] - k + 1, wo = out.shape[3] - k + 1
    cdef Py_ssize_t plane, b, ch, i, j, y, x, row, base
    for plane in prange(n * c, nogil=True, num_threads=num_threads, schedule="static"):
        b = plane // c
        ch = plane % c
        for i in range(k):
            for j in range(k):
                row = (ch * k + i) * k + j
                for y in range(ho):
                    base = y * wo
                    for x in range(wo):
                        out[b, ch, y + i, x + j] += cols[b, row, base + x]
