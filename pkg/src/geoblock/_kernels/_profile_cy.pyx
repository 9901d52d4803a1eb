# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled sliding closure-mass kernel (per-row prefix sums, float64 accumulation)."""

import numpy as np

BACKEND_NAME = "compiled"


def profile_masses(weights, history, min_block, splits):
    """Same contract as geoblock._kernels._profile_np.profile_masses."""
    cdef double[:, ::1] a = np.ascontiguousarray(weights, dtype=np.float64)
    cdef long long[::1] xs = np.ascontiguousarray(splits, dtype=np.int64)
    cdef Py_ssize_t rows = a.shape[0]
    cdef Py_ssize_t cols = a.shape[1]
    cdef Py_ssize_t n = xs.shape[0]
    cdef Py_ssize_t h = history
    cdef Py_ssize_t m = min_block

    prefix_arr = np.zeros((rows, cols + 1), dtype=np.float64)
    cdef double[:, ::1] prefix = prefix_arr
    cdef Py_ssize_t r, c, i, lo, hi, x
    cdef double acc

    for r in range(rows):
        acc = 0.0
        for c in range(cols):
            acc += a[r, c]
            prefix[r, c + 1] = acc

    cc_arr = np.zeros(n, dtype=np.float64)
    ch_arr = np.zeros(n, dtype=np.float64)
    cf_arr = np.zeros(n, dtype=np.float64)
    cdef double[::1] cc = cc_arr
    cdef double[::1] ch = ch_arr
    cdef double[::1] cf = cf_arr
    cdef double s_cc, s_ch, s_cf

    for i in range(n):
        x = xs[i]
        lo = h + x - m
        hi = h + x
        s_cc = 0.0
        s_ch = 0.0
        s_cf = 0.0
        for r in range(x - m, x):
            s_ch += prefix[r, lo]
            s_cc += prefix[r, hi] - prefix[r, lo]
            s_cf += prefix[r, cols] - prefix[r, hi]
        cc[i] = s_cc
        ch[i] = s_ch
        cf[i] = s_cf

    return cc_arr, ch_arr, cf_arr
