# cython: language_level=3
# cython: boundscheck=False, wraparound=False, initializedcheck=False, cdivision=True
"""Compiled kernels for the embedding hot paths.

Numerical contract (shared with vidprobe._fallback): accumulate in float64,
sequentially in index order, one IEEE rounding per operation. The build
disables FP contraction so results are bit-identical to the fallback lane.
"""

from libc.math cimport sqrt, INFINITY

import numpy as np


def mean_rows(const float[:, ::1] rows):
    """Column-wise mean of a float32 matrix, returned as float32."""
    cdef Py_ssize_t n = rows.shape[0]
    cdef Py_ssize_t d = rows.shape[1]
    acc_arr = np.zeros(d, dtype=np.float64)
    cdef double[::1] acc = acc_arr
    cdef Py_ssize_t i, j
    with nogil:
        for i in range(n):
            for j in range(d):
                acc[j] = acc[j] + <double> rows[i, j]
        for j in range(d):
            acc[j] = acc[j] / <double> n
    return acc_arr.astype(np.float32)


def euclidean(const float[::1] a, const float[::1] b):
    """Euclidean distance between two float32 vectors, as a float64."""
    cdef Py_ssize_t d = a.shape[0]
    cdef double acc = 0.0
    cdef double diff
    cdef Py_ssize_t j
    with nogil:
        for j in range(d):
            diff = <double> a[j] - <double> b[j]
            acc = acc + diff * diff
    return sqrt(acc)


def nearest_scan(const float[:, ::1] tests,
                 const float[:, ::1] refs,
                 const unsigned char[::1] labels):
    """Exhaustive nearest-reference scan.

    Returns (nearest_index, nearest_distance, min_real_distance,
    min_fake_distance) arrays, one entry per test row. Ties on exactly
    equal distances keep the lowest reference index. A class with no
    references reports +inf for its minimum.
    """
    cdef Py_ssize_t t_count = tests.shape[0]
    cdef Py_ssize_t r_count = refs.shape[0]
    cdef Py_ssize_t d = tests.shape[1]

    idx_arr = np.empty(t_count, dtype=np.int64)
    dist_arr = np.empty(t_count, dtype=np.float64)
    real_arr = np.empty(t_count, dtype=np.float64)
    fake_arr = np.empty(t_count, dtype=np.float64)
    cdef long long[::1] idx = idx_arr
    cdef double[::1] dist = dist_arr
    cdef double[::1] min_real = real_arr
    cdef double[::1] min_fake = fake_arr

    cdef Py_ssize_t t, r, j
    cdef double acc, diff, dval, best, m_real, m_fake
    cdef Py_ssize_t best_i
    with nogil:
        for t in range(t_count):
            best = INFINITY
            best_i = 0
            m_real = INFINITY
            m_fake = INFINITY
            for r in range(r_count):
                acc = 0.0
                for j in range(d):
                    diff = <double> tests[t, j] - <double> refs[r, j]
                    acc = acc + diff * diff
                dval = sqrt(acc)
                if dval < best or r == 0:
                    best = dval
                    best_i = r
                if labels[r] == 0:
                    if dval < m_real:
                        m_real = dval
                else:
                    if dval < m_fake:
                        m_fake = dval
            idx[t] = best_i
            dist[t] = best
            min_real[t] = m_real
            min_fake[t] = m_fake
    return idx_arr, dist_arr, real_arr, fake_arr
