# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled pair sums for the mollified self-intersection local time.

Pairs ``a < b`` are swept row by row; each row is laid out so the compiler
can vectorise the distance, exponential and force loops. The diagonal adds
``M`` copies of the kernel peak. Loop order is fixed, so a given build
reproduces its results bit for bit.
"""

import numpy as np
from libc.math cimport exp, pow, M_PI
from libc.stdlib cimport malloc, free

NAME = "cython"


cdef double _sweep(const double[:, ::1] p, double inv2e, double[:, ::1] S, bint want_force) noexcept nogil:
    # p is d x M; S[i, m] accumulates sum over partners of k * (x_m - x_partner)_i
    cdef Py_ssize_t d = p.shape[0], M = p.shape[1]
    cdef Py_ssize_t a, b, i
    cdef double acc = 0.0, xa, diff, row_acc, s
    cdef double *r2 = <double *> malloc(M * sizeof(double))
    cdef double *k = <double *> malloc(M * sizeof(double))
    for a in range(M - 1):
        for b in range(a + 1, M):
            r2[b] = 0.0
        for i in range(d):
            xa = p[i, a]
            for b in range(a + 1, M):
                diff = p[i, b] - xa
                r2[b] += diff * diff
        for b in range(a + 1, M):
            k[b] = exp(-r2[b] * inv2e)
        row_acc = 0.0
        for b in range(a + 1, M):
            row_acc += k[b]
        acc += row_acc
        if want_force:
            for i in range(d):
                xa = p[i, a]
                s = 0.0
                for b in range(a + 1, M):
                    diff = k[b] * (p[i, b] - xa)
                    S[i, b] += diff
                    s += diff
                S[i, a] -= s
    free(r2)
    free(k)
    return acc


cdef object _contig(path):
    p = np.ascontiguousarray(path, dtype=np.float64)
    if p.ndim != 2:
        raise ValueError("path must be d x M")
    return p


def value(path, double eps, double weight):
    """``weight * sum_{a,b} phi(x_b - x_a)`` over all ordered pairs."""
    cdef const double[:, ::1] p = _contig(path)
    cdef Py_ssize_t d = p.shape[0], M = p.shape[1]
    cdef double c = pow(2.0 * M_PI * eps, -0.5 * d)
    cdef double[:, ::1] dummy = np.empty((1, 1))
    cdef double acc
    with nogil:
        acc = _sweep(p, 0.5 / eps, dummy, False)
    return weight * c * (M + 2.0 * acc)


def value_force(path, double eps, double weight):
    """Value and ``S`` with ``S[i, m] = sum_a d_i phi(x_m - x_a)``."""
    cdef const double[:, ::1] p = _contig(path)
    cdef Py_ssize_t d = p.shape[0], M = p.shape[1]
    cdef double c = pow(2.0 * M_PI * eps, -0.5 * d)
    S_arr = np.zeros((d, M), dtype=np.float64)
    cdef double[:, ::1] S = S_arr
    cdef double acc
    with nogil:
        acc = _sweep(p, 0.5 / eps, S, True)
    # d_i phi(x) = -x_i / eps * phi(x)
    S_arr *= -c / eps
    return weight * c * (M + 2.0 * acc), S_arr


def value_batch(paths, double eps, double weight):
    cdef Py_ssize_t n
    arr = np.ascontiguousarray(paths, dtype=np.float64)
    out = np.empty(arr.shape[0])
    for n in range(arr.shape[0]):
        out[n] = value(arr[n], eps, weight)
    return out


def value_force_batch(paths, double eps, double weight):
    cdef Py_ssize_t n
    arr = np.ascontiguousarray(paths, dtype=np.float64)
    vals = np.empty(arr.shape[0])
    forces = np.empty_like(arr)
    for n in range(arr.shape[0]):
        vals[n], forces[n] = value_force(arr[n], eps, weight)
    return vals, forces
