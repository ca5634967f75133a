# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the kernels in ``_pykernels``."""
import numpy as np
cimport numpy as cnp
from libc.math cimport exp, fabs

cnp.import_array()

DEF SERIES_TERMS = 12
cdef double SERIES_CUTOFF = 0.1


cdef inline double _series(double t, int p) noexcept nogil:
    cdef double term = 1.0, total = 0.0
    cdef int k
    for k in range(SERIES_TERMS):
        total += term / (k + p + 1)
        term *= t / (k + 1)
    return total


def pava_decreasing(y, w):
    cdef const double[::1] yv = np.ascontiguousarray(y, dtype=np.float64)
    cdef const double[::1] wv = np.ascontiguousarray(w, dtype=np.float64)
    cdef Py_ssize_t n = yv.shape[0]
    cdef double[::1] values = np.empty(n)
    cdef double[::1] weights = np.empty(n)
    cdef Py_ssize_t[::1] counts = np.empty(n, dtype=np.intp)
    out = np.empty(n)
    cdef double[::1] ov = out
    cdef Py_ssize_t i, j, b, pos, top = -1
    cdef double wsum
    with nogil:
        for i in range(n):
            top += 1
            values[top] = yv[i]
            weights[top] = wv[i]
            counts[top] = 1
            while top > 0 and values[top - 1] < values[top]:
                wsum = weights[top - 1] + weights[top]
                values[top - 1] = (weights[top - 1] * values[top - 1]
                                   + weights[top] * values[top]) / wsum
                weights[top - 1] = wsum
                counts[top - 1] += counts[top]
                top -= 1
        pos = 0
        for b in range(top + 1):
            for j in range(counts[b]):
                ov[pos] = values[b]
                pos += 1
    return out


def segment_moments(phi_left, phi_right, length):
    cdef const double[::1] a = np.ascontiguousarray(phi_left, dtype=np.float64)
    cdef const double[::1] b = np.ascontiguousarray(phi_right, dtype=np.float64)
    cdef const double[::1] L = np.ascontiguousarray(length, dtype=np.float64)
    cdef Py_ssize_t n = a.shape[0], i
    m0 = np.empty(n)
    m1 = np.empty(n)
    m2 = np.empty(n)
    cdef double[::1] v0 = m0, v1 = m1, v2 = m2
    cdef double t, ea, eb, l
    with nogil:
        for i in range(n):
            t = b[i] - a[i]
            ea = exp(a[i])
            l = L[i]
            if fabs(t) < SERIES_CUTOFF:
                v0[i] = l * ea * _series(t, 0)
                v1[i] = l * l * ea * _series(t, 1)
                v2[i] = l * l * l * ea * _series(t, 2)
            else:
                eb = exp(b[i])
                v0[i] = l * (eb - ea) / t
                v1[i] = l * l * (eb * (t - 1.0) + ea) / (t * t)
                v2[i] = l * l * l * (eb * (t * t - 2.0 * t + 2.0) - 2.0 * ea) / (t * t * t)
    return m0, m1, m2
