"""Pure-Python/numpy implementations of the hot kernels.

These are the reference implementations; ``_ckernels`` mirrors them in
Cython. Both must agree to rounding error.
"""
import math

import numpy as np

# |t| below this uses the power series for the segment moments
SERIES_CUTOFF = 0.1
SERIES_TERMS = 12


def _series_coeffs(p):
    return np.array([1.0 / (math.factorial(k) * (k + p + 1))
                     for k in range(SERIES_TERMS)])


_COEFFS = [_series_coeffs(p) for p in range(3)]


def pava_decreasing(y, w):
    """Weighted least-squares projection onto nonincreasing sequences."""
    y = np.asarray(y, dtype=float)
    w = np.asarray(w, dtype=float)
    n = y.shape[0]
    values = [0.0] * n
    weights = [0.0] * n
    counts = [0] * n
    top = -1
    for i in range(n):
        top += 1
        values[top] = float(y[i])
        weights[top] = float(w[i])
        counts[top] = 1
        while top > 0 and values[top - 1] < values[top]:
            wsum = weights[top - 1] + weights[top]
            values[top - 1] = (weights[top - 1] * values[top - 1]
                               + weights[top] * values[top]) / wsum
            weights[top - 1] = wsum
            counts[top - 1] += counts[top]
            top -= 1
    out = np.empty(n)
    pos = 0
    for b in range(top + 1):
        out[pos:pos + counts[b]] = values[b]
        pos += counts[b]
    return out


def segment_moments(phi_left, phi_right, length):
    """Moments of a linear-exponential segment.

    Returns ``(m0, m1, m2)`` with ``m_p = int_0^L u**p exp(phi(u)) du`` where
    ``phi`` is linear from ``phi_left`` at 0 to ``phi_right`` at ``L``.
    Inputs should already be shifted so that ``exp`` does not overflow.
    """
    a = np.asarray(phi_left, dtype=float)
    b = np.asarray(phi_right, dtype=float)
    L = np.asarray(length, dtype=float)
    t = b - a
    ea = np.exp(a)
    eb = np.exp(b)
    small = np.abs(t) < SERIES_CUTOFF

    k = np.empty((3,) + t.shape)
    if np.any(small):
        ts = t[small]
        powers = ts[None, :] ** np.arange(SERIES_TERMS)[:, None]
        for p in range(3):
            k[p][small] = ea[small] * (_COEFFS[p] @ powers)
    big = ~small
    if np.any(big):
        tb = t[big]
        ea_b = ea[big]
        eb_b = eb[big]
        k[0][big] = (eb_b - ea_b) / tb
        k[1][big] = (eb_b * (tb - 1.0) + ea_b) / tb ** 2
        k[2][big] = (eb_b * (tb * tb - 2.0 * tb + 2.0) - 2.0 * ea_b) / tb ** 3
    return L * k[0], L ** 2 * k[1], L ** 3 * k[2]
