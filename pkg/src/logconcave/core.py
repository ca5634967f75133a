"""Weighted samples, the slope parameterization and the penalized likelihood.

A concave log-density that is piecewise linear between the ordered data
points ``x_1 < ... < x_n`` is encoded by its value ``phi1`` at ``x_1`` and
the slopes ``s_2, ..., s_n`` of the segments. Maximizing the weighted
log-likelihood under the unit-mass constraint is equivalent to maximizing

    sum_i w_i phi(x_i) - W * integral exp(phi)

over concave ``phi``, i.e. over slope vectors that are nonincreasing.
"""
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import _backend
from .errors import DegenerateSample, InvalidData, InvalidParams

# points closer than this fraction of the data range are merged as ties
MERGE_RTOL = 1e-12


@dataclass(frozen=True)
class WeightedSample:
    """Sorted distinct points with positive weights.

    Build instances with :func:`prepare_sample`, which merges ties and
    validates the input.
    """

    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        self.points.setflags(write=False)
        self.weights.setflags(write=False)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def total_weight(self) -> float:
        return float(self.weights.sum())

    @property
    def spacings(self) -> np.ndarray:
        return np.diff(self.points)

    def cumulative_weights(self) -> np.ndarray:
        """Weight at or left of each point."""
        return np.cumsum(self.weights)

    def ecdf(self) -> np.ndarray:
        """Empirical CDF at the points."""
        return self.cumulative_weights() / self.total_weight


@dataclass(frozen=True)
class ConcaveParams:
    """``phi1`` = log-density at the first point; ``slopes`` = s_2..s_n."""

    phi1: float
    slopes: np.ndarray

    def as_vector(self) -> np.ndarray:
        return np.concatenate(([self.phi1], self.slopes))

    @classmethod
    def from_vector(cls, v) -> "ConcaveParams":
        v = np.asarray(v, dtype=float)
        return cls(float(v[0]), v[1:].copy())

    def is_feasible(self) -> bool:
        return bool(np.all(np.diff(self.slopes) <= 0.0))


@dataclass(frozen=True)
class ObjectiveValue:
    value: float
    gradient: Optional[np.ndarray] = None


def prepare_sample(raw, weights=None) -> WeightedSample:
    """Sort, merge duplicates and validate observations.

    Parameters
    ----------
    raw : array_like
        Observations.
    weights : array_like, optional
        Positive weight per observation; defaults to one each. Weights of
        tied observations are summed.

    Points that differ by less than ``MERGE_RTOL`` times the data range
    are ties at working precision; they are merged into the smallest of
    them.

    Raises
    ------
    InvalidData
        Nonfinite values, mismatched or nonpositive weights.
    DegenerateSample
        Fewer than two distinct values.
    """
    x = np.asarray(raw, dtype=float).ravel()
    if x.size == 0:
        raise DegenerateSample("empty sample")
    if not np.all(np.isfinite(x)):
        raise InvalidData("sample contains nonfinite values")
    if weights is None:
        w = np.ones_like(x)
    else:
        w = np.asarray(weights, dtype=float).ravel()
        if w.shape != x.shape:
            raise InvalidData(f"{w.size} weights for {x.size} observations")
        if not np.all(np.isfinite(w)) or np.any(w <= 0.0):
            raise InvalidData("weights must be finite and positive")
    points, inverse = np.unique(x, return_inverse=True)
    if points.size < 2:
        raise DegenerateSample("need at least two distinct observations")
    merged = np.bincount(inverse.ravel(), weights=w, minlength=points.size)
    close = np.diff(points) <= MERGE_RTOL * (points[-1] - points[0])
    if np.any(close):
        group = np.concatenate(([0], np.cumsum(~close)))
        merged = np.bincount(group, weights=merged)
        points = points[np.concatenate(([True], ~close))]
    return WeightedSample(points, merged)


def params_to_knots(params: ConcaveParams, sample: WeightedSample) -> np.ndarray:
    """Log-density values at the sample points."""
    phi = np.empty(sample.n)
    phi[0] = params.phi1
    phi[1:] = params.phi1 + np.cumsum(sample.spacings * params.slopes)
    return phi


def knots_to_params(log_density, sample: WeightedSample) -> ConcaveParams:
    """Inverse of :func:`params_to_knots`."""
    phi = np.asarray(log_density, dtype=float)
    return ConcaveParams(float(phi[0]), np.diff(phi) / sample.spacings)


def segment_integrals(phi, spacings):
    """Per-segment moments of ``exp(phi)`` and the log shift applied.

    Returns ``(shift, m0, m1, m2)``; the true moments are
    ``exp(shift) * m_p``.
    """
    shift = float(np.max(phi))
    m0, m1, m2 = _backend.segment_moments(phi[:-1] - shift, phi[1:] - shift, spacings)
    return shift, m0, m1, m2


def _check_params(params, sample):
    v = params.as_vector()
    if v.shape[0] != sample.n:
        raise InvalidParams(f"expected {sample.n} parameters, got {v.shape[0]}")
    if not np.all(np.isfinite(v)):
        raise InvalidParams("parameters must be finite")
    return v


def _linear_term(v, sample):
    W = sample.total_weight
    # weight strictly right of x_{i-1}, for i = 2..n
    right = W - sample.cumulative_weights()[:-1]
    return W * v[0] + float(np.dot(sample.spacings * right, v[1:]))


def objective(params: ConcaveParams, sample: WeightedSample,
              gradient: bool = False) -> ObjectiveValue:
    """Evaluate the penalized log-likelihood in slope coordinates.

    Defined for any finite parameter vector; cone membership is the
    solver's concern. Returns ``-inf`` when the integral overflows.
    """
    v = _check_params(params, sample)
    W = sample.total_weight
    dx = sample.spacings
    phi = params_to_knots(params, sample)
    shift, m0, m1, _ = segment_integrals(phi, dx)
    with np.errstate(over="ignore"):
        scale = np.exp(shift)
        integral = scale * float(m0.sum())
        value = _linear_term(v, sample) - W * integral
    if np.isnan(value):
        value = -np.inf
    if not gradient:
        return ObjectiveValue(float(value))
    return ObjectiveValue(float(value), _gradient(v, sample, shift, m0, m1))


def _tail_sums(m0):
    """``T[j] = sum_{i > j} m0[i]`` over segment indices."""
    tail = np.zeros_like(m0)
    tail[:-1] = np.cumsum(m0[::-1])[::-1][1:]
    return tail


def _gradient(v, sample, shift, m0, m1):
    W = sample.total_weight
    dx = sample.spacings
    right = W - sample.cumulative_weights()[:-1]
    scale = np.exp(shift)
    g = np.empty_like(v)
    g[0] = W - W * scale * m0.sum()
    g[1:] = dx * right - W * scale * (m1 + dx * _tail_sums(m0))
    return g


def curvature(params: ConcaveParams, sample: WeightedSample) -> np.ndarray:
    """Negated diagonal of the Hessian (all entries positive)."""
    W = sample.total_weight
    dx = sample.spacings
    phi = params_to_knots(params, sample)
    shift, m0, _, m2 = segment_integrals(phi, dx)
    scale = np.exp(shift)
    h = np.empty(sample.n)
    h[0] = W * scale * m0.sum()
    h[1:] = W * scale * (m2 + dx ** 2 * _tail_sums(m0))
    return h


def gradient_check(params: ConcaveParams, sample: WeightedSample,
                   h: float = 1e-6) -> float:
    """Worst deviation between analytic and central-difference gradients.

    Deviations are relative to ``max(|g|, 1)`` componentwise.
    """
    if h <= 0:
        raise InvalidParams("step h must be positive")
    v = params.as_vector()
    g = objective(params, sample, gradient=True).gradient
    worst = 0.0
    for j in range(v.shape[0]):
        up = v.copy()
        down = v.copy()
        up[j] += h
        down[j] -= h
        fd = (objective(ConcaveParams.from_vector(up), sample).value
              - objective(ConcaveParams.from_vector(down), sample).value) / (2 * h)
        worst = max(worst, abs(fd - g[j]) / max(abs(fd), abs(g[j]), 1.0))
    return worst


def project_cone(v, weights=None) -> np.ndarray:
    """Weighted least-squares projection onto nonincreasing sequences.

    Computed exactly by pool-adjacent-violators.
    """
    v = np.asarray(v, dtype=float)
    if v.ndim != 1 or v.size == 0:
        raise InvalidData("need a nonempty vector")
    if weights is None:
        w = np.ones_like(v)
    else:
        w = np.asarray(weights, dtype=float)
        if w.shape != v.shape:
            raise InvalidData("weights and vector differ in length")
        if not np.all(w > 0.0):
            raise InvalidData("projection weights must be positive")
    return _backend.pava_decreasing(v, w)


def project_params(params: ConcaveParams, weights=None) -> ConcaveParams:
    """Project the slope block onto the cone; ``phi1`` is left unchanged."""
    w = None if weights is None else np.asarray(weights, dtype=float)[1:]
    if params.slopes.size == 0:
        return params
    return ConcaveParams(params.phi1, project_cone(params.slopes, w))
