"""Iterative convex minorant solver for the log-concave MLE.

Each iteration builds a diagonal quadratic model of the objective around
the current slope vector, maximizes it over the cone of nonincreasing
slopes with pool-adjacent-violators, and backtracks along the segment to
the model maximizer until the Armijo condition holds. The model step
identifies which slopes are tied (the knot set); a Newton refinement in
knot-value coordinates, where the Hessian is tridiagonal, then converges
on that face. Slope ties that Newton wants to break open are left to the
next model step.
"""
from dataclasses import dataclass, field
import logging
import math

import numpy as np
from scipy.linalg import solveh_banded

from .core import (ConcaveParams, WeightedSample, curvature, knots_to_params,
                   objective, params_to_knots, project_cone, segment_integrals)
from .errors import InvalidParams, SolverFailure
from . import _backend

log = logging.getLogger(__name__)

MIN_CURVATURE = 1e-8


@dataclass(frozen=True)
class SolverConfig:
    max_iter: int = 500
    tol_objective: float = 1e-10
    tol_stationarity: float = 1e-8
    armijo_c: float = 1e-4
    backtrack_factor: float = 0.5
    max_backtrack: int = 60
    newton_steps: int = 50

    def __post_init__(self):
        if self.max_iter < 1:
            raise InvalidParams("max_iter must be positive")
        if self.tol_objective <= 0 or self.tol_stationarity <= 0:
            raise InvalidParams("tolerances must be positive")
        if not 0 < self.armijo_c < 1 or not 0 < self.backtrack_factor < 1:
            raise InvalidParams("armijo_c and backtrack_factor must lie in (0, 1)")


@dataclass(frozen=True)
class SolverReport:
    iterations: int
    objective_trace: list
    stationarity_residual: float
    converged: bool


@dataclass(frozen=True)
class LogConcaveFit:
    """Normalized log-concave MLE.

    ``log_density`` holds the fitted log-density at ``knots`` (all sample
    points); it is linear between them and ``-inf`` outside.
    """

    knots: np.ndarray
    log_density: np.ndarray
    cdf_at_knots: np.ndarray
    sample: WeightedSample = field(repr=False)
    report: SolverReport = field(repr=False)

    @property
    def slopes(self) -> np.ndarray:
        return np.diff(self.log_density) / np.diff(self.knots)

    def breakpoints(self, rtol: float = 1e-9) -> np.ndarray:
        """Indices of the knots where the log-density actually bends.

        Always includes both endpoints.
        """
        s = self.slopes
        kink = s[:-1] - s[1:]
        scale = np.maximum(np.abs(s[:-1]), np.abs(s[1:])) + 1.0
        # slopes recomputed from knot values carry rounding of order
        # eps * |phi| / spacing, which matters on very short segments
        dx = np.diff(self.knots)
        phi = np.abs(self.log_density)
        size = np.maximum(np.maximum(phi[:-2], phi[1:-1]), phi[2:]) + 1.0
        rounding = 8 * np.finfo(float).eps * size * (1 / dx[:-1] + 1 / dx[1:])
        inner = np.flatnonzero(kink > rtol * scale + rounding) + 1
        return np.concatenate(([0], inner, [self.knots.size - 1]))

    # thin wrappers over the distribution module
    def pdf(self, x):
        from .distribution import pdf
        return pdf(self, x)

    def logpdf(self, x):
        from .distribution import logpdf
        return logpdf(self, x)

    def cdf(self, x):
        from .distribution import cdf
        return cdf(self, x)

    def quantile(self, p):
        from .distribution import quantile
        return quantile(self, p)

    def sample_values(self, rng, m):
        from .distribution import sample
        return sample(self, rng, m)

    def mode(self):
        from .distribution import mode
        return mode(self)

    def hazard(self, x):
        from .distribution import hazard
        return hazard(self, x)


def initial_params(sample: WeightedSample) -> ConcaveParams:
    """Normal log-density at the points, using weighted moments."""
    w = sample.weights / sample.total_weight
    mean = float(np.dot(w, sample.points))
    var = float(np.dot(w, (sample.points - mean) ** 2))
    phi = -0.5 * (sample.points - mean) ** 2 / var - 0.5 * math.log(2 * math.pi * var)
    params = knots_to_params(phi, sample)
    return ConcaveParams(params.phi1, project_cone(params.slopes))


def _coarse_start(sample):
    """Chord of the initial log-density through its endpoints and peak."""
    phi = params_to_knots(initial_params(sample), sample)
    idx = np.unique([0, int(np.argmax(phi)), sample.n - 1])
    coarse = np.interp(sample.points, sample.points[idx], phi[idx])
    v = knots_to_params(coarse, sample).as_vector()
    # chord slopes tie exactly within each coarse segment
    counts = np.diff(idx)
    v[1:] = np.repeat(np.diff(phi[idx]) / np.diff(sample.points[idx]), counts)
    return v


def _restrict(fit, sample):
    """Slope vector of ``fit`` on the points of ``sample``.

    The values at the points are interpolated through every knot of the
    fit, so the warm start reproduces the old log-density exactly there.
    Returns ``None`` when the sample leaves the fit's support.
    """
    x = sample.points
    if x[0] < fit.knots[0] or x[-1] > fit.knots[-1]:
        return None
    phi = np.interp(x, fit.knots, fit.log_density)
    slopes = np.diff(phi) / sample.spacings
    if np.any(np.diff(slopes) > 0.0):
        # rounding only; the chords of a concave function are nonincreasing
        slopes = project_cone(slopes)
    return np.concatenate(([phi[0]], slopes))


def _violations(v, gradient, tol):
    """Points where inserting a knot would increase the objective.

    ``gain[i]`` is the derivative along the concave bend at point ``i``
    (all slopes left of it raised together). One candidate, the largest
    gain, is returned per gap between existing knots.
    """
    slopes = v[1:]
    gain = np.concatenate(([0.0], np.cumsum(gradient[1:])))
    knots = np.concatenate(([0], np.flatnonzero(slopes[:-1] != slopes[1:]) + 1,
                            [v.size - 1]))
    out = []
    for a, b in zip(knots[:-1], knots[1:]):
        if b - a < 2:
            continue
        j = a + 1 + int(np.argmax(gain[a + 1:b]))
        if gain[j] > tol:
            out.append(j)
    return np.asarray(out, dtype=np.intp)


def _normalize(v, sample):
    """Shift ``phi1`` so the density integrates to one (never lowers the objective)."""
    phi = params_to_knots(ConcaveParams.from_vector(v), sample)
    shift, m0, _, _ = segment_integrals(phi, sample.spacings)
    out = v.copy()
    out[0] -= shift + math.log(float(m0.sum()))
    return out


def stationarity_residual(params: ConcaveParams, sample: WeightedSample,
                          gradient=None) -> float:
    """Max-norm of ``v - P(v + g)``, zero exactly at the constrained maximizer."""
    v = params.as_vector()
    if gradient is None:
        gradient = objective(params, sample, gradient=True).gradient
    moved = v + gradient
    r = np.empty_like(v)
    r[0] = gradient[0]
    if v.size > 1:
        r[1:] = v[1:] - project_cone(moved[1:])
    return float(np.max(np.abs(r)))


def _armijo(v, d, value, slope, sample, config, max_step=1.0):
    """Backtrack along ``v + t d``; return ``(t, new_value)`` or ``None``."""
    t = max_step
    for _ in range(config.max_backtrack):
        trial = objective(ConcaveParams.from_vector(v + t * d), sample).value
        if trial > value and trial >= value + config.armijo_c * t * slope:
            return t, trial
        t *= config.backtrack_factor
        if t * slope < _noise(value):
            # any further gain would be below rounding
            break
    return None


def step(params: ConcaveParams, sample: WeightedSample,
         config: SolverConfig = SolverConfig()):
    """One model-maximization step.

    Returns ``(new_params, accepted)``; on rejection the input is returned.
    """
    v = params.as_vector()
    ov = objective(params, sample, gradient=True)
    g = ov.gradient
    h = np.maximum(curvature(params, sample), MIN_CURVATURE)
    target = v + g / h
    y = np.empty_like(v)
    y[0] = target[0]
    y[1:] = _backend.pava_decreasing(target[1:], h[1:])
    d = y - v
    slope = float(np.dot(g, d))
    if not slope > 0.0:
        return params, False
    found = _armijo(v, d, ov.value, slope, sample, config)
    if found is None:
        return params, False
    t, _ = found
    return ConcaveParams.from_vector(v + t * d), True


class _Face:
    """Knot-value coordinates on the face where slopes between knots are tied."""

    def __init__(self, v, sample, extra=()):
        self.sample = sample
        slopes = v[1:]
        inner = np.flatnonzero(slopes[:-1] != slopes[1:]) + 1
        self.idx = np.union1d(np.concatenate(([0], inner, [sample.n - 1])),
                              np.asarray(extra, dtype=np.intp))
        self.pos = sample.points[self.idx]
        self.length = np.diff(self.pos)
        phi = params_to_knots(ConcaveParams.from_vector(v), sample)
        self.psi = phi[self.idx]
        self._linear_coefficients()

    def _linear_coefficients(self):
        x = self.sample.points
        w = self.sample.weights
        seg = np.searchsorted(self.pos, x, side="right") - 1
        seg = np.clip(seg, 0, self.pos.size - 2)
        frac = (x - self.pos[seg]) / self.length[seg]
        c = np.zeros(self.pos.size)
        np.add.at(c, seg, w * (1.0 - frac))
        np.add.at(c, seg + 1, w * frac)
        self.coef = c

    def to_vector(self, psi):
        """Slope-coordinate vector for knot values ``psi``."""
        seg_slopes = np.diff(psi) / self.length
        counts = np.diff(self.idx)
        v = np.empty(self.sample.n)
        v[0] = psi[0]
        v[1:] = np.repeat(seg_slopes, counts)
        return v

    def kinks(self, psi):
        s = np.diff(psi) / self.length
        return s[:-1] - s[1:]

    def derivatives(self, psi):
        """Gradient and banded negated Hessian in knot-value coordinates."""
        W = self.sample.total_weight
        L = self.length
        shift = float(np.max(psi))
        a = psi[:-1] - shift
        b = psi[1:] - shift
        _, m1, m2 = _backend.segment_moments(a, b, L)
        _, r1, r2 = _backend.segment_moments(b, a, L)
        u1 = m1 / L                # int u exp
        u2 = m2 / L / L            # int u^2 exp
        v1 = r1 / L                # int (1-u) exp
        v2 = r2 / L / L            # int (1-u)^2 exp
        cross = np.where(b - a <= 0.0, u1 - u2, v1 - v2)
        scale = W * math.exp(shift)
        grad = self.coef.copy()
        grad[1:] -= scale * u1
        grad[:-1] -= scale * v1
        ab = np.zeros((2, psi.size))
        ab[0, 1:] = scale * cross
        ab[1, 1:] += scale * u2
        ab[1, :-1] += scale * v2
        return grad, ab

    def newton_direction(self, psi):
        grad, ab = self.derivatives(psi)
        ridge = 0.0
        top = float(np.max(ab[1]))
        for _ in range(8):
            try:
                d = solveh_banded(ab + np.array([[0.0], [ridge]]), grad)
                break
            except (np.linalg.LinAlgError, ValueError):
                ridge = max(ridge * 100.0, 1e-12 * top, 1e-300)
        else:
            return grad, None
        if not np.all(np.isfinite(d)):
            return grad, None
        return grad, d

    def projected(self, psi):
        """Slope vector of the length-weighted concave projection of ``psi``."""
        slopes = _backend.pava_decreasing(np.diff(psi) / self.length, self.length)
        v = np.empty(self.sample.n)
        v[0] = psi[0]
        v[1:] = np.repeat(slopes, np.diff(self.idx))
        return v

    def without(self, which, psi):
        """Slope vector after deleting knot ``which`` from the face."""
        idx = np.delete(self.idx, which)
        seg_slopes = np.diff(np.delete(psi, which)) / np.diff(self.sample.points[idx])
        v = np.empty(self.sample.n)
        v[0] = psi[0]
        v[1:] = np.repeat(seg_slopes, np.diff(idx))
        return v


def _noise(value):
    # objective differences below this are rounding, not progress
    return 1e-11 * max(1.0, abs(value))


def _refine(v, value, sample, config, extra=()):
    """Newton iterations on the current face; returns ``(v, value, improved)``.

    Knots whose kink would turn negative are removed (ratio test).
    Near the optimum, where objective gains drop below rounding, a full
    step is accepted when the directional derivative shows it has not
    overshot the line maximum.
    """
    face = _Face(v, sample, extra)
    improved = False
    for _ in range(config.newton_steps):
        grad, d = face.newton_direction(face.psi)
        if d is None:
            break
        slope = float(np.dot(grad, d))
        if not slope > 0.0 or np.max(np.abs(grad)) <= 1e-3 * config.tol_stationarity:
            break
        kink = face.kinks(face.psi)
        dkink = face.kinks(face.psi + d) - kink
        max_step = 1.0
        blocking = None
        shrinking = dkink < 0.0
        if np.any(shrinking):
            ratios = np.full(kink.size, np.inf)
            ratios[shrinking] = kink[shrinking] / -dkink[shrinking]
            j = int(np.argmin(ratios))
            if ratios[j] < 1.0:
                max_step = max(float(ratios[j]), 0.0)
                blocking = j + 1
        if blocking is not None:
            arc = face.projected(face.psi + d)
            trial = objective(ConcaveParams.from_vector(arc), sample).value
            if trial > value and trial >= value + config.armijo_c * slope:
                v, value = arc, trial
                improved = True
                face = _Face(v, sample)
                continue
        if max_step == 0.0:
            v = face.without(blocking, face.psi)
            value = objective(ConcaveParams.from_vector(v), sample).value
            face = _Face(v, sample)
            continue
        accepted = None
        t = max_step
        for _ in range(config.max_backtrack):
            psi_t = face.psi + t * d
            if blocking is not None and t == max_step:
                cand = face.without(blocking, psi_t)
            else:
                cand = face.to_vector(psi_t)
            trial = objective(ConcaveParams.from_vector(cand), sample).value
            if trial > value and trial >= value + config.armijo_c * t * slope:
                accepted = cand, trial
                break
            if abs(trial - value) <= _noise(value):
                ahead = float(np.dot(face.derivatives(psi_t)[0], d))
                if ahead >= -0.5 * slope:
                    accepted = cand, trial
                    break
            t *= config.backtrack_factor
            if t * slope < _noise(value):
                break
        if accepted is None:
            break
        v, value = accepted
        improved = True
        face = _Face(v, sample)
    return v, value, improved


def fit_mle(sample: WeightedSample, config: SolverConfig = SolverConfig(),
            warm_start: "LogConcaveFit | None" = None) -> LogConcaveFit:
    """Maximum-likelihood log-concave density for a weighted sample.

    Non-convergence is reported through ``fit.report.converged`` rather than
    raised.

    Parameters
    ----------
    sample : WeightedSample
    config : SolverConfig
    warm_start : LogConcaveFit, optional
        A previous fit whose support covers ``sample``; its log-density
        restricted to the new points is used as the starting iterate.

    Raises
    ------
    SolverFailure
        The objective became nonfinite at a feasible iterate.
    """
    start = _restrict(warm_start, sample) if warm_start is not None else None
    if start is None:
        start = _coarse_start(sample)
    v = _normalize(start, sample)
    value = objective(ConcaveParams.from_vector(v), sample).value
    if not math.isfinite(value):
        raise SolverFailure("objective nonfinite at the starting point")
    trace = [value]
    residual = math.inf
    converged = False
    iterations = 0
    inserted = ()
    for iterations in range(1, config.max_iter + 1):
        v, value, refined = _refine(v, value, sample, config, inserted)
        if refined:
            current = objective(ConcaveParams.from_vector(v), sample, gradient=True)
            residual = stationarity_residual(ConcaveParams.from_vector(v), sample,
                                             current.gradient)
            change = abs(current.value - trace[-1]) / max(1.0, abs(current.value))
            if residual <= config.tol_stationarity and change <= config.tol_objective:
                trace.append(current.value)
                converged = True
                break
        params, accepted = step(ConcaveParams.from_vector(v), sample, config)
        v = params.as_vector()
        shifted = _normalize(v, sample)
        current = objective(ConcaveParams.from_vector(shifted), sample, gradient=True)
        if current.value >= value or accepted:
            v = shifted
        else:
            current = objective(ConcaveParams.from_vector(v), sample, gradient=True)
        value = current.value
        if not math.isfinite(value):
            raise SolverFailure(f"objective nonfinite at iteration {iterations}")
        change = abs(value - trace[-1]) / max(1.0, abs(value))
        trace.append(value)
        residual = stationarity_residual(ConcaveParams.from_vector(v), sample,
                                         current.gradient)
        if residual <= config.tol_stationarity and change <= config.tol_objective:
            converged = True
            break
        inserted = _violations(v, current.gradient, config.tol_stationarity)
        if not accepted and not refined and len(inserted) == 0:
            converged = residual <= config.tol_stationarity
            break
    if not converged:
        log.warning("log-concave fit stopped after %d iterations, residual %.3g",
                    iterations, residual)
    report = SolverReport(iterations, trace, residual, converged)
    return _make_fit(v, sample, report)


def _make_fit(v, sample, report):
    phi = params_to_knots(ConcaveParams.from_vector(v), sample)
    shift, m0, _, _ = segment_integrals(phi, sample.spacings)
    total = float(m0.sum())
    phi = phi - shift - math.log(total)
    cdf = np.concatenate(([0.0], np.cumsum(m0) / total))
    cdf[-1] = 1.0
    phi.setflags(write=False)
    cdf.setflags(write=False)
    return LogConcaveFit(sample.points, phi, cdf, sample, report)
