"""Density, CDF, quantile, exact sampling, mode and hazard of a fitted density.

The fitted log-density is linear on each segment between adjacent knots,
so every quantity has a closed form per segment. Functions accept scalars
or arrays and return the same shape.
"""
import numpy as np

from .errors import InvalidData, OutOfSupport

# slopes (per unit u) this small are treated as flat segments in the sampler
THETA_ZERO = 1e-12


def make_rng(seed=0):
    """Seeded uniform stream used by :func:`sample`."""
    return np.random.Generator(np.random.PCG64(seed))


def _as_finite(x):
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise InvalidData("evaluation points must be finite")
    return arr


def _segment_mass(phi_left, slope, u):
    """``int_0^u exp(phi_left + slope * r) dr``, overflow-free for normalized fits."""
    phi_left, slope, u = np.broadcast_arrays(*(np.asarray(a, dtype=float)
                                               for a in (phi_left, slope, u)))
    t = slope * u
    out = np.exp(phi_left) * u
    pos = t > 0
    neg = t < 0
    out = np.where(pos, np.exp(phi_left + np.where(pos, t, 0.0))
                   * -np.expm1(-np.where(pos, t, 0.0)) / np.where(pos, slope, 1.0), out)
    out = np.where(neg, np.exp(phi_left) * np.expm1(np.where(neg, t, 0.0))
                   / np.where(neg, slope, 1.0), out)
    return out


def _locate(fit, x):
    j = np.searchsorted(fit.knots, x, side="right") - 1
    return np.clip(j, 0, fit.knots.size - 2)


def _segment_masses(fit):
    dx = np.diff(fit.knots)
    return _segment_mass(fit.log_density[:-1], fit.slopes, dx)


def _tail_masses(fit):
    """Mass right of each knot, summed from the right end."""
    m = _segment_masses(fit)
    tail = np.zeros(fit.knots.size)
    tail[:-1] = np.cumsum(m[::-1])[::-1]
    return tail / tail[0]


def logpdf(fit, x):
    x = _as_finite(x)
    inside = (x >= fit.knots[0]) & (x <= fit.knots[-1])
    vals = np.interp(x, fit.knots, fit.log_density)
    return np.where(inside, vals, -np.inf)[()]


def pdf(fit, x):
    """Fitted density; zero outside the data range."""
    return np.exp(logpdf(fit, x))[()]


def cdf(fit, x):
    x = _as_finite(x)
    j = _locate(fit, x)
    u = np.clip(x - fit.knots[j], 0.0, np.diff(fit.knots)[j])
    F = fit.cdf_at_knots[j] + _segment_mass(fit.log_density[j], fit.slopes[j], u)
    F = np.where(x <= fit.knots[0], 0.0, F)
    F = np.where(x >= fit.knots[-1], 1.0, F)
    return np.clip(F, 0.0, 1.0)[()]


def sf(fit, x):
    """Survival function ``1 - cdf`` computed from the right tail."""
    x = _as_finite(x)
    j = _locate(fit, x)
    dx = np.diff(fit.knots)
    u = np.clip(x - fit.knots[j], 0.0, dx[j])
    phi_x = fit.log_density[j] + fit.slopes[j] * u
    S = _tail_masses(fit)[j + 1] + _segment_mass(phi_x, fit.slopes[j], dx[j] - u)
    S = np.where(x <= fit.knots[0], 1.0, S)
    S = np.where(x >= fit.knots[-1], 0.0, S)
    return np.clip(S, 0.0, 1.0)[()]


def _log1p_ratio(z):
    """``log1p(z) / z`` with the limit 1 at 0."""
    z = np.asarray(z, dtype=float)
    small = np.abs(z) < 1e-8
    safe = np.where(small, 1.0, z)
    return np.where(small, 1.0 - 0.5 * z, np.log1p(safe) / safe)


def quantile(fit, p):
    """Inverse CDF on ``[0, 1]``, closed form within each segment."""
    p = _as_finite(p)
    if np.any((p < 0.0) | (p > 1.0)):
        raise InvalidData("probabilities must lie in [0, 1]")
    F = fit.cdf_at_knots
    j = np.clip(np.searchsorted(F, p, side="right") - 1, 0, fit.knots.size - 2)
    r = np.maximum(p - F[j], 0.0)
    scaled = r * np.exp(-fit.log_density[j])
    u = scaled * _log1p_ratio(fit.slopes[j] * scaled)
    dx = np.diff(fit.knots)[j]
    return (fit.knots[j] + np.clip(u, 0.0, dx))[()]


def segment_fraction(theta, u):
    """Position within a segment whose log-density rises by ``theta``.

    Maps a uniform ``u`` to ``log(1 + (exp(theta) - 1) u) / theta``, or to
    ``u`` itself when ``|theta| < THETA_ZERO``.
    """
    theta, u = np.broadcast_arrays(np.asarray(theta, dtype=float),
                                   np.asarray(u, dtype=float))
    flat = np.abs(theta) < THETA_ZERO
    th = np.where(flat, 1.0, theta)
    steep = th > 1.0
    with np.errstate(divide="ignore"):
        # for steep rises rewrite to avoid overflow of exp(theta)
        rising = (th + np.log(u + (1.0 - u) * np.exp(-np.where(steep, th, 0.0)))) / th
        mild = np.log1p(np.expm1(np.where(steep, 0.0, th)) * u) / th
    v = np.where(steep, rising, mild)
    return np.where(flat, u, np.clip(v, 0.0, 1.0))[()]


def sample(fit, rng, m):
    """Draw ``m`` exact samples.

    A segment ``J`` is chosen with probability equal to its mass, then the
    position within it is drawn by inverting the exponential shape.
    """
    if m < 0:
        raise InvalidData("sample size must be nonnegative")
    F = fit.cdf_at_knots
    pick = rng.random(m)
    u = rng.random(m)
    # J-1 as a 0-based left-knot index
    j = np.clip(np.searchsorted(F, pick, side="left") - 1, 0, fit.knots.size - 2)
    theta = fit.log_density[j + 1] - fit.log_density[j]
    v = segment_fraction(theta, u)
    return fit.knots[j] + (fit.knots[j + 1] - fit.knots[j]) * v


def mode(fit):
    """Location of the maximum; midpoint when the top is flat."""
    phi = fit.log_density
    top = phi.max()
    at_top = np.flatnonzero(phi >= top - 1e-12 * (1.0 + abs(top)))
    return 0.5 * (fit.knots[at_top[0]] + fit.knots[at_top[-1]])


def hazard(fit, x):
    """``pdf / (1 - cdf)`` on ``[x_1, x_n)``."""
    x = _as_finite(x)
    if np.any((x < fit.knots[0]) | (x >= fit.knots[-1])):
        raise OutOfSupport("hazard is defined on [x_1, x_n) only")
    return (pdf(fit, x) / sf(fit, x))[()]
