"""Model-based clustering with log-concave component densities.

Three EM variants share one loop: univariate log-concave components, a
Gaussian baseline (any dimension), and a normal-copula model whose
components have log-concave marginals. The M-step for log-concave
components is the weighted MLE with responsibilities as weights.
"""
from dataclasses import dataclass, field
import logging
import math
from typing import Optional

import numpy as np
from scipy.special import logsumexp, ndtri

from .core import prepare_sample
from .distribution import cdf as fit_cdf, logpdf as fit_logpdf
from .errors import DegenerateMixture, DegenerateSample, InvalidData
from .solver import LogConcaveFit, SolverConfig, fit_mle

log = logging.getLogger(__name__)

# clamp for normal scores of marginal CDF values
SCORE_EPS = 1e-6
MIN_EIGENVALUE = 1e-6
# mass given to the other components when smoothing the initial partition
INIT_SMOOTHING = 0.05


@dataclass(frozen=True)
class EmConfig:
    max_em_iter: int = 200
    tol_loglik: float = 1e-8
    restarts: int = 5
    min_component_weight: Optional[float] = None  # None means 2/n
    seed: int = 0
    solver: SolverConfig = field(default_factory=SolverConfig)

    def __post_init__(self):
        if self.max_em_iter < 1 or self.restarts < 1:
            raise InvalidData("max_em_iter and restarts must be positive")
        if self.tol_loglik <= 0:
            raise InvalidData("tol_loglik must be positive")
        if self.min_component_weight is not None and self.min_component_weight <= 0:
            raise InvalidData("min_component_weight must be positive")
        if self.seed < 0:
            raise InvalidData("seed must be nonnegative")


@dataclass(frozen=True)
class CopulaComponent:
    """Log-concave marginals coupled by a normal copula."""

    marginals: list
    correlation: np.ndarray

    def normal_scores(self, x):
        u = np.column_stack([fit_cdf(m, x[:, j]) for j, m in enumerate(self.marginals)])
        return ndtri(np.clip(u, SCORE_EPS, 1.0 - SCORE_EPS))

    def logpdf(self, x):
        x = np.atleast_2d(x)
        marg = sum(fit_logpdf(m, x[:, j]) for j, m in enumerate(self.marginals))
        return marg + copula_logdensity(self.normal_scores(x), self.correlation)


@dataclass(frozen=True)
class GaussianComponent:
    mean: np.ndarray
    cov: np.ndarray

    def logpdf(self, x):
        x = np.atleast_2d(x)
        d = self.mean.size
        chol = np.linalg.cholesky(self.cov)
        z = np.linalg.solve(chol, (x - self.mean).T)
        logdet = 2.0 * np.sum(np.log(np.diag(chol)))
        return -0.5 * (np.sum(z * z, axis=0) + logdet + d * math.log(2 * math.pi))


@dataclass(frozen=True)
class MixtureModel:
    """Fitted mixture.

    ``kind`` is ``"logconcave"``, ``"copula"`` or ``"gaussian"``;
    ``components`` holds :class:`LogConcaveFit`, :class:`CopulaComponent`
    or :class:`GaussianComponent` values accordingly.
    """

    kind: str
    pi: np.ndarray
    components: list
    loglik: float
    loglik_trace: list = field(repr=False)
    iterations: int = 0
    converged: bool = False

    @property
    def k(self) -> int:
        return len(self.components)

    @property
    def dim(self) -> int:
        if self.kind == "logconcave":
            return 1
        if self.kind == "copula":
            return len(self.components[0].marginals)
        return self.components[0].mean.size

    def component_logpdf(self, data) -> np.ndarray:
        """``(n, k)`` matrix of component log-densities."""
        x = _as_data(data, self.dim)
        if self.kind == "logconcave":
            cols = [fit_logpdf(c, x[:, 0]) for c in self.components]
        else:
            cols = [c.logpdf(x) for c in self.components]
        return np.column_stack(cols)

    def loglikelihood(self, data) -> float:
        return float(np.sum(_row_logsumexp(self.component_logpdf(data) + np.log(self.pi))))


def _as_data(data, dim):
    x = np.asarray(data, dtype=float)
    if dim == 1:
        x = x.reshape(-1, 1)
    else:
        x = np.atleast_2d(x)
        if x.shape[1] != dim:
            raise InvalidData(f"expected {dim} columns, got {x.shape[1]}")
    if not np.all(np.isfinite(x)):
        raise InvalidData("data contains nonfinite values")
    return x


def _row_logsumexp(a):
    with np.errstate(divide="ignore"):
        return logsumexp(a, axis=1)


def _responsibilities(logdens, pi):
    """Posterior matrix; rows with zero density everywhere fall back to ``pi``."""
    with np.errstate(divide="ignore"):
        joint = logdens + np.log(pi)
    norm = _row_logsumexp(joint)
    dead = ~np.isfinite(norm)
    r = np.exp(joint - np.where(dead, 0.0, norm)[:, None])
    r[dead] = pi
    r /= r.sum(axis=1, keepdims=True)
    return r, norm


def posterior(model: MixtureModel, x) -> np.ndarray:
    """Posterior component probabilities.

    A single observation gives a length-``k`` vector, several give an
    ``(n, k)`` matrix.
    """
    arr = np.asarray(x, dtype=float)
    single = arr.ndim == 0 if model.dim == 1 else arr.ndim == 1
    r, _ = _responsibilities(model.component_logpdf(arr), model.pi)
    return r[0] if single else r


def classify(model: MixtureModel, data) -> np.ndarray:
    """0-based label of the most probable component; ties go to the lower index."""
    r = np.atleast_2d(posterior(model, data))
    return np.argmax(r, axis=1)


def copula_logdensity(z, corr):
    """Log-density of the normal copula at normal scores ``z`` (rows)."""
    chol = np.linalg.cholesky(corr)
    logdet = 2.0 * np.sum(np.log(np.diag(chol)))
    w = np.linalg.solve(chol, z.T)
    quad = np.sum(w * w, axis=0) - np.sum(z * z, axis=1)
    return -0.5 * (logdet + quad)


def shrink_correlation(corr, min_eig=MIN_EIGENVALUE):
    """Blend toward the identity just enough to lift eigenvalues to ``min_eig``."""
    corr = 0.5 * (corr + corr.T)
    lo = float(np.linalg.eigvalsh(corr).min())
    if lo >= min_eig:
        return corr
    lam = (min_eig - lo) / (1.0 - lo)
    out = (1.0 - lam) * corr + lam * np.eye(corr.shape[0])
    np.fill_diagonal(out, 1.0)
    return out


def weighted_correlation(z, w):
    w = w / w.sum()
    mu = w @ z
    zc = z - mu
    cov = (zc * w[:, None]).T @ zc
    sd = np.sqrt(np.diag(cov))
    if np.any(sd <= 0.0):
        return np.eye(z.shape[1])
    corr = cov / np.outer(sd, sd)
    np.fill_diagonal(corr, 1.0)
    return shrink_correlation(corr)


def _initial_partition(x, k, rng):
    """Random hard partition: random cuts along a random projection."""
    n = x.shape[0]
    direction = rng.standard_normal(x.shape[1])
    order = np.argsort(x @ direction, kind="stable")
    cuts = np.sort(rng.choice(np.arange(1, n), size=k - 1, replace=False)) if k > 1 else []
    labels = np.empty(n, dtype=int)
    for m, part in enumerate(np.split(order, cuts)):
        labels[part] = m
    r = np.full((n, k), INIT_SMOOTHING / max(k - 1, 1))
    r[np.arange(n), labels] = 1.0 - INIT_SMOOTHING if k > 1 else 1.0
    return r


class _Degenerate(Exception):
    pass


def _fit_logconcave(x, w, solver, previous):
    keep = w > 0.0
    try:
        sample = prepare_sample(x[keep], w[keep])
    except DegenerateSample as exc:
        raise _Degenerate(str(exc)) from None
    return fit_mle(sample, solver, warm_start=previous)


def _mstep_logconcave(x, r, config, previous):
    comps = []
    for m in range(r.shape[1]):
        prev = previous[m] if previous is not None else None
        comps.append(_fit_logconcave(x[:, 0], r[:, m], config.solver, prev))
    return comps


def _mstep_gaussian(x, r, config, previous):
    comps = []
    total_var = np.var(x, axis=0)
    for m in range(r.shape[1]):
        w = r[:, m] / r[:, m].sum()
        mean = w @ x
        xc = x - mean
        cov = (xc * w[:, None]).T @ xc
        if np.any(np.diag(cov) <= 1e-12 * total_var) or np.linalg.eigvalsh(cov).min() <= 0:
            raise _Degenerate("singular component covariance")
        comps.append(GaussianComponent(mean, cov))
    return comps


def _mstep_copula(x, r, config, previous):
    comps = []
    for m in range(r.shape[1]):
        w = r[:, m]
        prev = previous[m].marginals if previous is not None else [None] * x.shape[1]
        marginals = [_fit_logconcave(x[:, j], w, config.solver, prev[j])
                     for j in range(x.shape[1])]
        comp = CopulaComponent(marginals, np.eye(x.shape[1]))
        z = comp.normal_scores(x)
        keep = w > 0.0
        corr = weighted_correlation(z[keep], w[keep])
        comps.append(CopulaComponent(marginals, corr))
    return comps


_MSTEPS = {
    "logconcave": _mstep_logconcave,
    "gaussian": _mstep_gaussian,
    "copula": _mstep_copula,
}


def _run(kind, x, k, config, rng):
    n = x.shape[0]
    min_weight = config.min_component_weight or 2.0 / n
    mstep = _MSTEPS[kind]
    r = _initial_partition(x, k, rng)
    comps = None
    trace = []
    converged = False
    it = 0
    for it in range(1, config.max_em_iter + 1):
        pi = r.mean(axis=0)
        if np.any(pi < min_weight):
            raise _Degenerate(f"component weight {pi.min():.3g} below {min_weight:.3g}")
        comps = mstep(x, r, config, comps)
        model = MixtureModel(kind, pi, comps, math.nan, [])
        r, norm = _responsibilities(model.component_logpdf(x), pi)
        ll = float(np.sum(norm))
        if not math.isfinite(ll):
            raise _Degenerate("log-likelihood is not finite")
        trace.append(ll)
        if len(trace) > 1 and abs(trace[-1] - trace[-2]) <= config.tol_loglik * abs(trace[-1]):
            converged = True
            break
    return MixtureModel(kind, pi, comps, trace[-1], trace, it, converged)


def _fit(kind, data, k, config, dim):
    if k < 1:
        raise InvalidData("need at least one component")
    best = None
    streams = np.random.SeedSequence(config.seed).spawn(config.restarts)
    for attempt, seq in enumerate(streams):
        try:
            model = _run(kind, data, k, config, np.random.default_rng(seq))
        except _Degenerate as exc:
            log.info("restart %d degenerate: %s", attempt, exc)
            continue
        if best is None or model.loglik > best.loglik:
            best = model
    if best is None:
        raise DegenerateMixture(f"all {config.restarts} restarts collapsed a component")
    return best


def em_fit(data, k, config: EmConfig = EmConfig()) -> MixtureModel:
    """EM with univariate log-concave components; best of ``config.restarts``."""
    x = _as_data(data, 1)
    if np.unique(x).size < 2 * k + 2:
        raise InvalidData(f"need at least {2 * k + 2} distinct values for k={k}")
    return _fit("logconcave", x, k, config, 1)


def gaussian_em_fit(data, k, config: EmConfig = EmConfig()) -> MixtureModel:
    """Normal-component EM baseline; accepts 1-D data or an ``(n, d)`` matrix."""
    arr = np.asarray(data, dtype=float)
    dim = 1 if arr.ndim == 1 else arr.shape[1]
    x = _as_data(arr, dim)
    if x.shape[0] < 2 * k + 2:
        raise InvalidData(f"need at least {2 * k + 2} observations for k={k}")
    return _fit("gaussian", x, k, config, dim)


def copula_em_fit(data, k, config: EmConfig = EmConfig()) -> MixtureModel:
    """EM with log-concave marginals and a normal copula per component."""
    arr = np.asarray(data, dtype=float)
    if arr.ndim != 2 or arr.shape[1] < 2:
        raise InvalidData("copula mode needs an (n, d) matrix with d >= 2; "
                          "use em_fit for univariate data")
    x = _as_data(arr, arr.shape[1])
    for j in range(x.shape[1]):
        if np.unique(x[:, j]).size < 2 * k + 2:
            raise InvalidData(f"column {j} has too few distinct values for k={k}")
    return _fit("copula", x, k, config, x.shape[1])
