import math

import numpy as np
import pytest
from scipy.stats import multivariate_normal, norm

from logconcave.core import prepare_sample
from logconcave.errors import DegenerateMixture, InvalidData
from logconcave.mixture import (CopulaComponent, EmConfig, GaussianComponent, MixtureModel,
                                classify, copula_em_fit, copula_logdensity, em_fit,
                                gaussian_em_fit, posterior, shrink_correlation,
                                weighted_correlation)
from logconcave.solver import fit_mle
from tests.oracles import make_fit

FAST = EmConfig(restarts=2, max_em_iter=100)


def _model(components, pi, kind="logconcave"):
    return MixtureModel(kind, np.asarray(pi, dtype=float), components, math.nan, [])


def _errors(labels, truth):
    # two-cluster label switching
    return int(min(np.sum(labels != truth), np.sum(labels == truth)))


@pytest.fixture(scope="module")
def separated():
    rng = np.random.default_rng(21)
    x = np.concatenate([rng.normal(0, 0.5, 200), rng.normal(10, 0.5, 200)])
    return x, np.r_[np.zeros(200, int), np.ones(200, int)]


# ---------------------------------------------------------------- posterior / classify

def test_posterior_identical_components():
    f = make_fit([0.0, 1.0, 2.0], [0.0, 0.3, -0.4])
    post = posterior(_model([f, f], [0.3, 0.7]), 0.8)
    np.testing.assert_allclose(post, [0.3, 0.7], atol=1e-15)


def test_posterior_single_component():
    f = make_fit([0.0, 1.0], [0.0, 0.0])
    np.testing.assert_allclose(posterior(_model([f], [1.0]), [0.2, 0.9]), [[1.0], [1.0]])


def test_posterior_density_ratio():
    # f1 = 2 f2 on [0, 0.5]: uniform on [0, 0.5] versus uniform on [0, 1]
    f1 = make_fit([0.0, 0.5], [0.0, 0.0])
    f2 = make_fit([0.0, 1.0], [0.0, 0.0])
    np.testing.assert_allclose(posterior(_model([f1, f2], [0.5, 0.5]), 0.25), [2 / 3, 1 / 3])


def test_posterior_outside_all_supports_is_prior():
    f = make_fit([0.0, 1.0], [0.0, 0.0])
    g = make_fit([2.0, 3.0], [0.0, 0.0])
    np.testing.assert_allclose(posterior(_model([f, g], [0.4, 0.6]), 10.0), [0.4, 0.6])


def test_posterior_rows_sum_to_one():
    f = make_fit([0.0, 1.0, 2.0], [0.0, 0.3, -0.4])
    g = make_fit([0.5, 3.0], [0.0, -1.0])
    p = posterior(_model([f, g], [0.5, 0.5]), np.linspace(-1, 4, 50))
    np.testing.assert_allclose(p.sum(axis=1), 1.0)


def test_classify_ties_to_lower_index():
    f = make_fit([0.0, 1.0], [0.0, 0.0])
    assert classify(_model([f, f], [0.5, 0.5]), 0.3)[0] == 0
    g = make_fit([0.0, 1.0], [0.0, -1.0])
    # larger prior wins where densities are comparable
    assert classify(_model([f, g], [0.7, 0.3]), [0.1])[0] == 0


# ---------------------------------------------------------------- em_fit

def test_em_k1_equals_single_fit():
    x = np.random.default_rng(4).normal(size=300)
    model = em_fit(x, 1, FAST)
    ref = fit_mle(prepare_sample(x))
    np.testing.assert_allclose(model.components[0].log_density, ref.log_density, atol=1e-8)
    np.testing.assert_array_equal(model.pi, [1.0])


def test_em_separated_clusters(separated):
    x, truth = separated
    model = em_fit(x, 2, FAST)
    assert _errors(classify(model, x), truth) == 0
    np.testing.assert_allclose(model.pi, [0.5, 0.5], atol=1e-6)


def test_em_loglik_monotone(separated):
    x, _ = separated
    rng = np.random.default_rng(8)
    data = np.concatenate([rng.normal(0, 1, 150), 2 + rng.gamma(2, 1, 150)])
    model = em_fit(data, 2, FAST)
    assert np.all(np.diff(model.loglik_trace) >= -1e-9)
    assert model.loglik == model.loglik_trace[-1]
    assert model.loglik == pytest.approx(model.loglikelihood(data), rel=1e-12)


def test_em_deterministic():
    x = np.random.default_rng(2).normal(size=120)
    x[:60] += 5
    a = em_fit(x, 2, FAST)
    b = em_fit(x, 2, FAST)
    assert a.loglik_trace == b.loglik_trace
    assert a.components[0].log_density.tobytes() == b.components[0].log_density.tobytes()


def test_em_too_few_points():
    with pytest.raises(InvalidData):
        em_fit([0.0, 1.0, 2.0, 3.0, 4.0], 2)
    with pytest.raises(InvalidData):
        em_fit(np.arange(10.0), 0)


def test_em_collapsing_components():
    x = np.random.default_rng(0).normal(size=40)
    with pytest.raises(DegenerateMixture):
        em_fit(x, 2, EmConfig(restarts=2, min_component_weight=0.9))


def test_em_config_validation():
    with pytest.raises(InvalidData):
        EmConfig(restarts=0)
    with pytest.raises(InvalidData):
        EmConfig(tol_loglik=0.0)
    with pytest.raises(InvalidData):
        EmConfig(seed=-1)


# ---------------------------------------------------------------- gaussian baseline

def test_gaussian_k1_closed_form():
    x = np.random.default_rng(6).gamma(3.0, size=200)
    model = gaussian_em_fit(x, 1, FAST)
    comp = model.components[0]
    assert comp.mean[0] == pytest.approx(x.mean())
    assert math.sqrt(comp.cov[0, 0]) == pytest.approx(x.std())


def test_gaussian_separated(separated):
    x, truth = separated
    assert _errors(classify(gaussian_em_fit(x, 2, FAST), x), truth) == 0


def test_gaussian_multivariate_logpdf():
    mean = np.array([0.5, -1.0])
    cov = np.array([[2.0, 0.3], [0.3, 0.5]])
    x = np.random.default_rng(1).normal(size=(5, 2))
    np.testing.assert_allclose(GaussianComponent(mean, cov).logpdf(x),
                               multivariate_normal(mean, cov).logpdf(x))


def test_gaussian_deterministic(separated):
    x, _ = separated
    assert gaussian_em_fit(x, 2, FAST).loglik_trace == gaussian_em_fit(x, 2, FAST).loglik_trace


# ---------------------------------------------------------------- copula

def test_copula_logdensity_identity_is_zero():
    z = np.random.default_rng(0).normal(size=(4, 3))
    np.testing.assert_allclose(copula_logdensity(z, np.eye(3)), 0.0, atol=1e-14)


def test_copula_logdensity_formula():
    corr = np.array([[1.0, 0.6], [0.6, 1.0]])
    z = np.random.default_rng(1).normal(size=(6, 2))
    direct = multivariate_normal([0, 0], corr).logpdf(z) - norm.logpdf(z).sum(axis=1)
    np.testing.assert_allclose(copula_logdensity(z, corr), direct, atol=1e-12)


def test_copula_component_density_is_product():
    rng = np.random.default_rng(3)
    data = rng.normal(size=(200, 2))
    marg = [fit_mle(prepare_sample(data[:, j])) for j in range(2)]
    corr = np.array([[1.0, -0.4], [-0.4, 1.0]])
    comp = CopulaComponent(marg, corr)
    x = np.array([[0.1, -0.2], [0.5, 0.7], [-1.0, 0.3]])
    z = norm.ppf(np.column_stack([marg[j].cdf(x[:, j]) for j in range(2)]))
    direct = (marg[0].logpdf(x[:, 0]) + marg[1].logpdf(x[:, 1])
              + multivariate_normal([0, 0], corr).logpdf(z) - norm.logpdf(z).sum(axis=1))
    np.testing.assert_allclose(comp.logpdf(x), direct, atol=1e-10)


def test_shrink_correlation():
    bad = np.array([[1.0, 0.9, -0.9], [0.9, 1.0, 0.9], [-0.9, 0.9, 1.0]])
    fixed = shrink_correlation(bad)
    assert np.linalg.eigvalsh(fixed).min() >= 1e-6 - 1e-12
    np.testing.assert_allclose(np.diag(fixed), 1.0)
    good = np.array([[1.0, 0.2], [0.2, 1.0]])
    np.testing.assert_array_equal(shrink_correlation(good), good)


def test_weighted_correlation_unit_weights():
    z = np.random.default_rng(2).normal(size=(100, 2))
    np.testing.assert_allclose(weighted_correlation(z, np.ones(100)), np.corrcoef(z.T), atol=1e-12)


def test_copula_independent_coordinates():
    x = np.random.default_rng(10).normal(size=(1000, 2))
    model = copula_em_fit(x, 1, FAST)
    assert abs(model.components[0].correlation[0, 1]) < 0.1


def test_copula_bivariate_normal():
    rho = 0.6
    x = np.random.default_rng(11).multivariate_normal([0, 0], [[1, rho], [rho, 1]], size=600)
    model = copula_em_fit(x, 1, FAST)
    comp = model.components[0]
    assert abs(comp.correlation[0, 1] - rho) < 0.1
    grid = np.linspace(-1, 1, 21)
    for m in comp.marginals:
        assert np.max(np.abs(m.pdf(grid) - norm.pdf(grid))) < 0.1


def test_copula_two_clusters():
    rng = np.random.default_rng(12)
    a = rng.multivariate_normal([0, 0], [[1, 0.5], [0.5, 1]], size=150)
    b = rng.multivariate_normal([8, 8], [[1, -0.5], [-0.5, 1]], size=150)
    model = copula_em_fit(np.vstack([a, b]), 2, FAST)
    truth = np.r_[np.zeros(150, int), np.ones(150, int)]
    # a component's own extreme points get clamped normal scores, so a
    # boundary point or two may switch sides; the bulk must not
    assert _errors(classify(model, np.vstack([a, b])), truth) <= 3
    assert model.dim == 2
    p = posterior(model, np.array([0.0, 0.0]))
    assert p.shape == (2,)


def test_copula_needs_matrix():
    with pytest.raises(InvalidData):
        copula_em_fit(np.arange(20.0), 1)
