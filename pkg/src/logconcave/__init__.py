"""Maximum-likelihood estimation of log-concave densities.

Fits the nonparametric MLE under log-concavity, evaluates and samples the
fitted piecewise-exponential density, and clusters data with mixtures of
log-concave components.
"""
from ._backend import available_backends, current_backend, use_backend
from .core import (ConcaveParams, ObjectiveValue, WeightedSample, gradient_check, knots_to_params,
                   objective, params_to_knots, prepare_sample, project_cone, project_params)
from .distribution import cdf, hazard, logpdf, make_rng, mode, pdf, quantile, sample, sf
from .errors import (DegenerateMixture, DegenerateSample, InvalidData, InvalidParams,
                     LogConcaveError, OutOfSupport, SolverFailure)
from .mixture import (EmConfig, MixtureModel, classify, copula_em_fit, em_fit,
                      gaussian_em_fit, posterior)
from .solver import (LogConcaveFit, SolverConfig, SolverReport, fit_mle, initial_params,
                     stationarity_residual, step)

__version__ = "0.1.0"

__all__ = [
    "ConcaveParams", "DegenerateMixture", "DegenerateSample", "EmConfig", "InvalidData",
    "InvalidParams", "LogConcaveError", "LogConcaveFit", "MixtureModel", "ObjectiveValue",
    "OutOfSupport", "SolverConfig", "SolverFailure", "SolverReport", "WeightedSample",
    "available_backends", "cdf", "classify", "copula_em_fit", "current_backend", "em_fit",
    "fit_mle", "gaussian_em_fit", "gradient_check", "hazard", "initial_params",
    "knots_to_params", "logpdf", "make_rng", "mode", "objective", "params_to_knots", "pdf",
    "posterior", "prepare_sample", "project_cone", "project_params", "quantile", "sample", "sf",
    "stationarity_residual", "step", "use_backend",
]
