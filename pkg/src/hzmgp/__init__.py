"""Bayesian cure-rate survival modeling with HZMGP discrete frailty.

A Weibull baseline hazard is compounded with a hurdle zero-modified
generalized Poisson frailty, giving a cure fraction (frailty zero) and
closed-form marginal survival quantities through the Lambert W function.
Inference runs on a self-contained gradient-based MCMC sampler; posterior
draws feed a per-subject classification of the zero-modification regime.
"""

from .classify import (ClassificationConfig, PopulationSummary,
                       SubjectClassification, classify_population,
                       classify_subject, threshold)
from .diagnostics import compute_ess, compute_rhat
from .frailty import (GpParams, HzmgpParams, ZeroModClass, ZmpsParams,
                      classify_by_value, hzmgp_log_pmf, hzmgp_mean,
                      hzmgp_pgf, hzmgp_variance, sample_frailty)
from .inference import (ModelData, PriorSpec, UnconstrainedParams,
                        grad_log_posterior, log_posterior, make_posterior)
from .sampler import (PosteriorDraws, SamplerConfig, SamplerError,
                      run_sampler, sample_nuts)
from .simulate import (SCENARIO_I, SCENARIO_II, ScenarioSpec,
                       SimulationReport, generate_dataset, run_study)
from .special import lambert_w0
from .survival import (FrailtySurvivalParams, RegressionCoefficients,
                       SubjectRecord, WeibullBaseline, log_likelihood,
                       marginal_density, marginal_hazard, marginal_survival)

__version__ = "0.1.0"

__all__ = [
    "ClassificationConfig", "PopulationSummary", "SubjectClassification",
    "classify_population", "classify_subject", "threshold",
    "compute_ess", "compute_rhat",
    "GpParams", "HzmgpParams", "ZeroModClass", "ZmpsParams",
    "classify_by_value", "hzmgp_log_pmf", "hzmgp_mean", "hzmgp_pgf",
    "hzmgp_variance", "sample_frailty",
    "ModelData", "PriorSpec", "UnconstrainedParams", "grad_log_posterior",
    "log_posterior", "make_posterior",
    "PosteriorDraws", "SamplerConfig", "SamplerError", "run_sampler",
    "sample_nuts",
    "SCENARIO_I", "SCENARIO_II", "ScenarioSpec", "SimulationReport",
    "generate_dataset", "run_study",
    "lambert_w0",
    "FrailtySurvivalParams", "RegressionCoefficients", "SubjectRecord",
    "WeibullBaseline", "log_likelihood", "marginal_density",
    "marginal_hazard", "marginal_survival",
    "__version__",
]
