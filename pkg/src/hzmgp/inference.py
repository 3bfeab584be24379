"""Bayesian machinery: unconstrained parameterization, posterior, gradient.

Sampling happens on the unconstrained vector
(beta_omega, beta_mu, theta_phi, theta_lam, theta_gam) with phi, lambda,
gamma recovered by exponentiation. Priors are independent normals placed
directly on the unconstrained coordinates, so no Jacobian correction is
applied. Gradients are exact, computed by forward-mode dual numbers with
a per-subject 5-dimensional tangent: the two linear predictors plus the
three global log-scale parameters, chained back through the design
matrices.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import dual as dm
from .survival import subject_log_terms

__all__ = [
    "PriorSpec", "ModelData", "UnconstrainedParams",
    "parameter_names", "natural_names", "log_posterior",
    "value_and_grad", "grad_log_posterior", "make_posterior",
]

_LOG_FLOOR = 1e-300


@dataclass(frozen=True)
class PriorSpec:
    """Independent normal prior for every unconstrained coordinate."""

    mean: float = 0.0
    sd: float = 10.0

    def __post_init__(self):
        if not (self.sd > 0.0):
            raise ValueError("PriorSpec: sd must be positive")


@dataclass(frozen=True)
class UnconstrainedParams:
    """Sampler-space parameter vector, split by block."""

    beta_omega: np.ndarray
    beta_mu: np.ndarray
    theta_phi: float
    theta_lam: float
    theta_gam: float

    def to_vector(self):
        return np.concatenate([self.beta_omega, self.beta_mu,
                               [self.theta_phi, self.theta_lam,
                                self.theta_gam]])

    @staticmethod
    def from_vector(vec, p_omega, p_mu):
        vec = np.asarray(vec, dtype=float)
        kw = p_omega + 1
        km = p_mu + 1
        if vec.shape[0] != kw + km + 3:
            raise ValueError("UnconstrainedParams: wrong vector length")
        return UnconstrainedParams(
            beta_omega=vec[:kw], beta_mu=vec[kw:kw + km],
            theta_phi=float(vec[kw + km]), theta_lam=float(vec[kw + km + 1]),
            theta_gam=float(vec[kw + km + 2]))


def parameter_names(omega_covariates, mu_covariates):
    """Unconstrained-space parameter names, matching vector order."""
    names = ["beta_omega[intercept]"]
    names += [f"beta_omega[{c}]" for c in omega_covariates]
    names += ["beta_mu[intercept]"]
    names += [f"beta_mu[{c}]" for c in mu_covariates]
    names += ["theta_phi", "theta_lambda", "theta_gamma"]
    return names


def natural_names(omega_covariates, mu_covariates):
    """Natural-scale names: betas unchanged, phi/lambda/gamma exponentiated."""
    names = parameter_names(omega_covariates, mu_covariates)
    return names[:-3] + ["phi", "lambda", "gamma"]


@dataclass
class ModelData:
    """Immutable fitting arrays: times, event flags, design matrices.

    x_omega and x_mu both carry a leading intercept column; they may share
    storage when the two predictors use the same covariates.
    """

    t: np.ndarray
    delta: np.ndarray
    x_omega: np.ndarray
    x_mu: np.ndarray
    log_t: np.ndarray = field(init=False)

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float)
        self.delta = np.asarray(self.delta, dtype=float)
        self.x_omega = np.asarray(self.x_omega, dtype=float)
        self.x_mu = np.asarray(self.x_mu, dtype=float)
        n = self.t.shape[0]
        if self.delta.shape[0] != n or self.x_omega.shape[0] != n \
                or self.x_mu.shape[0] != n:
            raise ValueError("ModelData: inconsistent row counts")
        if np.any(self.t < 0) or np.any(self.t[self.delta > 0.5] <= 0):
            raise ValueError("ModelData: event times must be positive")
        with np.errstate(divide="ignore"):
            self.log_t = np.where(self.t > 0, np.log(np.maximum(self.t, 1e-300)),
                                  -np.inf)

    @property
    def dim(self):
        return self.x_omega.shape[1] + self.x_mu.shape[1] + 3

    def split(self, vec):
        kw = self.x_omega.shape[1]
        km = self.x_mu.shape[1]
        return (vec[:kw], vec[kw:kw + km], vec[kw + km], vec[kw + km + 1],
                vec[kw + km + 2])


def _log_prior(vec, prior: PriorSpec):
    z = (vec - prior.mean) / prior.sd
    return float(-0.5 * np.sum(z * z)
                 - vec.shape[0] * math.log(prior.sd * math.sqrt(2.0 * math.pi)))


def log_posterior(theta, data: ModelData, prior: PriorSpec):
    """Log posterior density (including normal-prior constants)."""
    vec = np.asarray(theta, dtype=float)
    bw, bm, tphi, tlam, tgam = data.split(vec)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        terms = subject_log_terms(data.x_omega @ bw, data.x_mu @ bm,
                                  float(tphi), float(tlam), float(tgam),
                                  data.log_t, data.delta)
        lik = float(np.sum(terms))
    if math.isnan(lik):
        lik = -math.inf
    return lik + _log_prior(vec, prior)


def value_and_grad(theta, data: ModelData, prior: PriorSpec):
    """(log posterior, gradient) via forward-mode dual numbers.

    Returns (-inf, None) when the posterior is not finite or the gradient
    contains non-finite entries, so samplers can treat the point as
    divergent.
    """
    vec = np.asarray(theta, dtype=float)
    bw, bm, tphi, tlam, tgam = data.split(vec)
    n = data.t.shape[0]
    k = 5
    eta_w = dm.Dual(data.x_omega @ bw, _basis(k, 0, n))
    eta_m = dm.Dual(data.x_mu @ bm, _basis(k, 1, n))
    d_phi = dm.Dual(float(tphi), _basis(k, 2, 1))
    d_lam = dm.Dual(float(tlam), _basis(k, 3, 1))
    d_gam = dm.Dual(float(tgam), _basis(k, 4, 1))
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        terms = subject_log_terms(eta_w, eta_m, d_phi, d_lam, d_gam,
                                  data.log_t, data.delta)
        lik = float(np.sum(terms.val))
        grad = np.concatenate([
            data.x_omega.T @ terms.eps[0],
            data.x_mu.T @ terms.eps[1],
            terms.eps[2:5].sum(axis=1),
        ])
    logp = lik + _log_prior(vec, prior)
    grad = grad - (vec - prior.mean) / prior.sd ** 2
    if not math.isfinite(logp) or not np.all(np.isfinite(grad)):
        return -math.inf, None
    return logp, grad


def _basis(k, index, n):
    eps = np.zeros((k, n))
    eps[index] = 1.0
    return eps


def grad_log_posterior(theta, data: ModelData, prior: PriorSpec):
    """Exact gradient of log_posterior; errors where the posterior is -inf."""
    logp, grad = value_and_grad(theta, data, prior)
    if grad is None:
        raise ValueError("grad_log_posterior: log posterior is not finite "
                         "at the requested point")
    return grad


def make_posterior(data: ModelData, prior: PriorSpec):
    """Callable theta -> (logp, grad) bound to fixed data, for samplers."""
    def logp_and_grad(theta):
        return value_and_grad(theta, data, prior)
    return logp_and_grad
