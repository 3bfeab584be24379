"""Weibull-baseline survival model with HZMGP discrete frailty.

Marginal quantities come from compounding the baseline survival through the
frailty pgf: S(t) = G_V(S0(t)), with density and hazard in closed form via
the Lambert W function. The censored-data log-likelihood sums delta*log f +
(1-delta)*log S per subject, with omega and mu linked to covariates by
logit and log links.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import dual as dm
from .special import BRANCH_POINT as _BRANCH_POINT
from .special import lambert_w0

__all__ = [
    "WeibullBaseline", "SubjectRecord", "RegressionCoefficients",
    "FrailtySurvivalParams", "baseline_survival", "baseline_hazard",
    "link_omega", "link_mu", "marginal_survival", "marginal_survival_at_s0",
    "marginal_density", "marginal_hazard", "log_likelihood", "pack_dataset",
    "subject_log_terms",
]

# Probabilities inside logs are floored here; underflow yields -inf, not NaN.
_LOG_FLOOR = 1e-300


@dataclass(frozen=True)
class WeibullBaseline:
    """Weibull scale lambda (1/time units) and shape gamma."""

    lam: float
    gamma: float

    def __post_init__(self):
        if not (self.lam > 0.0 and self.gamma > 0.0):
            raise ValueError("WeibullBaseline: lam and gamma must be positive")


@dataclass(frozen=True)
class SubjectRecord:
    """One observation: time, event indicator, covariates (no intercept)."""

    time: float
    event: bool
    covariates: np.ndarray

    def __post_init__(self):
        if self.time < 0.0:
            raise ValueError("SubjectRecord: time must be non-negative")
        if self.event and self.time <= 0.0:
            raise ValueError("SubjectRecord: event times must be positive")


@dataclass(frozen=True)
class RegressionCoefficients:
    """Coefficient vectors (intercept first) for the omega and mu links."""

    beta_omega: np.ndarray
    beta_mu: np.ndarray

    def __post_init__(self):
        if len(self.beta_omega) != len(self.beta_mu):
            raise ValueError("RegressionCoefficients: length mismatch")
        if not (np.all(np.isfinite(self.beta_omega))
                and np.all(np.isfinite(self.beta_mu))):
            raise ValueError("RegressionCoefficients: non-finite entries")


@dataclass(frozen=True)
class FrailtySurvivalParams:
    """Full natural-scale parameter set of the frailty survival model."""

    coefficients: RegressionCoefficients
    phi: float
    baseline: WeibullBaseline

    def __post_init__(self):
        if not (self.phi > 0.0):
            raise ValueError("FrailtySurvivalParams: phi must be positive")


def baseline_survival(t, b: WeibullBaseline):
    """S0(t) = exp(-(lam*t)^gamma)."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("baseline_survival: t must be non-negative")
    return np.exp(-(b.lam * t) ** b.gamma)


def baseline_hazard(t, b: WeibullBaseline):
    """h0(t) = gamma * lam^gamma * t^(gamma-1)."""
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0) and b.gamma < 1.0:
        raise ValueError("baseline_hazard: t must be positive when gamma < 1")
    return b.gamma * b.lam ** b.gamma * t ** (b.gamma - 1.0)


def _with_intercept(x):
    x = np.asarray(x, dtype=float)
    return np.concatenate([[1.0], x])


def link_omega(x, beta):
    """Logit link: omega = logistic(x'beta), overflow-safe."""
    beta = np.asarray(beta, dtype=float)
    xi = _with_intercept(x)
    if xi.shape[0] != beta.shape[0]:
        raise ValueError(f"link_omega: dimension mismatch "
                         f"({xi.shape[0]} vs {beta.shape[0]})")
    eta = float(xi @ beta)
    if eta >= 0:
        return 1.0 / (1.0 + math.exp(-eta))
    z = math.exp(eta)
    return z / (1.0 + z)


def link_mu(x, beta):
    """Log link: mu = exp(x'beta)."""
    beta = np.asarray(beta, dtype=float)
    xi = _with_intercept(x)
    if xi.shape[0] != beta.shape[0]:
        raise ValueError(f"link_mu: dimension mismatch "
                         f"({xi.shape[0]} vs {beta.shape[0]})")
    return math.exp(float(xi @ beta))


def _pgf_pieces(s0, omega, mu, phi):
    """Shared scalar quantities: (log_norm, exponent B, W) at r = s0."""
    mp = mu * phi
    s = mp / (1.0 + mp)
    rate = mu / (1.0 + mp)
    norm = -np.expm1(-rate)
    if s < 1e-6:
        re = s0 * math.exp(-s)
        bexp = -rate * (1.0 - re) + rate * s * re * re
        w = -s * re  # leading order; only log(-w) magnitude is used
    elif s0 == 1.0:
        # W(-s e^{-s}) = -s identically, so the exponent vanishes; computing
        # it would leave an ulp-size residue and S(0) != 1 exactly.
        w = -s
        bexp = 0.0
    else:
        w = lambert_w0(-s * s0 * math.exp(-s))
        bexp = -(w + s) / phi
    return norm, bexp, w


def marginal_survival(t, omega, mu, phi, b: WeibullBaseline):
    """S(t) = 1 - omega/norm + (omega/norm) * exp(B(S0(t)))."""
    s0 = float(baseline_survival(t, b))
    return marginal_survival_at_s0(s0, omega, mu, phi)


def marginal_survival_at_s0(s0, omega, mu, phi):
    """Marginal survival as a function of the baseline survival value."""
    norm, bexp, _ = _pgf_pieces(s0, omega, mu, phi)
    return 1.0 - omega / norm + omega / norm * math.exp(bexp)


def marginal_density(t, omega, mu, phi, b: WeibullBaseline):
    """f(t) = -omega*h0(t)*exp(B)/(norm*phi) * W/(1+W), positive for t > 0."""
    s0 = float(baseline_survival(t, b))
    norm, bexp, w = _pgf_pieces(s0, omega, mu, phi)
    h0 = float(baseline_hazard(t, b))
    return -omega * h0 * math.exp(bexp) / (norm * phi) * w / (1.0 + w)


def marginal_hazard(t, omega, mu, phi, b: WeibullBaseline):
    return marginal_density(t, omega, mu, phi, b) / marginal_survival(
        t, omega, mu, phi, b)


def pack_dataset(data):
    """Arrays (t, delta, X-with-intercept) from a list of SubjectRecord."""
    if not data:
        raise ValueError("pack_dataset: empty dataset")
    p = len(data[0].covariates)
    if any(len(r.covariates) != p for r in data):
        raise ValueError("pack_dataset: covariate dimensions differ")
    t = np.array([r.time for r in data], dtype=float)
    delta = np.array([r.event for r in data], dtype=float)
    x = np.column_stack([np.ones(len(data))]
                        + [np.array([r.covariates[j] for r in data], dtype=float)
                           for j in range(p)])
    return t, delta, x


def subject_log_terms(eta_omega, eta_mu, theta_phi, theta_lam, theta_gam,
                      log_t, delta):
    """Per-subject log-likelihood terms, dual-number capable.

    All five leading arguments may be plain arrays/scalars or dm.Dual
    values; log_t and delta are constant data arrays. Returns per-subject
    delta*log f + (1-delta)*log S. Probabilities are floored so extreme
    parameter values produce -inf rather than NaN.
    """
    log_omega = -dm.softplus(-eta_omega)
    omega = dm.exp(log_omega)
    phi = dm.exp(theta_phi)
    gam = dm.exp(theta_gam)

    # s = mu*phi/(1+mu*phi) and rate = mu/(1+mu*phi), overflow-safe via the
    # log scale: 1 + mu*phi = exp(softplus(eta_mu + theta_phi)).
    log_mp = eta_mu + theta_phi
    sp = dm.softplus(log_mp)
    s = dm.exp(log_mp - sp)
    rate = dm.exp(eta_mu - sp)
    rate = dm.where(dm.value(rate) < _LOG_FLOOR, _LOG_FLOOR, rate)
    log_norm = dm.log1mexp(rate)

    # log S0 = -(lam*t)^gamma. t = 0 lanes (log_t = -inf) pin S0 to 1 and
    # overflowing lanes pin it to ~0 with zero tangent, keeping dual
    # arithmetic free of inf*0 artifacts.
    z = gam * (theta_lam + log_t)
    zval = dm.value(z)
    log_s0 = dm.where(np.isneginf(zval), 0.0,
                      dm.where(zval > 700.0, -745.0, -dm.exp(z)))
    s0 = dm.exp(log_s0)

    small = dm.value(s) < 1e-6
    re = s0 * dm.exp(-s)
    b_series = -rate * (1.0 - re) + rate * s * re * re
    u = dm.where(small, -0.5, -s * re)  # placeholder lane avoids W at 0/0
    # Rounding can push u a few ulp below -1/e when s and S0 both approach
    # 1; clamp to the branch point (such lanes end up divergent anyway).
    u = dm.where(dm.value(u) < _BRANCH_POINT, _BRANCH_POINT, u)
    w = dm.lambert_w0(u)
    b_exact = -(w + s) / phi
    bexp = dm.where(small, b_series, b_exact)

    # Survival: S = 1 - omega * (1 - e^B)/norm, in [1-omega, 1].
    frac = -dm.expm1(bexp) * dm.exp(-log_norm)
    surv_arg = 1.0 - omega * frac
    surv_arg = dm.where(dm.value(surv_arg) < _LOG_FLOOR, _LOG_FLOOR, surv_arg)
    log_surv = dm.log(surv_arg)

    # Density: log f = log omega + log h0 + B - log norm
    #                  + log(-W) - log phi - log(1+W).
    log_h0 = theta_gam + gam * theta_lam + (gam - 1.0) * log_t
    neg_w = dm.where(small, s * re, -w)
    neg_w = dm.where(dm.value(neg_w) < _LOG_FLOOR, _LOG_FLOOR, neg_w)
    one_plus_w = dm.where(small, 1.0 - s * re, 1.0 + w)
    one_plus_w = dm.where(dm.value(one_plus_w) < _LOG_FLOOR, _LOG_FLOOR,
                          one_plus_w)
    log_dens = (log_omega + log_h0 + bexp - log_norm + dm.log(neg_w)
                - theta_phi - dm.log(one_plus_w))

    return dm.where(delta > 0.5, log_dens, log_surv)


def log_likelihood(data, params: FrailtySurvivalParams):
    """Censored-data log-likelihood over a list of SubjectRecord.

    Returns -inf (never NaN) when any subject's contribution underflows,
    so samplers can reject extreme proposals.
    """
    t, delta, x = pack_dataset(data)
    c = params.coefficients
    if x.shape[1] != len(c.beta_omega):
        raise ValueError("log_likelihood: covariate dimension mismatch")
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        log_t = np.where(t > 0, np.log(np.maximum(t, _LOG_FLOOR)), -np.inf)
        terms = subject_log_terms(
            x @ np.asarray(c.beta_omega, dtype=float),
            x @ np.asarray(c.beta_mu, dtype=float),
            math.log(params.phi), math.log(params.baseline.lam),
            math.log(params.baseline.gamma), log_t, delta)
        total = float(np.sum(terms))
    return total if not math.isnan(total) else -math.inf
