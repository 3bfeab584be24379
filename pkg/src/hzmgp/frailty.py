"""Hurdle zero-modified generalized Poisson (HZMGP) distribution.

The frailty law of a subject: mass 1 - omega at zero, and with probability
omega a zero-truncated generalized Poisson (ZTGP) draw. The generalized
Poisson component is mean-parameterized by (mu, phi) with phi > 0
(overdispersion); phi -> 0 recovers the Poisson.
"""

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .special import lambert_w0, log1mexp

__all__ = [
    "GpParams", "HzmgpParams", "ZmpsParams", "ZeroModClass",
    "gp_log_pmf", "hzmgp_log_pmf", "hzmgp_pgf", "hzmgp_mean",
    "hzmgp_variance", "rho_to_omega", "omega_to_rho", "classify_by_value",
    "sample_frailty", "pmf_table",
]

# Brute-force tail handling: extend support until this much mass is covered.
_TAIL_MASS = 1e-12
_TAIL_CAP = 10 ** 6

_CLASS_TOL = 1e-12


class ZeroModClass(enum.Enum):
    """Zero-modification taxonomy relative to the GP zero mass."""

    ZIGP = "ZIGP"
    GP = "GP"
    ZDGP = "ZDGP"
    ZTGP = "ZTGP"


@dataclass(frozen=True)
class GpParams:
    """Mean mu and dispersion phi of the generalized Poisson component."""

    mu: float
    phi: float

    def __post_init__(self):
        if not (self.mu > 0.0):
            raise ValueError(f"GpParams: mu must be positive, got {self.mu}")
        if not (self.phi > 0.0):
            raise ValueError(f"GpParams: phi must be positive, got {self.phi}")

    @property
    def zero_ratio(self):
        """mu*phi/(1 + mu*phi), the Lambert-W scale of the distribution."""
        mp = self.mu * self.phi
        return mp / (1.0 + mp)

    @property
    def rate(self):
        """mu/(1 + mu*phi); the GP zero mass is exp(-rate)."""
        return self.mu / (1.0 + self.mu * self.phi)

    @property
    def log_p0(self):
        return -self.rate


@dataclass(frozen=True)
class HzmgpParams:
    """Hurdle probability omega plus the GP component parameters."""

    omega: float
    gp: GpParams

    def __post_init__(self):
        if not (0.0 <= self.omega <= 1.0):
            raise ValueError(f"HzmgpParams: omega must be in [0, 1], got {self.omega}")


@dataclass(frozen=True)
class ZmpsParams:
    """Zero-modification probability rho plus the GP component parameters."""

    rho: float
    gp: GpParams

    def __post_init__(self):
        upper = 1.0 / -np.expm1(self.gp.log_p0)
        if not (0.0 <= self.rho <= upper * (1.0 + 1e-12)):
            raise ValueError(
                f"ZmpsParams: rho must be in [0, {upper}], got {self.rho}")


def gp_log_pmf(y, p: GpParams):
    """Log pmf of the mean-parameterized generalized Poisson at y >= 0.

    log pi(y) = (y-1)*log(1+phi*y) - log(y!) + y*[log mu - s - log(1+mu*phi)]
                - mu/(1+mu*phi), with s = mu*phi/(1+mu*phi).
    """
    y = np.asarray(y)
    if np.any(y < 0):
        raise ValueError("gp_log_pmf: y must be a non-negative integer")
    yf = y.astype(float)
    s = p.zero_ratio
    log_rate_term = math.log(p.mu) - s - math.log1p(p.mu * p.phi)
    return ((yf - 1.0) * np.log1p(p.phi * yf) - gammaln(yf + 1.0)
            + yf * log_rate_term - p.rate)


def hzmgp_log_pmf(y, p: HzmgpParams):
    """Log pmf of the hurdle zero-modified GP at y >= 0.

    Mass 1-omega at zero; omega times the zero-truncated GP on y >= 1.
    Returns -inf where the mass is exactly zero (omega boundary cases).
    """
    scalar = np.ndim(y) == 0
    y = np.atleast_1d(y)
    if np.any(y < 0):
        raise ValueError("hzmgp_log_pmf: y must be a non-negative integer")
    log_zero = np.log1p(-p.omega) if p.omega < 1.0 else -np.inf
    if p.omega > 0.0:
        log_pos = (math.log(p.omega) + gp_log_pmf(np.maximum(y, 1), p.gp)
                   - log1mexp(p.gp.rate))
    else:
        log_pos = np.full(y.shape, -np.inf)
    out = np.where(y == 0, log_zero, log_pos)
    return float(out[0]) if scalar else out


def _pgf_exponent(r, gp: GpParams):
    """-(1/phi) * [W(-s*r*exp(-s)) + s], the log of the ZTGP pgf kernel.

    For s < 1e-6 the bracket suffers 0/0-style cancellation and is replaced
    by its series, recovering the Poisson limit -mu*(1-r) as phi -> 0.
    """
    s = gp.zero_ratio
    if s < 1e-6:
        re = r * math.exp(-s)
        return -gp.rate * (1.0 - re) + gp.rate * s * re * re
    w = lambert_w0(-s * r * math.exp(-s))
    return -(w + s) / gp.phi


def hzmgp_pgf(r, p: HzmgpParams):
    """Probability generating function E[r^V] for r in [0, 1]."""
    r = float(r)
    if not (0.0 <= r <= 1.0):
        raise ValueError(f"hzmgp_pgf: r must be in [0, 1], got {r}")
    norm = -np.expm1(p.gp.log_p0)
    return 1.0 - p.omega / norm * -np.expm1(_pgf_exponent(r, p.gp))


def hzmgp_mean(p: HzmgpParams):
    """omega * mu / (1 - exp(-mu/(1+mu*phi)))."""
    if p.omega == 0.0:
        return 0.0
    return p.omega * p.gp.mu / -np.expm1(p.gp.log_p0)


def hzmgp_variance(p: HzmgpParams):
    if p.omega == 0.0:
        return 0.0
    norm = -np.expm1(p.gp.log_p0)
    mu, phi = p.gp.mu, p.gp.phi
    base = p.omega / norm
    return base * mu * (1.0 + mu * phi) ** 2 + base * mu * mu * (1.0 - base)


def rho_to_omega(z: ZmpsParams) -> HzmgpParams:
    """omega = rho * (1 - pi_GP(0)); the hurdle reparameterization."""
    omega = z.rho * -np.expm1(z.gp.log_p0)
    return HzmgpParams(omega=min(omega, 1.0), gp=z.gp)


def omega_to_rho(p: HzmgpParams) -> ZmpsParams:
    return ZmpsParams(rho=p.omega / -np.expm1(p.gp.log_p0), gp=p.gp)


def classify_by_value(p: HzmgpParams) -> ZeroModClass:
    """Deterministic taxonomy of the zero modification.

    Compares omega against 1 - pi_GP(0) and against 1, with relative
    tolerance 1e-12 for the equality cases. The posterior (probabilistic)
    rule lives in the classify module.
    """
    if p.omega >= 1.0 - _CLASS_TOL:
        return ZeroModClass.ZTGP
    threshold = -np.expm1(p.gp.log_p0)
    if abs(p.omega - threshold) <= _CLASS_TOL * max(1.0, threshold):
        return ZeroModClass.GP
    return ZeroModClass.ZIGP if p.omega < threshold else ZeroModClass.ZDGP


def pmf_table(p: HzmgpParams, tail_mass=_TAIL_MASS):
    """Pmf values for y = 0..Y* with cumulative mass >= 1 - tail_mass.

    Grows the support geometrically; raises if the cap of 1e6 is hit.
    """
    size = 64
    while True:
        y = np.arange(size)
        pmf = np.exp(hzmgp_log_pmf(y, p))
        if pmf.sum() >= 1.0 - tail_mass:
            cum = np.cumsum(pmf)
            cut = int(np.searchsorted(cum, 1.0 - tail_mass)) + 1
            return pmf[:max(cut, 1)]
        if size >= _TAIL_CAP:
            raise RuntimeError("pmf_table: support cap 1e6 reached before "
                               f"mass 1-{tail_mass} for {p}")
        size *= 4


def sample_frailty(p: HzmgpParams, rng, size=None):
    """Draw frailty values V: zero with probability 1-omega, else ZTGP.

    ZTGP draws use inverse-CDF over an adaptive pmf table. `rng` is a
    numpy Generator; callers own reproducibility.
    """
    n = 1 if size is None else int(size)
    out = np.zeros(n, dtype=np.int64)
    positive = rng.random(n) < p.omega
    k = int(positive.sum())
    if k:
        # Table for the pure ZTGP component so tail coverage is relative to
        # the positive part, independent of how small omega is.
        pmf = pmf_table(HzmgpParams(omega=1.0, gp=p.gp))
        tail = pmf[1:]
        cdf = np.cumsum(tail)
        cdf /= cdf[-1]
        out[positive] = 1 + np.searchsorted(cdf, rng.random(k))
    return int(out[0]) if size is None else out
