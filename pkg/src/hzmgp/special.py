"""Scalar special functions: principal-branch Lambert W and stable log helpers.

Every argument this package feeds to the Lambert W function has the form
z*exp(z)*s with z in (-1, 0) and s in (0, 1], so only the principal branch
on [-1/e, 0] is exercised; the implementation is nevertheless valid on the
whole principal domain [-1/e, inf).
"""

import numpy as np

__all__ = ["lambert_w0", "lambert_w0_derivative", "log1mexp", "BRANCH_POINT"]

# Branch point of the principal branch: W(-1/e) = -1.
BRANCH_POINT = -np.exp(-1.0)

_DOMAIN_TOL = 1e-14
_MAX_ITER = 50


def _branch_series(x):
    """Series expansion of W0 around the branch point x = -1/e."""
    p = np.sqrt(2.0 * (np.e * x + 1.0))
    return -1.0 + p * (1.0 - p * (1.0 / 3.0 - p * (11.0 / 72.0)))


def lambert_w0(x):
    """Principal branch of the Lambert W function, w * exp(w) = x.

    Accepts scalars or arrays; uses a branch-point series within 1e-8 of
    -1/e and Halley iteration elsewhere. Raises ValueError below -1/e.
    """
    x = np.asarray(x, dtype=float)
    scalar = x.ndim == 0
    x = np.atleast_1d(x)
    if np.any(x < BRANCH_POINT - _DOMAIN_TOL):
        raise ValueError("lambert_w0: argument below branch point -1/e")
    x = np.maximum(x, BRANCH_POINT)

    near_branch = (x - BRANCH_POINT) < 1e-8
    # Initial guess: branch series near -1/e, asymptotic log form for large
    # x, log1p elsewhere (Halley corrects any rough start on this domain).
    w = np.where(x < -0.25, _branch_series(np.minimum(x, 0.0)), np.log1p(np.maximum(x, -0.25)))
    big = x > np.e
    if np.any(big):
        lx = np.log(np.where(big, x, np.e))
        w = np.where(big, lx - np.log(lx), w)

    active = ~near_branch
    for _ in range(_MAX_ITER):
        if not np.any(active):
            break
        e = np.exp(w)
        f = w * e - x
        # Halley step; w = -1 only occurs in the near-branch region.
        denom = e * (w + 1.0) - (w + 2.0) * f / (2.0 * (w + 1.0))
        dw = np.where(active, f / denom, 0.0)
        w = w - dw
        active = active & (np.abs(dw) > 1e-14 * (1.0 + np.abs(w)))

    w = np.where(near_branch, _branch_series(x), w)
    return w[0] if scalar else w


def lambert_w0_derivative(x):
    """dW/dx on the principal branch, equal to exp(-W)/(1+W); W'(0) = 1.

    Diverges at the branch point, so arguments at or below -1/e raise.
    """
    x = np.asarray(x, dtype=float)
    if np.any(x <= BRANCH_POINT + _DOMAIN_TOL):
        raise ValueError("lambert_w0_derivative: undefined at or below -1/e")
    w = lambert_w0(x)
    return np.exp(-w) / (1.0 + w)


def log1mexp(a):
    """Stable log(1 - exp(-a)) for a > 0, two-branch form."""
    a = np.asarray(a, dtype=float)
    if np.any(a <= 0.0):
        raise ValueError("log1mexp: argument must be positive")
    return np.where(a > np.log(2.0), np.log1p(-np.exp(-a)), np.log(-np.expm1(-a)))
