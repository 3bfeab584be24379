"""Vectorized forward-mode automatic differentiation with dual numbers.

A Dual carries a value array of shape (m,) and a tangent block of shape
(k, m): k simultaneous directional derivatives for m lanes (subjects).
The math helpers below accept plain numpy inputs or Duals, so numerical
kernels can be written once and evaluated with or without derivatives.

Includes a custom differentiation rule for the Lambert W function,
dW/dx = exp(-W)/(1+W), which no general-purpose rule table provides.
"""

import numpy as np

from .special import lambert_w0 as _lambert_w0_real
from .special import log1mexp as _log1mexp_real

__all__ = [
    "Dual", "seed", "value", "exp", "log", "log1p", "expm1", "sqrt",
    "where", "softplus", "lambert_w0", "log1mexp",
]


class Dual:
    """Value plus a (k, m) block of tangents."""

    __slots__ = ("val", "eps")

    def __init__(self, val, eps):
        self.val = val
        self.eps = eps

    def __repr__(self):
        return f"Dual(val={self.val!r}, eps={self.eps!r})"

    def __neg__(self):
        return Dual(-self.val, -self.eps)

    def __add__(self, other):
        if isinstance(other, Dual):
            return Dual(self.val + other.val, self.eps + other.eps)
        return Dual(self.val + other, self.eps)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, Dual):
            return Dual(self.val - other.val, self.eps - other.eps)
        return Dual(self.val - other, self.eps)

    def __rsub__(self, other):
        return Dual(other - self.val, -self.eps)

    def __mul__(self, other):
        if isinstance(other, Dual):
            return Dual(self.val * other.val,
                        self.eps * other.val + self.val * other.eps)
        return Dual(self.val * other, self.eps * other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Dual):
            inv = 1.0 / other.val
            return Dual(self.val * inv,
                        (self.eps - self.val * inv * other.eps) * inv)
        return Dual(self.val / other, self.eps / other)

    def __rtruediv__(self, other):
        inv = 1.0 / self.val
        return Dual(other * inv, -other * inv * inv * self.eps)

    def __pow__(self, c):
        # Constant exponent only; dual exponents go through exp/log.
        return Dual(self.val ** c, c * self.val ** (c - 1) * self.eps)


def seed(val, k, index, m=1):
    """Dual seeded with unit tangent along one of k directions."""
    val = np.asarray(val, dtype=float)
    lanes = val.shape[0] if val.ndim else m
    eps = np.zeros((k, lanes if val.ndim else 1))
    eps[index] = 1.0
    return Dual(val, eps)


def value(x):
    return x.val if isinstance(x, Dual) else x


def exp(x):
    if isinstance(x, Dual):
        v = np.exp(x.val)
        return Dual(v, v * x.eps)
    return np.exp(x)


def log(x):
    if isinstance(x, Dual):
        return Dual(np.log(x.val), x.eps / x.val)
    return np.log(x)


def log1p(x):
    if isinstance(x, Dual):
        return Dual(np.log1p(x.val), x.eps / (1.0 + x.val))
    return np.log1p(x)


def expm1(x):
    if isinstance(x, Dual):
        return Dual(np.expm1(x.val), np.exp(x.val) * x.eps)
    return np.expm1(x)


def sqrt(x):
    if isinstance(x, Dual):
        v = np.sqrt(x.val)
        return Dual(v, 0.5 / v * x.eps)
    return np.sqrt(x)


def where(cond, a, b):
    """Elementwise select on values and tangents; cond is a plain array."""
    if isinstance(a, Dual) or isinstance(b, Dual):
        av, ae = (a.val, a.eps) if isinstance(a, Dual) else (a, 0.0)
        bv, be = (b.val, b.eps) if isinstance(b, Dual) else (b, 0.0)
        return Dual(np.where(cond, av, bv), np.where(cond, ae, be))
    return np.where(cond, a, b)


def softplus(x):
    """log(1 + exp(x)) without overflow."""
    big = value(x) > 0.0
    return where(big, x + log1p(exp(-abs_val(x))), log1p(exp(minimum0(x))))


def abs_val(x):
    if isinstance(x, Dual):
        s = np.sign(x.val)
        return Dual(np.abs(x.val), s * x.eps)
    return np.abs(x)


def minimum0(x):
    # min(x, 0) with tangent frozen on the clipped side; ties keep the
    # live tangent so softplus differentiates correctly at exactly 0.
    if isinstance(x, Dual):
        keep = x.val <= 0.0
        return Dual(np.minimum(x.val, 0.0), np.where(keep, x.eps, 0.0))
    return np.minimum(x, 0.0)


def lambert_w0(x):
    """Principal Lambert W with the custom rule dW/dx = exp(-W)/(1+W)."""
    if isinstance(x, Dual):
        w = _lambert_w0_real(x.val)
        return Dual(w, np.exp(-w) / (1.0 + w) * x.eps)
    return _lambert_w0_real(x)


def log1mexp(x):
    """Stable log(1 - exp(-a)); d/da = 1/expm1(a)."""
    if isinstance(x, Dual):
        return Dual(_log1mexp_real(x.val), x.eps / np.expm1(x.val))
    return _log1mexp_real(x)
