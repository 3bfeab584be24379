"""Dynamic Hamiltonian Monte Carlo with dual-averaging step-size adaptation.

A No-U-Turn style sampler: multinomial sampling over a doubling leapfrog
trajectory, stopped by the U-turn criterion or a divergence (energy error
above 1000). Step size adapts toward a target acceptance statistic during
burn-in; a diagonal mass matrix is re-estimated over expanding burn-in windows.
Chains are deterministic given the seed, with per-chain RNG streams split
from it.
"""

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .diagnostics import compute_ess, compute_rhat
from .inference import ModelData, PriorSpec, make_posterior, parameter_names

__all__ = ["SamplerConfig", "PosteriorDraws", "sample_nuts", "run_sampler",
           "SamplerError"]

_ENERGY_DIVERGENCE = 1000.0
_MAX_DIVERGENT_FRACTION = 0.25


class SamplerError(RuntimeError):
    """Raised when sampling fails outright (e.g. too many divergences)."""


@dataclass(frozen=True)
class SamplerConfig:
    chains: int = 3
    iterations: int = 1000
    burn_in: int = 300
    seed: int = 0
    target_acceptance: float = 0.8
    max_tree_depth: int = 10
    dense_mass: bool = False

    def __post_init__(self):
        if self.chains < 1:
            raise ValueError("SamplerConfig: chains must be >= 1")
        if not (0 <= self.burn_in < self.iterations):
            raise ValueError("SamplerConfig: need 0 <= burn_in < iterations")
        if not (0.0 < self.target_acceptance < 1.0):
            raise ValueError("SamplerConfig: target_acceptance in (0,1)")


@dataclass
class PosteriorDraws:
    """Post-burn-in draws (stacked across chains) plus diagnostics."""

    draws: np.ndarray            # ((iterations-burn_in)*chains, d)
    names: list
    chains: int
    rhat: np.ndarray
    ess: np.ndarray
    divergences: int
    accept_stat: float
    step_sizes: np.ndarray
    wall_seconds: float = 0.0
    degenerate: np.ndarray = field(default=None)

    @property
    def per_chain(self):
        """Draws reshaped to (chains, draws_per_chain, d)."""
        m = self.chains
        return self.draws.reshape(m, self.draws.shape[0] // m, -1)

    def to_csv(self, path):
        header = ",".join(self.names)
        np.savetxt(path, self.draws, delimiter=",", header=header, comments="")


class _Metric:
    """Euclidean metric: diagonal (vector) or dense (matrix) inverse mass.

    The inverse mass approximates the posterior covariance; momenta are
    drawn from N(0, mass).
    """

    def __init__(self, inv_mass):
        self.inv = np.asarray(inv_mass, dtype=float)
        self.dense = self.inv.ndim == 2
        if self.dense:
            # inv = Sigma = L L^T; momentum p = L^{-T} z has Cov Sigma^{-1}.
            self._chol = np.linalg.cholesky(self.inv)
        else:
            self._mom_sd = 1.0 / np.sqrt(self.inv)

    def velocity(self, p):
        return self.inv @ p if self.dense else self.inv * p

    def kinetic(self, p):
        return 0.5 * float(p @ self.velocity(p))

    def sample_momentum(self, rng, dim):
        z = rng.standard_normal(dim)
        if self.dense:
            return np.linalg.solve(self._chol.T, z)
        return z * self._mom_sd


def _find_reasonable_epsilon(f, q, logp, grad, metric, rng):
    """Double/halve the step size until one leapfrog crosses 0.5 accept."""
    eps = 1.0
    p = metric.sample_momentum(rng, q.shape[0])
    joint0 = logp - metric.kinetic(p)

    def joint_after(eps):
        p1 = p + 0.5 * eps * grad
        q1 = q + eps * metric.velocity(p1)
        lp1, g1 = f(q1)
        if g1 is None:
            return -np.inf
        p2 = p1 + 0.5 * eps * g1
        return lp1 - metric.kinetic(p2)

    diff = joint_after(eps) - joint0
    direction = 1.0 if diff > math.log(0.5) else -1.0
    for _ in range(100):
        eps *= 2.0 ** direction
        diff = joint_after(eps) - joint0
        if direction * diff <= direction * math.log(0.5):
            break
        if eps > 1e7 or eps < 1e-10:
            break
    return eps


class _Tree:
    __slots__ = ("q_minus", "p_minus", "g_minus", "q_plus", "p_plus",
                 "g_plus", "q_prop", "logp_prop", "g_prop", "logw",
                 "alpha_sum", "n_alpha", "stop", "divergent")

    def __init__(self, **kw):
        for k, v in kw.items():
            setattr(self, k, v)


def _leapfrog(f, q, p, grad, eps, metric):
    p = p + 0.5 * eps * grad
    q = q + eps * metric.velocity(p)
    logp, g = f(q)
    if g is None:
        return q, p, None, -np.inf
    p = p + 0.5 * eps * g
    return q, p, g, logp


def _uturn(q_plus, q_minus, p_plus, p_minus, metric):
    dq = q_plus - q_minus
    return (float(dq @ metric.velocity(p_minus)) < 0.0
            or float(dq @ metric.velocity(p_plus)) < 0.0)


def _build_tree(f, q, p, grad, depth, direction, eps, metric, joint0, rng):
    if depth == 0:
        q1, p1, g1, logp1 = _leapfrog(f, q, p, grad, direction * eps, metric)
        if g1 is None:
            joint = -np.inf
        else:
            joint = logp1 - metric.kinetic(p1)
        divergent = not np.isfinite(joint) or (joint0 - joint) > _ENERGY_DIVERGENCE
        logw = joint - joint0 if np.isfinite(joint) else -np.inf
        alpha = min(1.0, math.exp(min(0.0, logw)))
        return _Tree(q_minus=q1, p_minus=p1, g_minus=g1, q_plus=q1, p_plus=p1,
                     g_plus=g1, q_prop=q1, logp_prop=logp1, g_prop=g1,
                     logw=logw, alpha_sum=alpha, n_alpha=1,
                     stop=divergent, divergent=int(divergent))

    inner = _build_tree(f, q, p, grad, depth - 1, direction, eps, metric,
                        joint0, rng)
    if inner.stop:
        return inner
    if direction == 1:
        outer = _build_tree(f, inner.q_plus, inner.p_plus, inner.g_plus,
                            depth - 1, direction, eps, metric, joint0, rng)
        inner.q_plus, inner.p_plus, inner.g_plus = (
            outer.q_plus, outer.p_plus, outer.g_plus)
    else:
        outer = _build_tree(f, inner.q_minus, inner.p_minus, inner.g_minus,
                            depth - 1, direction, eps, metric, joint0, rng)
        inner.q_minus, inner.p_minus, inner.g_minus = (
            outer.q_minus, outer.p_minus, outer.g_minus)

    total = np.logaddexp(inner.logw, outer.logw)
    if np.isfinite(outer.logw) and math.log(rng.random()) < outer.logw - total:
        inner.q_prop, inner.logp_prop, inner.g_prop = (
            outer.q_prop, outer.logp_prop, outer.g_prop)
    inner.logw = total
    inner.alpha_sum += outer.alpha_sum
    inner.n_alpha += outer.n_alpha
    inner.divergent += outer.divergent
    inner.stop = (outer.stop
                  or _uturn(inner.q_plus, inner.q_minus, inner.p_plus,
                            inner.p_minus, metric))
    return inner


def _transition(f, q, logp, grad, eps, metric, max_depth, rng):
    """One NUTS update; returns (q, logp, grad, accept_stat, divergent)."""
    p0 = metric.sample_momentum(rng, q.shape[0])
    joint0 = logp - metric.kinetic(p0)

    q_minus = q_plus = q
    p_minus = p_plus = p0
    g_minus = g_plus = grad
    q_prop, logp_prop, g_prop = q, logp, grad
    logw = 0.0
    alpha_sum, n_alpha, divergent = 0.0, 0, 0

    for depth in range(max_depth):
        direction = 1 if rng.random() < 0.5 else -1
        if direction == 1:
            sub = _build_tree(f, q_plus, p_plus, g_plus, depth, 1, eps,
                              metric, joint0, rng)
            q_plus, p_plus, g_plus = sub.q_plus, sub.p_plus, sub.g_plus
        else:
            sub = _build_tree(f, q_minus, p_minus, g_minus, depth, -1, eps,
                              metric, joint0, rng)
            q_minus, p_minus, g_minus = sub.q_minus, sub.p_minus, sub.g_minus

        alpha_sum += sub.alpha_sum
        n_alpha += sub.n_alpha
        divergent += sub.divergent
        if not sub.stop and np.isfinite(sub.logw):
            total = np.logaddexp(logw, sub.logw)
            if math.log(rng.random()) < sub.logw - total:
                q_prop, logp_prop, g_prop = sub.q_prop, sub.logp_prop, sub.g_prop
            logw = total
        if sub.stop or _uturn(q_plus, q_minus, p_plus, p_minus, metric):
            break

    accept = alpha_sum / max(n_alpha, 1)
    return q_prop, logp_prop, g_prop, accept, (divergent > 0)


class _DualAveraging:
    """Nesterov dual averaging of log step size toward a target accept."""

    def __init__(self, eps0, target, gamma=0.05, t0=10.0, kappa=0.75):
        self.mu = math.log(10.0 * eps0)
        self.target = target
        self.gamma, self.t0, self.kappa = gamma, t0, kappa
        self.log_eps = math.log(eps0)
        self.log_eps_bar = 0.0
        self.h_bar = 0.0
        self.m = 0

    def update(self, accept):
        self.m += 1
        frac = 1.0 / (self.m + self.t0)
        self.h_bar = (1.0 - frac) * self.h_bar + frac * (self.target - accept)
        self.log_eps = self.mu - math.sqrt(self.m) / self.gamma * self.h_bar
        eta = self.m ** (-self.kappa)
        self.log_eps_bar = eta * self.log_eps + (1.0 - eta) * self.log_eps_bar

    @property
    def eps(self):
        return math.exp(self.log_eps)

    @property
    def eps_final(self):
        return math.exp(self.log_eps_bar)


def _mass_windows(burn):
    """Expanding (start, end) sample windows for mass-matrix updates.

    Windows begin after an initial step-size-only buffer, double in length,
    and leave a terminal buffer for step-size re-equilibration; very short
    burn-ins get no windows (unit mass matrix throughout).
    """
    if burn < 20:
        return []
    start, end = int(0.15 * burn), int(0.75 * burn)
    size = max(int(0.1 * burn), 10)
    windows = []
    cur = start
    while cur < end:
        nxt = min(cur + size, end)
        if end - nxt < size:
            nxt = end
        windows.append((cur, nxt))
        size *= 2
        cur = nxt
    return windows


def _estimate_metric(window, dense):
    """Regularized sample (co)variance of a warmup window as the metric."""
    n_w = window.shape[0]
    shrink = n_w / (n_w + 5.0)
    ridge = 1e-3 * (5.0 / (n_w + 5.0))
    if dense:
        cov = np.cov(window, rowvar=False)
        cov = shrink * cov + ridge * np.eye(window.shape[1])
        return _Metric(cov)
    var = np.var(window, axis=0, ddof=1)
    return _Metric(np.maximum(shrink * var + ridge, 1e-10))


def sample_chain(f, q0, config: SamplerConfig, rng):
    """Run one chain; returns (draws, divergences, mean accept, step size)."""
    q = np.asarray(q0, dtype=float).copy()
    logp, grad = f(q)
    if grad is None:
        raise SamplerError("sample_chain: initial point has non-finite "
                           "posterior")
    d = q.shape[0]
    metric = _Metric(np.ones(d))
    burn = config.burn_in

    eps0 = _find_reasonable_epsilon(f, q, logp, grad, metric, rng)
    da = _DualAveraging(eps0, config.target_acceptance)
    eps = eps0

    windows = _mass_windows(burn)
    w_idx = 0
    window = []

    n_keep = config.iterations - burn
    draws = np.empty((n_keep, d))
    divergences = 0
    accepts = []

    for it in range(config.iterations):
        warming = it < burn
        q, logp, grad, accept, div = _transition(
            f, q, logp, grad, eps, metric, config.max_tree_depth, rng)
        if warming:
            if w_idx < len(windows):
                w_start, w_end = windows[w_idx]
                if w_start <= it < w_end:
                    window.append(q.copy())
                if it == w_end - 1:
                    if len(window) >= 10:
                        metric = _estimate_metric(np.asarray(window),
                                                  config.dense_mass)
                        eps0 = _find_reasonable_epsilon(
                            f, q, logp, grad, metric, rng)
                        da = _DualAveraging(eps0, config.target_acceptance)
                    window = []
                    w_idx += 1
            da.update(accept)
            eps = da.eps
            if it == burn - 1:
                eps = da.eps_final
        else:
            draws[it - burn] = q
            divergences += int(div)
            accepts.append(accept)

    return draws, divergences, float(np.mean(accepts)), eps


def sample_nuts(f, dim, config: SamplerConfig, initial=None):
    """Sample a log density given by f: theta -> (logp, grad or None).

    Runs `config.chains` chains with RNG streams split from the seed.
    Returns a PosteriorDraws with split R-hat and ESS per coordinate,
    raising SamplerError if more than 25% of post-burn-in transitions
    diverge.
    """
    seed_seq = np.random.SeedSequence(config.seed)
    streams = seed_seq.spawn(config.chains)
    n_keep = config.iterations - config.burn_in

    all_draws = []
    divergences = 0
    accept_stats = []
    step_sizes = []
    t_start = time.perf_counter()
    for c in range(config.chains):
        rng = np.random.default_rng(streams[c])
        if initial is not None:
            q0 = np.asarray(initial[c], dtype=float)
        else:
            q0 = _initial_point(f, dim, rng)
        draws, div, acc, eps = sample_chain(f, q0, config, rng)
        all_draws.append(draws)
        divergences += div
        accept_stats.append(acc)
        step_sizes.append(eps)
    wall = time.perf_counter() - t_start

    total_transitions = n_keep * config.chains
    if divergences > _MAX_DIVERGENT_FRACTION * total_transitions:
        raise SamplerError(
            f"sample_nuts: {divergences}/{total_transitions} post-burn-in "
            "transitions diverged")

    stacked = np.vstack(all_draws)
    by_chain = np.asarray(all_draws)          # (chains, n_keep, d)
    rhat = np.full(dim, np.nan)
    ess = np.zeros(dim)
    degenerate = np.zeros(dim, dtype=bool)
    for j in range(dim):
        ess[j] = compute_ess(by_chain[:, :, j])
        degenerate[j] = ess[j] == 0.0
        if config.chains >= 2:
            rhat[j] = compute_rhat(by_chain[:, :, j])
    names = [f"theta[{j}]" for j in range(dim)]
    return PosteriorDraws(draws=stacked, names=names, chains=config.chains,
                          rhat=rhat, ess=ess, divergences=divergences,
                          accept_stat=float(np.mean(accept_stats)),
                          step_sizes=np.asarray(step_sizes),
                          wall_seconds=wall, degenerate=degenerate)


def _initial_point(f, dim, rng, attempts=100):
    for _ in range(attempts):
        q0 = rng.uniform(-2.0, 2.0, dim)
        logp, grad = f(q0)
        if grad is not None:
            return _ascend(f, q0, logp, grad) + 0.1 * rng.standard_normal(dim)
    raise SamplerError("sample_nuts: could not find a finite starting point")


def _ascend(f, q, logp, grad, iters=150):
    """Backtracking gradient ascent toward the high-probability region.

    A raw uniform start can sit many density orders of magnitude from the
    typical set; warming up from there lets step-size and mass adaptation
    lock onto a transient regime. A crude normalized-gradient climb is
    enough to start every chain in the bulk.
    """
    step = 0.05
    for _ in range(iters):
        prop = q + step * grad / max(1.0, float(np.linalg.norm(grad)))
        lp_new, g_new = f(prop)
        if g_new is not None and lp_new > logp:
            q, logp, grad = prop, lp_new, g_new
            step = min(step * 1.3, 2.0)
        else:
            step *= 0.5
            if step < 1e-8:
                break
    return q


def run_sampler(data: ModelData, config: SamplerConfig,
                prior: PriorSpec = PriorSpec(),
                omega_covariates=None, mu_covariates=None):
    """Fit the frailty survival posterior; returns PosteriorDraws."""
    f = make_posterior(data, prior)
    result = sample_nuts(f, data.dim, config)
    if omega_covariates is None:
        omega_covariates = [f"x{j}" for j in range(1, data.x_omega.shape[1])]
    if mu_covariates is None:
        mu_covariates = [f"x{j}" for j in range(1, data.x_mu.shape[1])]
    result.names = parameter_names(omega_covariates, mu_covariates)
    return result
