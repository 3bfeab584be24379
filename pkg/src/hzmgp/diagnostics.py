"""MCMC convergence diagnostics: split R-hat and autocorrelation ESS."""

import numpy as np

__all__ = ["compute_rhat", "compute_ess"]


def _check(chains, min_chains):
    chains = np.asarray(chains, dtype=float)
    if chains.ndim != 2:
        raise ValueError("diagnostics expect a (chains, draws) array")
    m, n = chains.shape
    if m < min_chains or n < 4:
        raise ValueError(f"diagnostics need >= {min_chains} chains of >= 4 "
                         f"draws, got {m} x {n}")
    return chains


def _split(chains):
    m, n = chains.shape
    half = n // 2
    return np.vstack([chains[:, :half], chains[:, half:2 * half]])


def compute_rhat(chains):
    """Split potential scale reduction factor for one parameter.

    `chains` is a (n_chains, n_draws) array; each chain is halved before
    the between/within variance comparison.
    """
    s = _split(_check(chains, 2))
    m, n = s.shape
    means = s.mean(axis=1)
    w = s.var(axis=1, ddof=1).mean()
    b = n * means.var(ddof=1)
    if w <= 0.0:
        return 1.0 if b <= 0.0 else np.inf
    var_plus = (n - 1) / n * w + b / n
    return float(np.sqrt(var_plus / w))


def _autocov(x):
    """Biased autocovariance of one chain via FFT."""
    n = x.shape[0]
    xc = x - x.mean()
    size = 2 ** int(np.ceil(np.log2(2 * n)))
    f = np.fft.rfft(xc, size)
    acov = np.fft.irfft(f * np.conj(f), size)[:n].real / n
    return acov


def compute_ess(chains):
    """Effective sample size with Geyer initial-monotone truncation.

    Combines per-chain autocovariances; returns 0.0 for degenerate
    (zero-variance) chains so callers can flag them.
    """
    chains = _check(chains, 1)
    s = _split(chains) if chains.shape[1] >= 8 else chains
    m, n = s.shape
    acov = np.array([_autocov(s[i]) for i in range(m)])
    chain_var = acov[:, 0] * n / (n - 1.0)
    w = chain_var.mean()
    mean_var = w * (n - 1.0) / n
    var_plus = mean_var + (s.mean(axis=1).var(ddof=1) if m > 1 else 0.0)
    if var_plus <= 0.0 or w <= 0.0:
        return 0.0

    rho = 1.0 - (mean_var - acov.mean(axis=0)) / var_plus
    rho[0] = 1.0
    # Geyer: sum consecutive pairs, stop at the first negative pair, then
    # enforce monotone non-increasing pair sums.
    max_pairs = (n - 1) // 2
    tau = 0.0
    prev = np.inf
    for k in range(max_pairs):
        pair = rho[2 * k] + rho[2 * k + 1]
        if pair < 0.0:
            break
        pair = min(pair, prev)
        tau += pair
        prev = pair
    tau = max(2.0 * tau - 1.0, 1.0 / np.log10(n * m + 10.0))
    return float(min(m * n / tau, float(m * n)))
