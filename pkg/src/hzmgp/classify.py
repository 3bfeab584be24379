"""Posterior classification of each subject's zero-modification regime.

For every posterior draw, the subject-level hurdle probability omega_i is
compared against the threshold 1 - exp(-mu_i/(1+mu_i*phi)) separating
zero inflation from deflation, and against 1 (zero truncation). The
four-way decision rule assigns a label when the relevant posterior
probability clears 1 - alpha; draws landing in the rule's uncovered gap
are reported as unclassifiable rather than forced into a label.

Under the logistic link omega_i < 1 for every finite draw, so the ZTGP
branch can only fire when the link saturates numerically.
"""

from dataclasses import dataclass, field

import numpy as np

from .frailty import ZeroModClass

__all__ = ["ClassificationConfig", "SubjectClassification", "threshold",
           "classify_subject", "classify_population", "PopulationSummary",
           "classification_probabilities"]

UNCLASSIFIABLE = "unclassifiable"


@dataclass(frozen=True)
class ClassificationConfig:
    alpha: float = 0.1

    def __post_init__(self):
        if not (0.0 < self.alpha < 0.5):
            raise ValueError("ClassificationConfig: alpha must be in (0, 0.5)")


@dataclass(frozen=True)
class SubjectClassification:
    index: int
    label: object  # ZeroModClass or UNCLASSIFIABLE
    prob_below_threshold: float   # P(omega_i < threshold(mu_i, phi))
    prob_omega_lt_1: float        # P(omega_i < 1)


@dataclass
class PopulationSummary:
    """Per-label subject proportions; unclassifiable reported separately."""

    proportions: dict
    unclassifiable: float
    n_subjects: int


def threshold(mu, phi):
    """1 - exp(-mu/(1+mu*phi)): the GP zero-mass complement.

    Strictly increasing in mu and decreasing in phi; the boundary between
    zero-inflated and zero-deflated specifications.
    """
    mu = np.asarray(mu, dtype=float)
    phi = np.asarray(phi, dtype=float)
    if np.any(mu <= 0) or np.any(phi <= 0):
        raise ValueError("threshold: mu and phi must be positive")
    return -np.expm1(-mu / (1.0 + mu * phi))


def _decide(p1, p2, alpha):
    lo, hi = alpha, 1.0 - alpha
    if 1.0 - p2 >= hi:
        return ZeroModClass.ZTGP
    if p2 >= hi:
        if p1 >= hi:
            return ZeroModClass.ZIGP
        if 1.0 - p1 >= hi:
            return ZeroModClass.ZDGP
        if lo < p1 < hi:
            return ZeroModClass.GP
    return UNCLASSIFIABLE


def classification_probabilities(draws, x_omega, x_mu):
    """(P1, P2) matrices of shape (n_subjects,) per-subject posterior probs.

    `draws` is a PosteriorDraws over the survival posterior; x_omega and
    x_mu are design matrices with intercept columns. P1 is the fraction of
    draws with omega_i below the threshold; P2 the fraction with
    omega_i < 1.
    """
    mat = draws.draws
    kw = x_omega.shape[1]
    km = x_mu.shape[1]
    if mat.shape[1] != kw + km + 3:
        raise ValueError("classification_probabilities: draws and design "
                         "matrices disagree on dimension")
    beta_w = mat[:, :kw]
    beta_m = mat[:, kw:kw + km]
    phi = np.exp(mat[:, kw + km])

    eta_w = x_omega @ beta_w.T                       # (n, n_draws)
    with np.errstate(over="ignore"):
        omega = 1.0 / (1.0 + np.exp(-eta_w))
    mu = np.exp(np.clip(x_mu @ beta_m.T, -700.0, 700.0))
    thr = -np.expm1(-mu / (1.0 + mu * phi[None, :]))
    p1 = (omega < thr).mean(axis=1)
    p2 = (omega < 1.0).mean(axis=1)
    return p1, p2


def classify_subject(draws, x, cfg: ClassificationConfig,
                     x_mu=None, index=0):
    """Classify one subject from posterior draws and its covariate vector."""
    xi = np.concatenate([[1.0], np.asarray(x, dtype=float)])
    xm = xi if x_mu is None else np.concatenate([[1.0], np.asarray(x_mu)])
    p1, p2 = classification_probabilities(draws, xi[None, :], xm[None, :])
    label = _decide(float(p1[0]), float(p2[0]), cfg.alpha)
    return SubjectClassification(index=index, label=label,
                                 prob_below_threshold=float(p1[0]),
                                 prob_omega_lt_1=float(p2[0]))


def classify_population(draws, x_omega, x_mu, cfg: ClassificationConfig):
    """Classify every subject; returns (per-subject list, PopulationSummary)."""
    p1, p2 = classification_probabilities(draws, x_omega, x_mu)
    subjects = []
    counts = {c: 0 for c in ZeroModClass}
    n_unclass = 0
    for i in range(x_omega.shape[0]):
        label = _decide(float(p1[i]), float(p2[i]), cfg.alpha)
        subjects.append(SubjectClassification(
            index=i, label=label, prob_below_threshold=float(p1[i]),
            prob_omega_lt_1=float(p2[i])))
        if label is UNCLASSIFIABLE:
            n_unclass += 1
        else:
            counts[label] += 1
    n = len(subjects)
    summary = PopulationSummary(
        proportions={c.value: counts[c] / n for c in ZeroModClass},
        unclassifiable=n_unclass / n, n_subjects=n)
    return subjects, summary
