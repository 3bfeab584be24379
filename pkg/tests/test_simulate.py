"""Tests for the data generator and the replicate study harness.

Oracles: degenerate scenarios with known closed-form laws (everyone
cured; unit-exponential event times), Monte Carlo agreement between the
empirical survival curve and the closed-form marginal survival, and the
analytic cured fraction.
"""

import numpy as np
import pytest
from scipy import stats

from hzmgp.inference import PriorSpec
from hzmgp.sampler import SamplerConfig
from hzmgp.simulate import (NATURAL_PARAM_ORDER, SCENARIO_I, SCENARIO_II,
                            ScenarioSpec, generate_arrays, generate_dataset,
                            run_study)
from hzmgp.survival import WeibullBaseline, marginal_survival


def _spec(**kw):
    base = dict(name="t", phi=0.2, beta_omega=(0.5, 0.2, -0.3),
                beta_mu=(1.0, 0.1, 0.2), lam=0.5, gamma=1.2, n=200,
                replicates=1, tau=10.0)
    base.update(kw)
    return ScenarioSpec(**base)


class TestGenerator:
    def test_everyone_cured_when_omega_vanishes(self):
        spec = _spec(beta_omega=(-40.0, 0.0, 0.0), n=500)
        t, delta, x, v = generate_arrays(spec, np.random.default_rng(0))
        assert np.all(delta == 0)
        assert np.all(t == spec.tau)
        assert np.all(v == 0)

    def test_unit_exponential_special_case(self):
        # omega ~ 1 and mu -> 0 make V = 1 almost surely; with lam = 1,
        # gamma = 1 the event times are unit exponential.
        spec = _spec(beta_omega=(40.0, 0.0, 0.0), beta_mu=(-12.0, 0.0, 0.0),
                     lam=1.0, gamma=1.0, n=20000, tau=1e9)
        t, delta, x, v = generate_arrays(spec, np.random.default_rng(1))
        assert np.all(v == 1)
        assert np.all(delta == 1)
        ks = stats.kstest(t, "expon")
        assert ks.pvalue > 0.01

    def test_cured_fraction_matches_analytic(self):
        spec = ScenarioSpec(name="II", phi=SCENARIO_II.phi,
                            beta_omega=SCENARIO_II.beta_omega,
                            beta_mu=SCENARIO_II.beta_mu,
                            lam=SCENARIO_II.lam, gamma=SCENARIO_II.gamma,
                            n=100_000, replicates=1, tau=SCENARIO_II.tau)
        rng = np.random.default_rng(2)
        t, delta, x, v = generate_arrays(spec, rng)
        xi = np.column_stack([np.ones(spec.n), x])
        omega = 1.0 / (1.0 + np.exp(-(xi @ np.asarray(spec.beta_omega))))
        assert abs((v == 0).mean() - (1.0 - omega).mean()) < 0.01

    def test_empirical_survival_matches_marginal(self):
        # Pre-censoring check: huge tau so no administrative cut, then the
        # empirical survivor function (cured subjects never fail) must
        # match the population-averaged closed-form marginal survival.
        spec = ScenarioSpec(name="II", phi=SCENARIO_II.phi,
                            beta_omega=SCENARIO_II.beta_omega,
                            beta_mu=SCENARIO_II.beta_mu,
                            lam=SCENARIO_II.lam, gamma=SCENARIO_II.gamma,
                            n=100_000, replicates=1, tau=1e12)
        rng = np.random.default_rng(3)
        t, delta, x, v = generate_arrays(spec, rng)
        xi = np.column_stack([np.ones(spec.n), x])
        omega = 1.0 / (1.0 + np.exp(-(xi @ np.asarray(spec.beta_omega))))
        mu = np.exp(xi @ np.asarray(spec.beta_mu))
        b = WeibullBaseline(lam=spec.lam, gamma=spec.gamma)
        event_t = np.where(delta == 1, t, np.inf)
        for tq in [0.5, 1.0, 2.0, 4.0, 8.0]:
            emp = float((event_t > tq).mean())
            closed = float(np.mean([
                marginal_survival(tq, omega[i], mu[i], spec.phi, b)
                for i in range(0, spec.n, 50)]))
            assert emp == pytest.approx(closed, abs=0.01)

    def test_censored_rows_hit_tau_exactly(self):
        spec = _spec(n=2000, tau=2.0)
        t, delta, x, v = generate_arrays(spec, np.random.default_rng(4))
        assert np.all(t[delta == 0] == 2.0)
        assert np.all(t[delta == 1] > 0)
        assert np.all(t[delta == 1] <= 2.0)

    def test_bit_reproducible(self):
        spec = _spec(n=500)
        a = generate_arrays(spec, np.random.default_rng(11))
        b = generate_arrays(spec, np.random.default_rng(11))
        for x, y in zip(a, b):
            assert np.array_equal(x, y)

    def test_record_form(self):
        recs = generate_dataset(_spec(n=50), np.random.default_rng(5))
        assert len(recs) == 50
        assert all(r.covariates.shape == (2,) for r in recs)

    def test_spec_validation(self):
        with pytest.raises(ValueError):
            _spec(n=0)
        with pytest.raises(ValueError):
            _spec(replicates=0)
        with pytest.raises(ValueError):
            _spec(tau=0.0)

    def test_default_scenarios_exposed(self):
        assert SCENARIO_I.phi == 0.25
        assert SCENARIO_II.gamma == 1.08


class TestStudy:
    def test_smoke_report_fields(self):
        spec = _spec(n=50, replicates=1)
        cfg = SamplerConfig(chains=2, iterations=40, burn_in=10, seed=0)
        report = run_study(spec, cfg, PriorSpec(), alpha=0.1, seed=123)
        assert report.replicates_run + report.replicates_failed == 1
        assert list(report.parameter_names) == NATURAL_PARAM_ORDER
        assert report.true_values.shape == (9,)
        if report.replicates_run:
            assert report.mean_of_means.shape == (9,)
            assert np.all((report.coverage >= 0) & (report.coverage <= 1))
            total = (sum(report.classification.values())
                     + report.unclassifiable)
            assert total == pytest.approx(1.0, abs=1e-9)
            assert report.seconds_per_fit > 0

    def test_study_deterministic(self):
        spec = _spec(n=40, replicates=2)
        cfg = SamplerConfig(chains=2, iterations=60, burn_in=20, seed=0)
        a = run_study(spec, cfg, PriorSpec(), seed=7)
        b = run_study(spec, cfg, PriorSpec(), seed=7)
        assert np.array_equal(a.per_replicate_means, b.per_replicate_means)
        assert a.coverage.tolist() == b.coverage.tolist()
