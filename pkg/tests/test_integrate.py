import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import optimize as sopt
from scipy import stats

from fbst import (
    ParameterSpace,
    SamplerError,
    SurpriseFunction,
    ValidationError,
    custom_model,
    effective_sample_size,
    estimate_evalue,
    hardy_weinberg,
    jeffreys_reference,
    point_hypothesis,
    quadrature_evalue,
    sample_posterior_direct,
    sample_posterior_mcmc,
    sup_surprise_hypothesis,
    truth_function,
    uniform_reference,
)
from fbst.integrate import TruthFunction, indicator_ess
from fbst.models import model_from_hyper

# Frozen oracles: roots of the sublevel boundary by bisection, closed-form CDFs
# (5t^4 - 4t^5 for Beta(4,2), the Erlang series for Gamma(16, 6), erfc for the normal).
BETA42_UNIFORM = 0.24230634020818043
BETA42_JEFFREYS = 0.3372412426051188
GAMMA_UNIFORM = 0.4073075834658134
GAMMA_JEFFREYS = 0.3325424003526565
NORMAL_UNIFORM = 0.20612987469115573
# Simplex midpoint-grid oracle (M = 16000) for Dirichlet(6,3,4) under Hardy-Weinberg.
HW_EV = 0.1141275

BETA = model_from_hyper("bernoulli", {"a": 4, "b": 2})
GAMMA = model_from_hyper("poisson", {"a": 16, "b": 6})
NORMAL = model_from_hyper("normal", {"mean": [4 / 10.01], "sd": [10.01**-0.5], "sigma": 1.0})
DIRICHLET = model_from_hyper("multinomial", {"alpha": [6, 3, 4]})


def point_ev(model, value, ref="uniform"):
    sf = SurpriseFunction(model, uniform_reference() if ref == "uniform" else jeffreys_reference(model))
    opt = sup_surprise_hypothesis(sf, point_hypothesis(model.space, [value]))
    return sf, opt.log_value, quadrature_evalue(model, sf, opt.log_value)


class TestQuadrature:
    @pytest.mark.parametrize(
        "model,value,ref,expected",
        [
            (BETA, 0.5, "uniform", BETA42_UNIFORM),
            (BETA, 0.5, "jeffreys", BETA42_JEFFREYS),
            (GAMMA, 2.0, "uniform", GAMMA_UNIFORM),
            (GAMMA, 2.0, "jeffreys", GAMMA_JEFFREYS),
            (NORMAL, 0.0, "uniform", NORMAL_UNIFORM),
        ],
    )
    def test_closed_form_oracles(self, model, value, ref, expected):
        _, _, est = point_ev(model, value, ref)
        assert est.ev == pytest.approx(expected, abs=1e-9)
        assert est.method == "quadrature"

    def test_hardy_weinberg_grid_oracle(self):
        sf = SurpriseFunction(DIRICHLET, uniform_reference())
        opt = sup_surprise_hypothesis(sf, hardy_weinberg())
        assert quadrature_evalue(DIRICHLET, sf, opt.log_value).ev == pytest.approx(HW_EV, abs=2e-5)

    def test_mode_gives_exactly_one(self):
        m = model_from_hyper("bernoulli", {"a": 2, "b": 2})
        _, _, est = point_ev(m, 0.5)
        assert est.ev == 1.0

    def test_far_tail(self):
        m = model_from_hyper("bernoulli", {"a": 3001, "b": 2001})
        _, log_s, est = point_ev(m, 0.5)
        # independent: roots of the Beta log-density level set, scipy Beta CDF
        dist = stats.beta(3001, 2001)
        level = dist.logpdf(0.5)
        mode = 3000 / 5000
        hi = sopt.brentq(lambda x: dist.logpdf(x) - level, mode, 0.9999, xtol=1e-15)
        oracle = dist.cdf(0.5) + dist.sf(hi)
        assert est.ev == pytest.approx(oracle, rel=1e-6)
        assert est.ev < 1e-40

    def test_minus_inf_s_star(self):
        sf = SurpriseFunction(BETA, uniform_reference())
        assert quadrature_evalue(BETA, sf, -math.inf).ev == 0.0

    def test_dimension_limit(self):
        m = model_from_hyper("multinomial", {"alpha": [2, 2, 2, 2]})
        sf = SurpriseFunction(m, uniform_reference())
        with pytest.raises(ValidationError):
            quadrature_evalue(m, sf, 0.0)


class TestMonteCarlo:
    def test_direct_within_three_se(self):
        sf, log_s, _ = point_ev(BETA, 0.5)
        sample = sample_posterior_direct(BETA, 100_000, 1)
        est = estimate_evalue(truth_function(sample, sf), log_s)
        assert abs(est.ev - BETA42_UNIFORM) < 3 * est.se
        assert est.se == pytest.approx(math.sqrt(est.ev * (1 - est.ev) / 100_000))

    def test_mcmc_within_three_se(self):
        sf, log_s, _ = point_ev(GAMMA, 2.0)
        sample = sample_posterior_mcmc(GAMMA, 40_000, 4)
        assert sample.diagnostics["acceptance_in_band"]
        est = estimate_evalue(truth_function(sample, sf), log_s, indicator_ess(sample, sf, log_s))
        assert est.n < 40_000
        assert abs(est.ev - GAMMA_UNIFORM) < 3 * est.se

    def test_mcmc_on_simplex(self):
        sf = SurpriseFunction(DIRICHLET, uniform_reference())
        opt = sup_surprise_hypothesis(sf, hardy_weinberg())
        sample = sample_posterior_mcmc(DIRICHLET, 40_000, 7)
        assert np.allclose(sample.draws.sum(axis=1), 1.0)
        est = estimate_evalue(truth_function(sample, sf), opt.log_value, indicator_ess(sample, sf, opt.log_value))
        assert abs(est.ev - HW_EV) < 3 * est.se

    def test_mcmc_custom_model(self):
        space = ParameterSpace.box(["x"], [-math.inf], [math.inf])
        m = custom_model(lambda th: -0.5 * th[0] ** 2, space)
        with pytest.raises(SamplerError):
            sample_posterior_direct(m, 10, 0)
        s = sample_posterior_mcmc(m, 20_000, 0)
        assert abs(s.draws.mean()) < 0.1
        assert s.draws.std() == pytest.approx(1.0, abs=0.05)

    def test_mcmc_reproducible(self):
        a = sample_posterior_mcmc(BETA, 2_000, 11)
        b = sample_posterior_mcmc(BETA, 2_000, 11)
        np.testing.assert_array_equal(a.draws, b.draws)

    def test_mcmc_tuning_validation(self):
        with pytest.raises(ValidationError):
            sample_posterior_mcmc(BETA, 100, 0, {"step_scale": 0})
        with pytest.raises(ValidationError):
            sample_posterior_mcmc(BETA, 100, 0, {"thin": 0})

    def test_mode_case_mc(self):
        m = model_from_hyper("bernoulli", {"a": 2, "b": 2})
        sf, log_s, _ = point_ev(m, 0.5)
        est = estimate_evalue(truth_function(sample_posterior_direct(m, 10_000, 0), sf), log_s)
        assert est.ev >= 1 - 3 * est.se


class TestESS:
    def test_iid(self):
        x = np.random.default_rng(0).normal(size=20_000)
        assert effective_sample_size(x) == pytest.approx(20_000, rel=0.1)

    def test_ar1(self):
        rng = np.random.default_rng(1)
        rho, n = 0.8, 50_000
        e = rng.normal(size=n)
        x = np.empty(n)
        x[0] = e[0]
        for i in range(1, n):
            x[i] = rho * x[i - 1] + e[i]
        expected = n * (1 - rho) / (1 + rho)
        assert effective_sample_size(x) == pytest.approx(expected, rel=0.15)

    def test_constant(self):
        assert effective_sample_size(np.ones(10)) == 10


class TestTruthFunction:
    @given(st.lists(st.floats(-20, 20), min_size=1, max_size=50), st.floats(-25, 25), st.floats(0, 5))
    def test_monotone_and_bounded(self, logs, v, dv):
        W = TruthFunction(np.sort(np.array(logs)))
        a, b = W.at_log(v), W.at_log(v + dv)
        assert 0.0 <= a <= b <= 1.0

    def test_weak_inequality_counts_ties(self):
        W = TruthFunction(np.array([0.0, 1.0, 1.0, 2.0]))
        assert W.at_log(1.0) == 0.75
        assert W(0.0) == 0.0
        assert W(math.inf) == 1.0

    def test_curve(self):
        W = TruthFunction(np.sort(np.random.default_rng(0).normal(size=1000)))
        c = W.curve(64)
        assert c.shape == (64, 2)
        assert np.all(np.diff(c[:, 0]) >= 0) and np.all(np.diff(c[:, 1]) >= 0)

    def test_invalid_s_star(self):
        with pytest.raises(ValidationError):
            estimate_evalue(TruthFunction(np.zeros(3)), math.nan)
