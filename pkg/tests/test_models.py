import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from fbst import (
    DataSet,
    DimensionError,
    ParameterSpace,
    Prior,
    ValidationError,
    conjugate_posterior_update,
    custom_model,
    fisher_information,
    log_jeffreys_density,
    simulate_data,
)
from fbst.models import model_from_hyper


def post(family, prior, data):
    return conjugate_posterior_update(Prior(family, prior), DataSet(family, data))


class TestConjugateUpdate:
    def test_beta_bernoulli(self):
        m = post("bernoulli", {"a": 1, "b": 1}, {"successes": 3, "trials": 4})
        assert m.hyper == {"a": 4.0, "b": 2.0}
        assert m.space.dim == 1

    def test_dirichlet(self):
        m = post("multinomial", {"alpha": [1, 1, 1]}, {"counts": [5, 2, 3]})
        assert m.hyper["alpha"] == (6.0, 3.0, 4.0)
        assert m.space.simplex and m.space.dim == 2

    def test_gamma_poisson(self):
        m = post("poisson", {"a": 2, "b": 1}, {"total": 14, "exposure": 5})
        assert m.hyper == {"a": 16.0, "b": 6.0}

    def test_normal_known_variance(self):
        m = post("normal", {"mean": [0], "sd": [10], "sigma": 1}, {"n": [10], "sum": [4.0]})
        prec = 1 / 100 + 10
        assert m.hyper["mean"][0] == pytest.approx(4 / prec, rel=1e-14)
        assert m.hyper["sd"][0] == pytest.approx(prec**-0.5, rel=1e-14)

    def test_normal_inverse_gamma(self):
        xs = [1.2, 0.4, 2.2, 1.9, 0.8]
        m = conjugate_posterior_update(
            Prior("normal_mv", {"mu0": 0, "kappa0": 1, "alpha0": 2, "beta0": 1}),
            DataSet.from_observations("normal_mv", xs),
        )
        n, xbar = len(xs), np.mean(xs)
        ss = sum((x - xbar) ** 2 for x in xs)
        assert m.hyper["kappa0"] == 1 + n
        assert m.hyper["mu0"] == pytest.approx(n * xbar / (1 + n))
        assert m.hyper["alpha0"] == 2 + n / 2
        assert m.hyper["beta0"] == pytest.approx(1 + ss / 2 + n * xbar**2 / (2 * (1 + n)))

    def test_family_mismatch(self):
        with pytest.raises(ValidationError):
            conjugate_posterior_update(Prior("bernoulli", {"a": 1, "b": 1}), DataSet("poisson", {"total": 1, "exposure": 1}))

    @pytest.mark.parametrize(
        "family,prior",
        [("bernoulli", {"a": 0, "b": 1}), ("bernoulli", {"a": -1, "b": 1}), ("multinomial", {"alpha": [1, 0]}),
         ("poisson", {"a": 1, "b": 0}), ("normal", {"mean": [0], "sd": [0], "sigma": 1})],
    )
    def test_invalid_prior(self, family, prior):
        with pytest.raises(ValidationError):
            Prior(family, prior)

    def test_invalid_data(self):
        with pytest.raises(ValidationError):
            DataSet("bernoulli", {"successes": 5, "trials": 4})
        with pytest.raises(ValidationError):
            DataSet("bernoulli", {"successes": -1, "trials": 4})
        with pytest.raises(ValidationError):
            DataSet.from_observations("bernoulli", [0, 1, 2])

    def test_unknown_family(self):
        with pytest.raises(ValidationError):
            Prior("cauchy", {})


class TestDensities:
    def test_beta_density_matches_scipy(self):
        m = model_from_hyper("bernoulli", {"a": 4, "b": 2})
        x = np.linspace(0.01, 0.99, 17)
        np.testing.assert_allclose(m.log_potential(x[:, None]), stats.beta(4, 2).logpdf(x), rtol=1e-12)

    def test_dirichlet_density_matches_scipy(self):
        m = model_from_hyper("multinomial", {"alpha": [6, 3, 4]})
        th = np.array([0.36, 0.48, 0.16])
        assert m.log_potential(th) == pytest.approx(stats.dirichlet([6, 3, 4]).logpdf(th), rel=1e-12)

    def test_gamma_density_matches_scipy(self):
        m = model_from_hyper("poisson", {"a": 16, "b": 6})
        x = np.array([[0.5], [2.0], [4.0]])
        np.testing.assert_allclose(m.log_potential(x), stats.gamma(16, scale=1 / 6).logpdf(x[:, 0]), rtol=1e-12)

    def test_normal_inverse_gamma_density(self):
        h = {"mu0": 0.5, "kappa0": 3, "alpha0": 4, "beta0": 2}
        m = model_from_hyper("normal_mv", h)
        mu, v = 0.7, 0.6
        expected = stats.invgamma(4, scale=2).logpdf(v) + stats.norm(0.5, math.sqrt(v / 3)).logpdf(mu)
        assert m.log_potential([mu, v]) == pytest.approx(expected, rel=1e-12)

    def test_off_support_is_minus_inf(self):
        m = model_from_hyper("bernoulli", {"a": 4, "b": 2})
        assert m.log_potential([1.5]) == -math.inf
        d = model_from_hyper("multinomial", {"alpha": [2, 2, 2]})
        assert d.log_potential([0.5, 0.5, 0.5]) == -math.inf

    def test_dimension_check(self):
        m = model_from_hyper("bernoulli", {"a": 4, "b": 2})
        with pytest.raises(DimensionError):
            m.log_potential([0.2, 0.3])

    def test_mode(self):
        np.testing.assert_allclose(model_from_hyper("bernoulli", {"a": 4, "b": 2}).mode(), [0.75])
        np.testing.assert_allclose(model_from_hyper("multinomial", {"alpha": [6, 3, 4]}).mode(), [0.5, 0.2, 0.3])

    def test_custom_model_nan_is_minus_inf(self):
        space = ParameterSpace.box(["x"], [-math.inf], [math.inf])
        m = custom_model(lambda th: math.nan if th[0] > 0 else -th[0] ** 2, space)
        assert m.log_potential([1.0]) == -math.inf
        assert m.log_potential([-1.0]) == -1.0


class TestLikelihoodPrinciple:
    @given(st.lists(st.integers(0, 1), min_size=1, max_size=60), st.randoms(use_true_random=False))
    def test_order_of_observations_is_irrelevant(self, obs, rnd):
        shuffled = list(obs)
        rnd.shuffle(shuffled)
        assert DataSet.from_observations("bernoulli", obs).stats == DataSet.from_observations("bernoulli", shuffled).stats

    @given(st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=40), st.randoms(use_true_random=False))
    def test_real_valued_sums_are_order_independent(self, xs, rnd):
        shuffled = list(xs)
        rnd.shuffle(shuffled)
        assert DataSet.from_observations("normal_mv", xs).stats == DataSet.from_observations("normal_mv", shuffled).stats

    @given(st.lists(st.integers(0, 1), min_size=1, max_size=30), st.lists(st.integers(0, 1), min_size=1, max_size=30))
    def test_sequential_update_equals_pooled(self, a, b):
        prior = Prior("bernoulli", {"a": 1.5, "b": 0.5})
        da, db = DataSet.from_observations("bernoulli", a), DataSet.from_observations("bernoulli", b)
        seq = conjugate_posterior_update(conjugate_posterior_update(prior, da).as_prior(), db)
        pooled = conjugate_posterior_update(prior, da + db)
        assert seq.hyper == pooled.hyper


class TestCharts:
    @pytest.mark.parametrize(
        "space",
        [ParameterSpace.box(["p"], [0], [1]), ParameterSpace.box(["l"], [0], [math.inf]),
         ParameterSpace.box(["m", "v"], [-math.inf, 0], [math.inf, math.inf]), ParameterSpace.simplex_of(["a", "b", "c"])],
    )
    def test_round_trip(self, space):
        rng = np.random.default_rng(0)
        u = rng.normal(size=(50, space.dim))
        theta = space.from_unconstrained(u)
        assert np.all(space.contains(theta))
        np.testing.assert_allclose(space.to_unconstrained(theta), u, atol=1e-9)

    def test_simplex_log_jacobian_numeric(self):
        space = ParameterSpace.simplex_of(["a", "b", "c"])
        u = np.array([0.3, -0.7])
        eps = 1e-6
        J = np.empty((2, 2))
        for j in range(2):
            d = np.zeros(2)
            d[j] = eps
            J[:, j] = (space.from_unconstrained(u + d)[:2] - space.from_unconstrained(u - d)[:2]) / (2 * eps)
        assert space.log_jacobian(u) == pytest.approx(math.log(abs(np.linalg.det(J))), abs=1e-8)

    def test_empty_range_rejected(self):
        with pytest.raises(ValidationError):
            ParameterSpace.box(["x"], [1], [1])


class TestFisherAndJeffreys:
    def test_bernoulli_fisher(self):
        assert fisher_information("bernoulli", [0.3])[0, 0] == pytest.approx(1 / (0.3 * 0.7))

    def test_poisson_fisher(self):
        assert fisher_information("poisson", [2.5])[0, 0] == pytest.approx(0.4)

    def test_multinomial_fisher(self):
        th = np.array([0.2, 0.3, 0.5])
        expected = np.diag(1 / th[:2]) + 1 / th[2]
        np.testing.assert_allclose(fisher_information("multinomial", th), expected)

    def test_normal_mv_fisher(self):
        np.testing.assert_allclose(fisher_information("normal_mv", [0.0, 2.0]), np.diag([0.5, 1 / (2 * 4.0)]))

    def test_boundary_rejected(self):
        with pytest.raises(ValidationError):
            fisher_information("bernoulli", [0.0])

    @pytest.mark.parametrize(
        "family,theta",
        [("bernoulli", [0.3]), ("poisson", [1.7]), ("multinomial", [0.2, 0.3, 0.5]), ("normal_mv", [0.1, 0.8])],
    )
    def test_jeffreys_is_half_log_det_fisher(self, family, theta):
        theta2 = np.array(theta)
        other = {"bernoulli": [0.6], "poisson": [0.4], "multinomial": [0.5, 0.1, 0.4], "normal_mv": [-1.0, 2.5]}[family]
        lhs = log_jeffreys_density(family, theta2) - log_jeffreys_density(family, np.array(other))
        det = lambda t: np.linalg.det(fisher_information(family, t))  # noqa: E731
        assert float(lhs) == pytest.approx(0.5 * math.log(det(theta2) / det(other)), rel=1e-10, abs=1e-12)


class TestSimulation:
    def test_seeded(self):
        a = simulate_data("bernoulli", [0.3], 100, 42)
        b = simulate_data("bernoulli", [0.3], 100, 42)
        assert a.stats == b.stats and a.n == 100

    def test_outside_support(self):
        with pytest.raises(ValidationError):
            simulate_data("bernoulli", [1.2], 10, 0)
        with pytest.raises(ValidationError):
            simulate_data("multinomial", [0.5, 0.6], 10, 0)

    def test_shapes(self):
        assert sum(simulate_data("multinomial", [0.2, 0.3, 0.5], 50, 1).stats["counts"]) == 50
        assert simulate_data("poisson", [2.0], 30, 1).stats["exposure"] == 30
        assert list(simulate_data("normal", [0.0, 1.0], 10, 1, sigma=2.0).stats["n"]) == [10, 10]
