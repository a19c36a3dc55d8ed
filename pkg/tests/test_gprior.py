"""Bayes factors, shrinkage and model posteriors under omega mixtures.

The load-bearing checks compare the adaptive quadrature against the
scipy.integrate routes in oracles.py, which share no code with the
library's engine (different substitutions, different densities,
different integrator).
"""

import warnings

import numpy as np
import pytest
from scipy import stats as sps
from scipy.special import logsumexp

from oracles import (
    hyper_g_log_marginal_numeric,
    oracle_log_bf,
    oracle_shrinkage,
)
from smoothsel.basis import PredictorScale, build_design
from smoothsel.gprior import (
    ModelFitStats,
    OmegaPrior,
    fit_stats,
    log_bayes_factor,
    model_posterior,
    shrinkage,
)
from smoothsel.model_space import model_prior

UNIT = PredictorScale(0.0, 1.0)
KINDS = ["intrinsic", "zellner-siow", "hyper-g"]


def random_stats(rng):
    n = int(rng.integers(20, 2000))
    qk = int(rng.integers(2, min(16, n - 3)))
    r2 = float(rng.uniform(0.01, 0.99))
    return ModelFitStats(n=n, q0=1, qk=qk, r2=r2)


class TestOmegaPrior:
    def test_factory_defaults(self):
        zs = OmegaPrior.zellner_siow()
        assert (zs.nu, zs.rho) == (1.0, 1.0)
        hg = OmegaPrior.hyper_g()
        assert (hg.nu, hg.a, hg.b) == (1.0, 2.0, 1.0)
        assert OmegaPrior.intrinsic().kind == "intrinsic"

    def test_from_name(self):
        for name in KINDS:
            assert OmegaPrior.from_name(name).kind == name
        with pytest.raises((KeyError, ValueError)):
            OmegaPrior.from_name("cauchy")

    def test_validation(self):
        with pytest.raises(ValueError):
            OmegaPrior(kind="intrinsic", nu=1.0)
        with pytest.raises(ValueError):
            OmegaPrior.zellner_siow(nu=-1.0)
        with pytest.raises(ValueError):
            OmegaPrior.zellner_siow(rho=0.0)
        with pytest.raises(ValueError):
            OmegaPrior.hyper_g(a=-2.0)
        with pytest.raises(ValueError):
            OmegaPrior(kind="unknown")

    def test_intrinsic_density_is_arcsine(self):
        w = np.linspace(0.01, 0.99, 99)
        mine = OmegaPrior.intrinsic().log_pdf(w)
        np.testing.assert_allclose(mine, sps.beta(0.5, 0.5).logpdf(w), atol=1e-12)

    def test_zellner_siow_density_is_gamma(self):
        w = np.concatenate([np.linspace(0.05, 5.0, 60), [10.0, 50.0]])
        for nu, rho in [(1.0, 1.0), (3.0, 2.0)]:
            mine = OmegaPrior.zellner_siow(nu=nu, rho=rho).log_pdf(w)
            ref = sps.gamma(nu / 2.0, scale=2.0 / rho).logpdf(w)
            np.testing.assert_allclose(mine, ref, atol=1e-12)

    def test_hyper_g_marginal_is_scaled_beta_prime(self):
        # The analytic marginal over rho must coincide with the scaled
        # beta-prime law: omega / b ~ BetaPrime(nu/2, a/2).
        w = np.concatenate([np.linspace(0.05, 5.0, 60), [20.0, 200.0]])
        for nu, a, b in [(1.0, 2.0, 1.0), (2.0, 3.0, 2.0)]:
            mine = OmegaPrior.hyper_g(nu=nu, a=a, b=b).log_pdf(w)
            ref = sps.betaprime(nu / 2.0, a / 2.0, scale=b).logpdf(w)
            np.testing.assert_allclose(mine, ref, atol=1e-10)

    def test_hyper_g_marginal_matches_nested_quadrature(self):
        # Same density validated without the beta-prime identity: a raw
        # two-layer integral over the rho hyperprior.
        hg = OmegaPrior.hyper_g()
        for w in [0.01, 0.1, 0.5, 1.0, 3.0, 10.0]:
            mine = float(hg.log_pdf(np.array([w]))[0])
            assert mine == pytest.approx(hyper_g_log_marginal_numeric(w), abs=1e-8)
        mine = float(hg.log_pdf(np.array([100.0]))[0])
        assert mine == pytest.approx(hyper_g_log_marginal_numeric(100.0), abs=1e-5)

    def test_transformed_weight_normalizes(self):
        # Midpoint rule on the quadrature's own t-scale: the weight must
        # integrate to one, so the substitution Jacobians are consistent
        # with the densities for every family.
        t = (np.arange(200_000) + 0.5) / 200_000
        for name in KINDS:
            prior = OmegaPrior.from_name(name)
            total = float(np.exp(prior.log_weight_t(t)).mean())
            assert total == pytest.approx(1.0, abs=1e-6), name

    def test_transformed_weight_reproduces_means(self):
        t = (np.arange(200_000) + 0.5) / 200_000
        cases = [
            (OmegaPrior.intrinsic(), 0.5),
            (OmegaPrior.zellner_siow(), 1.0),
            (OmegaPrior.zellner_siow(nu=3.0, rho=2.0), 1.5),
        ]
        for prior, mean in cases:
            est = float((prior.omega_of_t(t) * np.exp(prior.log_weight_t(t))).mean())
            assert est == pytest.approx(mean, abs=5e-4)

    def test_omega_of_t_monotone_and_in_support(self):
        t = np.linspace(1e-6, 1.0 - 1e-6, 5000)
        for name in KINDS:
            w = OmegaPrior.from_name(name).omega_of_t(t)
            assert np.all(np.diff(w) > 0)
            assert np.all(w > 0)
        w = OmegaPrior.intrinsic().omega_of_t(t)
        assert np.all(w < 1.0)


class TestModelFitStats:
    def test_validation(self):
        with pytest.raises(ValueError):
            ModelFitStats(n=50, q0=1, qk=3, r2=1.2)
        with pytest.raises(ValueError):
            ModelFitStats(n=50, q0=1, qk=3, r2=-0.1)
        with pytest.raises(ValueError):
            ModelFitStats(n=50, q0=3, qk=1, r2=0.5)

    def test_saturated_flag(self):
        assert ModelFitStats(n=50, q0=1, qk=3, r2=1.0).saturated
        assert not ModelFitStats(n=50, q0=1, qk=3, r2=0.999).saturated


class TestFitStats:
    def test_constant_response_has_zero_r2(self):
        rng = np.random.default_rng(0)
        x = rng.uniform(0, 1, 40)
        design = build_design(x, UNIT, 6, "legendre")
        y = np.full(40, 2.5)
        for k in range(1, 7):
            st = fit_stats(y, design, k)
            assert st.r2 == 0.0
            assert (st.n, st.q0, st.qk) == (40, 1, k + 1)

    def test_exact_degree_one_signal_is_saturated(self):
        x = np.linspace(0.05, 0.95, 12)
        design = build_design(x, UNIT, 1, "legendre")
        y = design.values[:, 1].copy()
        st = fit_stats(y, design, 1)
        assert st.saturated
        assert st.r2 >= 1.0 - 1e-12

    def test_matches_normal_equations_oracle(self):
        rng = np.random.default_rng(17)
        x = rng.uniform(0, 1, 80)
        design = build_design(x, UNIT, 5, "legendre")
        for trial in range(5):
            y = rng.standard_normal(80) + 3.0 * np.sin(4 * x)
            st = fit_stats(y, design, 3)
            # Independent route: raw normal equations with an intercept.
            xmat = design.values[:, :4]
            coef = np.linalg.solve(xmat.T @ xmat, xmat.T @ y)
            rss = float(np.sum((y - xmat @ coef) ** 2))
            ssy = float(np.sum((y - y.mean()) ** 2))
            assert st.r2 == pytest.approx(1.0 - rss / ssy, abs=1e-10)

    def test_input_validation(self):
        rng = np.random.default_rng(1)
        x = rng.uniform(0, 1, 20)
        leg = build_design(x, UNIT, 4, "legendre")
        bern = build_design(x, UNIT, 4, "bernstein")
        y = rng.standard_normal(20)
        with pytest.raises(ValueError):
            fit_stats(y, bern, 2)
        with pytest.raises(ValueError):
            fit_stats(y, leg, 0)
        with pytest.raises(ValueError):
            fit_stats(y, leg, 5)
        with pytest.raises(ValueError):
            fit_stats(rng.standard_normal(19), leg, 2)
        small = build_design(x[:5], UNIT, 3, "legendre")
        with pytest.raises(ValueError):
            fit_stats(y[:5], small, 3)

    def test_rank_deficiency_names_the_degree(self):
        # Two distinct x values support only one centered column.
        x = np.array([0.2, 0.2, 0.2, 0.8, 0.8, 0.8])
        design = build_design(x, UNIT, 2, "legendre")
        with pytest.raises(ValueError, match="degree-2"):
            fit_stats(np.arange(6.0), design, 2)


class TestLogBayesFactor:
    def test_base_against_itself_is_exactly_zero(self):
        st = ModelFitStats(n=50, q0=1, qk=1, r2=0.0)
        for name in KINDS:
            assert log_bayes_factor(st, OmegaPrior.from_name(name)) == 0.0

    @pytest.mark.parametrize("name", KINDS)
    def test_matches_quadrature_oracle(self, name):
        prior = OmegaPrior.from_name(name)
        rng = np.random.default_rng(99)
        for trial in range(12):
            st = random_stats(rng)
            mine = log_bayes_factor(st, prior)
            ref = oracle_log_bf(st.n, st.q0, st.qk, st.r2, name)
            assert np.isfinite(mine)
            assert abs(mine - ref) <= 1e-6 * max(1.0, abs(ref))

    def test_prior_families_differ_on_fixed_stats(self):
        st = ModelFitStats(n=100, q0=1, qk=3, r2=0.5)
        zs = log_bayes_factor(st, OmegaPrior.zellner_siow())
        hg = log_bayes_factor(st, OmegaPrior.hyper_g())
        assert np.isfinite(zs) and np.isfinite(hg)
        assert abs(zs - hg) > 0.05
        assert zs == pytest.approx(
            oracle_log_bf(100, 1, 3, 0.5, "zellner-siow"), abs=1e-6 * max(1.0, abs(zs))
        )
        assert hg == pytest.approx(
            oracle_log_bf(100, 1, 3, 0.5, "hyper-g"), abs=1e-6 * max(1.0, abs(hg))
        )

    def test_saturated_stats_rejected(self):
        st = ModelFitStats(n=50, q0=1, qk=3, r2=1.0)
        with pytest.raises(ValueError, match="saturated"):
            log_bayes_factor(st, OmegaPrior.intrinsic())


class TestShrinkage:
    def test_tends_to_one_for_large_n(self):
        st = ModelFitStats(n=10**6, q0=1, qk=2, r2=0.3)
        xi = shrinkage(st, OmegaPrior.zellner_siow())
        assert abs(xi - 1.0) < 1e-3

    def test_decreasing_in_parameter_count_for_fixed_y(self):
        rng = np.random.default_rng(42)
        x = rng.uniform(0, 1, 100)
        design = build_design(x, UNIT, 6, "legendre")
        y = np.sin(2 * np.pi * x) + 0.5 * rng.standard_normal(100)
        op = OmegaPrior.intrinsic()
        xi = {k: shrinkage(fit_stats(y, design, k), op) for k in (1, 2, 5)}
        assert xi[5] <= xi[2] <= xi[1]

    def test_decreasing_in_parameter_count_at_fixed_r2(self):
        # At a common r2 the conditional factor n/(n + omega(qk+1)) falls
        # with qk pointwise in omega, and the expectation inherits it.
        for name in KINDS:
            prior = OmegaPrior.from_name(name)
            vals = [
                shrinkage(ModelFitStats(n=200, q0=1, qk=qk, r2=0.4), prior)
                for qk in (2, 4, 8, 14)
            ]
            assert np.all(np.diff(vals) < 0), name

    @pytest.mark.parametrize("name", KINDS)
    def test_matches_quadrature_ratio_oracle(self, name):
        prior = OmegaPrior.from_name(name)
        for n, qk, r2 in [(100, 3, 0.5), (500, 6, 0.9), (40, 2, 0.2)]:
            st = ModelFitStats(n=n, q0=1, qk=qk, r2=r2)
            mine = shrinkage(st, prior)
            ref = oracle_shrinkage(n, 1, qk, r2, name)
            assert mine == pytest.approx(ref, rel=1e-6)

    def test_bounds(self):
        rng = np.random.default_rng(5)
        for name in KINDS:
            prior = OmegaPrior.from_name(name)
            for trial in range(8):
                st = random_stats(rng)
                xi = shrinkage(st, prior)
                assert 0.0 < xi <= 1.0

    def test_saturated_stats_rejected(self):
        st = ModelFitStats(n=50, q0=1, qk=3, r2=1.0)
        with pytest.raises(ValueError, match="saturated"):
            shrinkage(st, OmegaPrior.intrinsic())


class TestModelPosterior:
    def make_posterior(self, y, x, order, omega="intrinsic"):
        design = build_design(x, UNIT, order, "legendre")
        return model_posterior(
            y, design, model_prior(order), OmegaPrior.from_name(omega)
        )

    def test_pure_noise_prefers_the_base_model(self):
        for rep in range(20):
            rng = np.random.default_rng([1234, rep])
            x = rng.uniform(0, 1, 200)
            y = 3.0 + rng.standard_normal(200)
            mp = self.make_posterior(y, x, 14)
            assert int(np.argmax(mp.posterior)) == 0, f"replicate {rep}"

    def test_degree_one_signal_prefers_order_one(self):
        rng = np.random.default_rng(7)
        x = rng.uniform(0, 1, 200)
        design = build_design(x, UNIT, 14, "legendre")
        y = design.values[:, 1] + 1e-3 * rng.standard_normal(200)
        mp = model_posterior(y, design, model_prior(14), OmegaPrior.intrinsic())
        assert int(np.argmax(mp.posterior)) == 1
        assert mp.posterior[1] > 0.5

    def test_posterior_identities(self):
        rng = np.random.default_rng(11)
        x = rng.uniform(0, 1, 150)
        y = np.sin(2 * np.pi * x) + 0.3 * rng.standard_normal(150)
        mp = self.make_posterior(y, x, 10, omega="zellner-siow")
        assert mp.log_bf[0] == 0.0
        assert mp.posterior.sum() == pytest.approx(1.0, abs=1e-10)
        # Recompute the softmax from the returned pieces.
        prior = model_prior(10)
        lp = mp.log_bf + prior.log_probs
        ref = np.exp(lp - logsumexp(lp))
        np.testing.assert_allclose(mp.posterior, ref, atol=1e-10)

    def test_posterior_invariant_to_log_bf_shifts(self):
        # Normalization identity: adding any constant to every log BF
        # leaves the posterior untouched.
        rng = np.random.default_rng(13)
        lp = rng.normal(0, 30, 11)
        base = np.exp(lp - logsumexp(lp))
        for c in (50.0, -300.0, 1e4):
            shifted = np.exp((lp + c) - logsumexp(lp + c))
            np.testing.assert_allclose(shifted, base, atol=1e-12)
        flat = np.zeros(3) + np.log(1.0 / 3.0)
        np.testing.assert_allclose(
            np.exp(flat - logsumexp(flat)), np.full(3, 1 / 3), atol=1e-15
        )

    def test_inclusion_is_posterior_tail_sum(self):
        rng = np.random.default_rng(19)
        x = rng.uniform(0, 1, 120)
        y = 2.0 * x**3 + 0.2 * rng.standard_normal(120)
        mp = self.make_posterior(y, x, 8)
        tails = np.array([mp.posterior[j:].sum() for j in range(1, 9)])
        np.testing.assert_allclose(mp.inclusion, tails, atol=1e-12)
        assert np.all(np.diff(mp.inclusion) <= 1e-12)
        assert np.all(mp.shrunken_inclusion <= mp.inclusion + 1e-12)
        assert np.all(mp.shrinkage > 0.0) and np.all(mp.shrinkage <= 1.0)

    def test_small_sample_excludes_saturating_orders(self):
        x = np.array([0.05, 0.2, 0.4, 0.6, 0.8, 0.95])
        design = build_design(x, UNIT, 4, "legendre")
        rng = np.random.default_rng(3)
        y = rng.standard_normal(6)
        with pytest.warns(RuntimeWarning, match="excluded"):
            mp = model_posterior(
                y, design, model_prior(4), OmegaPrior.intrinsic()
            )
        assert mp.excluded == (4,)
        assert mp.posterior[4] == 0.0
        assert np.isnan(mp.log_bf[4])
        assert mp.posterior.sum() == pytest.approx(1.0, abs=1e-10)

    def test_design_and_prior_order_must_match(self):
        rng = np.random.default_rng(2)
        x = rng.uniform(0, 1, 30)
        design = build_design(x, UNIT, 5, "legendre")
        with pytest.raises(ValueError):
            model_posterior(
                rng.standard_normal(30), design, model_prior(4), OmegaPrior.intrinsic()
            )

    def test_omega_families_agree_on_ranking_for_strong_signal(self):
        rng = np.random.default_rng(23)
        x = rng.uniform(0, 1, 250)
        y = 4.0 * (x - 0.4) ** 2 + 0.1 * rng.standard_normal(250)
        modes = []
        for name in KINDS:
            mp = self.make_posterior(y, x, 10, omega=name)
            modes.append(int(np.argmax(mp.posterior)))
        assert len(set(modes)) == 1
        assert modes[0] == 2
