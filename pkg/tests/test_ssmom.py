import numpy as np
import pytest

from spconfound.ssmom import MomMarginals, enumerate_models, log_model_prior, mom_sampler
from spconfound.ssreg import PriorFamily, SsPriorConfig, standardize, summarize

from oracles import chain_model_frequencies, total_variation


def mom_prior(**kw):
    return SsPriorConfig(family=PriorFamily.MOM, **kw)


def make_data(n=40, p=8, seed=7, active=((1, 1.2), (4, -0.9)), noise=0.4):
    rng = np.random.default_rng(seed)
    B = rng.standard_normal((n, p))
    x = rng.standard_normal(n)
    y = 0.5 * x + noise * rng.standard_normal(n)
    for j, c in active:
        if j < p:
            y = y + c * B[:, j]
    return standardize(y, x, B)


class TestPrior:
    def test_pmom_density_vanishes_at_zero(self):
        # the log joint diverges to -inf as any xi -> 0
        ys, xs, Bs, _ = make_data()
        marg = MomMarginals(ys, xs, Bs, mom_prior())
        model = (1,)
        base = marg.log_joint(model, np.array([0.0, 0.5, 0.8]), np.log(0.3))
        tiny = marg.log_joint(model, np.array([0.0, 0.5, 1e-12]), np.log(0.3))
        assert np.isfinite(base)
        assert tiny < base - 40

    def test_beta_binomial_model_prior(self):
        p = 6
        # sums to one over the whole model space
        from math import comb

        total = sum(comb(p, m) * np.exp(log_model_prior(m, p)) for m in range(p + 1))
        assert total == pytest.approx(1.0, rel=1e-12)
        # uniform over sizes
        assert np.exp(log_model_prior(0, p)) == pytest.approx(1 / (p + 1))
        assert comb(p, 3) * np.exp(log_model_prior(3, p)) == pytest.approx(1 / (p + 1))


class TestEnumeration:
    def test_posterior_concentrates_on_active_set(self):
        ys, xs, Bs, _ = make_data(n=50, p=6, seed=3)
        post = enumerate_models(ys, xs, Bs, mom_prior())
        best = max(post, key=post.get)
        assert best == (1, 4)
        assert post[best] > 0.5

    def test_chain_matches_enumeration_p8(self):
        ys, xs, Bs, _ = make_data(n=40, p=8, seed=7)
        prior = mom_prior()
        post = enumerate_models(ys, xs, Bs, prior)
        chain = mom_sampler(ys, xs, Bs, prior, iters=60000, seed=5, burn_in=6000)
        emp = chain_model_frequencies(chain.gamma)
        post_keys = {tuple(int(j in k) for j in range(8)): v for k, v in post.items()}
        tv = total_variation(post_keys, emp)
        assert tv < 0.05, f"TV {tv:.4f}"

    def test_marginals_deterministic_and_cached(self):
        ys, xs, Bs, _ = make_data(n=30, p=4, seed=2)
        marg = MomMarginals(ys, xs, Bs, mom_prior())
        a = marg.laplace((0, 2))[0]
        b = marg.laplace((0, 2))[0]
        assert a == b


class TestSampler:
    def test_seed_determinism(self):
        ys, xs, Bs, _ = make_data()
        prior = mom_prior()
        c1 = mom_sampler(ys, xs, Bs, prior, iters=2000, seed=42, burn_in=200)
        c2 = mom_sampler(ys, xs, Bs, prior, iters=2000, seed=42, burn_in=200)
        assert np.array_equal(c1.beta, c2.beta)
        assert np.array_equal(c1.gamma, c2.gamma)

    def test_recovers_exposure_effect(self):
        rng = np.random.default_rng(1)
        n = 80
        x = rng.standard_normal(n)
        B = rng.standard_normal((n, 10))
        y = 3.0 + 1.5 * x + 2.0 * B[:, 2] + 0.3 * rng.standard_normal(n)
        ys, xs, Bs, rec = standardize(y, x, B)
        chain = mom_sampler(ys, xs, Bs, mom_prior(), iters=4000, seed=0,
                            burn_in=500, record=rec)
        s = summarize(chain)
        assert s.beta_x_mean == pytest.approx(1.5, abs=0.15)
        assert s.interval[0] < 1.5 < s.interval[1]
        assert chain.inclusion_probabilities[2] > 0.9

    def test_pure_noise_selects_nothing(self):
        rng = np.random.default_rng(9)
        n = 60
        x = rng.standard_normal(n)
        B = rng.standard_normal((n, 12))
        y = 1.0 + 0.8 * x + 0.5 * rng.standard_normal(n)
        ys, xs, Bs, rec = standardize(y, x, B)
        chain = mom_sampler(ys, xs, Bs, mom_prior(), iters=4000, seed=3,
                            burn_in=500, record=rec)
        assert chain.edf == 0

    def test_diagnostics_present(self):
        ys, xs, Bs, _ = make_data()
        chain = mom_sampler(ys, xs, Bs, mom_prior(), iters=1000, seed=1, burn_in=100)
        d = chain.diagnostics
        assert {"model_acceptance", "theta_acceptance",
                "distinct_models", "mode_failures"} <= set(d)
        assert 0 <= d["model_acceptance"] <= 1
        assert d["theta_acceptance"] > 0.2
