import numpy as np
import pytest

from spconfound.errors import CalibrationError
from spconfound.simulate import (
    ConfoundingScenario,
    calibrate_sigma_w,
    conditional_law,
    load_replicates,
    replicate_seed,
    sample_exposure,
    sample_replicate,
    sample_sites,
    save_replicates,
)
from spconfound.bias import delta_ols


@pytest.fixture(scope="module")
def sites():
    return sample_sites(120, seed=5)


def scenario(**kw):
    base = dict(phi_x=0.1, phi_w=0.4, delta=0.5, sigma2_x=1.0,
                sigma2_w=1.0, sigma2_eps=0.25, beta0=1.0, beta_x=2.0)
    base.update(kw)
    return ConfoundingScenario(**base)


class TestSampleExposure:
    def test_deterministic(self, sites):
        s = scenario()
        x1 = sample_exposure(s, sites, seed=42)
        x2 = sample_exposure(s, sites, seed=42)
        assert np.array_equal(x1, x2)

    def test_independent_of_delta(self, sites):
        x1 = sample_exposure(scenario(delta=0.1), sites, seed=7)
        x2 = sample_exposure(scenario(delta=0.9), sites, seed=7)
        assert np.array_equal(x1, x2)

    def test_marginal_variance(self):
        # mean over 100 seeds of the sample variance approaches sigma2_x
        big = sample_sites(500, seed=2)
        s = scenario(phi_x=0.05)
        vs = [sample_exposure(s, big, seed=k).var() for k in range(100)]
        assert np.mean(vs) == pytest.approx(1.0, abs=0.05)
        assert 0.7 < min(vs) and max(vs) < 1.3


class TestConditionalLaw:
    def test_delta_zero(self, sites):
        law = conditional_law(scenario(delta=0.0), sites, np.ones(sites.n))
        assert np.allclose(law.mean, 0.0)
        assert np.allclose(law.cov, np.exp(-_dist(sites) / 0.4))

    def test_delta_near_one_shrinks_cov(self, sites):
        x = sample_exposure(scenario(), sites, 0)
        law = conditional_law(scenario(delta=0.999), sites, x)
        assert np.abs(law.cov).max() < 0.01

    def test_equal_ranges_mean_is_colinear(self, sites):
        s = scenario(phi_x=0.3, phi_w=0.3, delta=0.6, sigma2_w=4.0)
        x = sample_exposure(s, sites, 11)
        law = conditional_law(s, sites, x)
        expect = 0.6 * 2.0 * x  # delta * (sigma_w / sigma_x) * x
        assert np.abs(law.mean - expect).max() < 1e-8

    def test_factor_reconstructs_cov(self, sites):
        s = scenario()
        x = sample_exposure(s, sites, 3)
        law = conditional_law(s, sites, x)
        assert np.abs(law.factor @ law.factor.T - law.cov).max() < 1e-8


def _dist(sites):
    c = sites.coords
    return np.sqrt(((c[:, None] - c[None]) ** 2).sum(-1))


class TestSampleReplicate:
    def test_degenerate_noise_gives_linear_outcome(self, sites):
        s = scenario(delta=0.0, sigma2_w=1e-18, sigma2_eps=0.0)
        x = sample_exposure(s, sites, 1)
        law = conditional_law(s, sites, x)
        rep = sample_replicate(s, sites, law, x, seed=9)
        assert np.abs(rep.y - (1.0 + 2.0 * x)).max() < 1e-7

    def test_seed_reproducibility(self, sites):
        s = scenario()
        x = sample_exposure(s, sites, 1)
        law = conditional_law(s, sites, x)
        r1 = sample_replicate(s, sites, law, x, seed=123)
        r2 = sample_replicate(s, sites, law, x, seed=123)
        assert np.array_equal(r1.y, r2.y) and np.array_equal(r1.w, r2.w)

    def test_law_of_total_variance(self):
        # empirical covariance of W over replicates approaches Sigma_w|x
        small = sample_sites(25, seed=8)
        s = scenario(phi_x=0.2, phi_w=0.3, delta=0.6)
        x = sample_exposure(s, small, 4)
        law = conditional_law(s, small, x)
        ws = np.stack([
            sample_replicate(s, small, law, x, seed=k).w for k in range(2000)
        ])
        emp = np.cov(ws.T, bias=True)
        rel = np.linalg.norm(emp - law.cov) / np.linalg.norm(law.cov)
        assert rel < 0.10

    def test_ols_mean_matches_bias_theory(self):
        # E[beta_hat] = beta_x + Delta_OLS within 3 MC standard errors
        sset = sample_sites(80, seed=12)
        s = scenario(phi_x=0.05, phi_w=0.5)
        x = sample_exposure(s, sset, 2)
        sw = calibrate_sigma_w(s, sset, x, 0.15)
        s = s.with_sigma2_w(sw**2)
        law = conditional_law(s, sset, x)
        X = np.column_stack([np.ones(sset.n), x])
        h = np.linalg.solve(X.T @ X, X.T)
        ests = np.array([
            (h @ sample_replicate(s, sset, law, x, seed=k).y)[1]
            for k in range(500)
        ])
        expect = 2.0 + delta_ols(s, sset, x)[1]
        se = ests.std(ddof=1) / np.sqrt(len(ests))
        assert abs(ests.mean() - expect) < 3 * se


class TestCalibration:
    def test_hits_target(self, sites):
        s = scenario()
        x = sample_exposure(s, sites, 6)
        sw = calibrate_sigma_w(s, sites, x, 0.15)
        cal = s.with_sigma2_w(sw**2)
        assert delta_ols(cal, sites, x)[1] == pytest.approx(0.3, abs=1e-10)

    def test_linearity(self, sites):
        s = scenario()
        x = sample_exposure(s, sites, 6)
        sw1 = calibrate_sigma_w(s, sites, x, 0.1)
        sw2 = calibrate_sigma_w(s, sites, x, 0.2)
        assert sw2 == pytest.approx(2 * sw1, rel=1e-12)

    def test_zero_target_rejected(self, sites):
        s = scenario()
        x = sample_exposure(s, sites, 6)
        with pytest.raises(CalibrationError):
            calibrate_sigma_w(s, sites, x, 0.0)

    def test_delta_zero_rejected(self, sites):
        s = scenario(delta=0.0)
        x = sample_exposure(s, sites, 6)
        with pytest.raises(CalibrationError):
            calibrate_sigma_w(s, sites, x, 0.15)


class TestPersistence:
    def test_round_trip(self, tmp_path, sites):
        s = scenario()
        x = sample_exposure(s, sites, 1)
        law = conditional_law(s, sites, x)
        reps = [sample_replicate(s, sites, law, x, replicate_seed(99, 0, r))
                for r in range(3)]
        path = tmp_path / "reps.npz"
        save_replicates(path, s, sites, reps)
        s2, sites2, reps2 = load_replicates(path)
        assert s2 == s
        assert np.array_equal(sites2.coords, sites.coords)
        for a, b in zip(reps, reps2):
            assert np.array_equal(a.y, b.y)
            assert a.seed == b.seed


class TestSiteSampling:
    def test_without_replacement_distinct(self):
        s = sample_sites(500, seed=0)
        assert len({tuple(row) for row in s.coords}) == 500

    def test_unit_square(self):
        s = sample_sites(100, seed=1)
        assert s.coords.min() >= 0.0 and s.coords.max() <= 1.0
