import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from spconfound.errors import DuplicateSiteError, FactorizationError
from spconfound.geometry import (
    ExpCorrelation,
    Location,
    SiteSet,
    SqrtMethod,
    correlation_matrix,
    distance_matrix,
    matrix_sqrt,
    tps_kernel,
    tps_kernel_matrix,
)


def random_sites(n, seed=0):
    rng = np.random.default_rng(seed)
    return SiteSet(rng.uniform(0, 1, size=(n, 2)))


class TestDistanceMatrix:
    def test_unit_distance_pair(self):
        s = SiteSet(np.array([[0, 0], [0, 1], [3, 3], [5, 5]], dtype=float))
        d = distance_matrix(s)
        assert d[0, 1] == pytest.approx(1.0)
        assert d[1, 0] == pytest.approx(1.0)

    def test_zero_diagonal(self):
        d = distance_matrix(random_sites(25))
        assert np.all(np.diag(d) == 0.0)

    def test_matches_per_pair_arithmetic(self):
        # independent oracle: direct per-pair arithmetic
        coords = np.array([[0.1, 0.9], [0.4, 0.2], [0.8, 0.5], [0.3, 0.3]])
        d = distance_matrix(SiteSet(coords))
        for i in range(4):
            for j in range(4):
                expect = np.sqrt(
                    (coords[i, 0] - coords[j, 0]) ** 2
                    + (coords[i, 1] - coords[j, 1]) ** 2
                )
                assert d[i, j] == pytest.approx(expect, abs=1e-14)

    def test_duplicate_site_rejected(self):
        s = SiteSet(np.array([[0, 0], [0.5, 0.5], [0.5, 0.5], [1, 1]], dtype=float))
        with pytest.raises(DuplicateSiteError):
            distance_matrix(s)

    def test_too_few_sites_rejected(self):
        with pytest.raises(ValueError):
            SiteSet(np.array([[0, 0], [1, 1], [2, 2]], dtype=float))


class TestCorrelationMatrix:
    def test_unit_diagonal(self):
        r = correlation_matrix(random_sites(10), ExpCorrelation(0.3))
        assert np.allclose(np.diag(r), 1.0)

    def test_direct_formula_value(self):
        # exp(-0.6 / 0.2) = exp(-3)
        assert ExpCorrelation(0.2)(0.6) == pytest.approx(0.049787, abs=1e-6)

    def test_practical_range(self):
        # correlation hits 0.05 at about 0.15 when the range is 0.05
        assert ExpCorrelation(0.05).practical_range == pytest.approx(0.15, abs=0.002)
        assert ExpCorrelation(0.2).practical_range == pytest.approx(0.6, abs=0.01)
        assert ExpCorrelation(0.5).practical_range == pytest.approx(1.5, abs=0.02)

    def test_permutation_equivariance(self):
        sites = random_sites(12, seed=3)
        rng = np.random.default_rng(1)
        perm = rng.permutation(12)
        r = correlation_matrix(sites, ExpCorrelation(0.2))
        r_perm = correlation_matrix(SiteSet(sites.coords[perm]), ExpCorrelation(0.2))
        assert np.allclose(r[np.ix_(perm, perm)], r_perm)

    @given(
        d1=st.floats(0.01, 2.0),
        d2=st.floats(0.01, 2.0),
        phi=st.floats(0.01, 3.0),
        phi2=st.floats(0.01, 3.0),
    )
    def test_monotonicity(self, d1, d2, phi, phi2):
        # strictly decreasing in distance, strictly increasing in range
        # (strictness asserted only away from float-adjacent inputs)
        c = ExpCorrelation(phi)
        if d1 < d2 * (1 - 1e-9):
            assert c(d1) > c(d2)
        if phi < phi2 * (1 - 1e-9):
            assert ExpCorrelation(phi)(d1) < ExpCorrelation(phi2)(d1)
        if phi < phi2:
            assert ExpCorrelation(phi)(d1) <= ExpCorrelation(phi2)(d1)


class TestMatrixSqrt:
    def test_identity_symmetric_eigen(self):
        f = matrix_sqrt(np.eye(5), SqrtMethod.SYMMETRIC_EIGEN, jitter=0.0)
        assert np.allclose(f, np.eye(5), atol=1e-12)

    def test_two_by_two_reconstruction(self):
        rho = 0.7
        r = np.array([[1.0, rho], [rho, 1.0]])
        for method in SqrtMethod:
            f = matrix_sqrt(r, method)
            assert np.allclose(f @ f.T, r, atol=1e-10)

    def test_cholesky_is_lower_triangular(self):
        r = correlation_matrix(random_sites(8), ExpCorrelation(0.4))
        f = matrix_sqrt(r, SqrtMethod.CHOLESKY)
        assert np.allclose(f, np.tril(f))

    @pytest.mark.parametrize("n", [20, 120, 500])
    def test_reconstruction_random_psd(self, n):
        rng = np.random.default_rng(n)
        a = rng.standard_normal((n, n))
        r = a @ a.T / n + np.eye(n)
        for method in SqrtMethod:
            f = matrix_sqrt(r, method)
            err = np.linalg.norm(f @ f.T - r) / np.linalg.norm(r)
            assert err < 1e-8

    def test_near_singular_uses_jitter(self):
        # rank-1 plus epsilon: eigen route must survive via jitter
        v = np.ones((4, 1))
        r = v @ v.T
        f = matrix_sqrt(r, SqrtMethod.SYMMETRIC_EIGEN)
        assert np.allclose(f @ f.T, r, atol=1e-5)

    def test_indefinite_fails(self):
        r = np.diag([1.0, -1.0])
        with pytest.raises(FactorizationError):
            matrix_sqrt(r, SqrtMethod.CHOLESKY)


class TestTpsKernel:
    def test_coincident_points(self):
        p = Location(0.3, 0.8)
        assert tps_kernel(p, p) == 0.0

    def test_unit_distance(self):
        assert tps_kernel(Location(0, 0), Location(0, 1)) == 0.0

    def test_distance_e(self):
        # d = e: k = e^2 log(e) / (8 pi) = e^2 / (8 pi) = 0.2940012...
        val = tps_kernel(Location(0, 0), Location(np.e, 0))
        assert val == pytest.approx(np.e**2 / (8 * np.pi), abs=1e-9)
        assert val == pytest.approx(0.2940012, abs=1e-6)

    @given(
        ax=st.floats(-2, 2), ay=st.floats(-2, 2),
        bx=st.floats(-2, 2), by=st.floats(-2, 2),
        tx=st.floats(-5, 5), ty=st.floats(-5, 5),
    )
    @settings(max_examples=50)
    def test_symmetry_and_translation_invariance(self, ax, ay, bx, by, tx, ty):
        a, b = Location(ax, ay), Location(bx, by)
        assert tps_kernel(a, b) == pytest.approx(tps_kernel(b, a), rel=1e-12, abs=1e-12)
        a2, b2 = Location(ax + tx, ay + ty), Location(bx + tx, by + ty)
        assert tps_kernel(a2, b2) == pytest.approx(tps_kernel(a, b), rel=1e-9, abs=1e-9)

    def test_matrix_agrees_with_scalar(self):
        sites = random_sites(6, seed=9)
        k = tps_kernel_matrix(sites)
        locs = sites.locations
        for i in range(6):
            for j in range(6):
                assert k[i, j] == pytest.approx(tps_kernel(locs[i], locs[j]), abs=1e-12)
