import numpy as np
import pytest

from spconfound.basis import (
    NullSpaceType,
    build_blocks,
    evaluate_pkf,
    null_space_matrix,
    principal_kriging_basis,
    tprs_basis,
)
from spconfound.errors import RankError
from spconfound.geometry import Location, tps_kernel_matrix
from spconfound.simulate import ConfoundingScenario, sample_exposure, sample_sites


@pytest.fixture(scope="module")
def sites():
    return sample_sites(80, seed=21)


@pytest.fixture(scope="module")
def exposure(sites):
    scen = ConfoundingScenario(phi_x=0.2, phi_w=0.2, delta=0.5)
    return sample_exposure(scen, sites, seed=3)


@pytest.fixture(scope="module")
def basis1(sites):
    return principal_kriging_basis(sites, NullSpaceType.TYPE1)


class TestBuildBlocks:
    def test_mu_is_zero(self, sites):
        U = null_space_matrix(sites, NullSpaceType.TYPE1)
        M, G = build_blocks(sites, U)
        assert np.abs(M @ U).max() < 1e-8 * max(1.0, np.abs(M).max())

    def test_gu_is_identity(self, sites):
        U = null_space_matrix(sites, NullSpaceType.TYPE1)
        _, G = build_blocks(sites, U)
        assert np.abs(G @ U - np.eye(3)).max() < 1e-8

    def test_blocks_match_bordered_inverse(self, sites):
        # ground truth: invert the bordered matrix P directly
        U = null_space_matrix(sites, NullSpaceType.TYPE1)
        M, G = build_blocks(sites, U)
        n, q = U.shape
        K = tps_kernel_matrix(sites)
        P = np.zeros((n + q, n + q))
        P[:n, :n] = K
        P[:n, n:] = U
        P[n:, :n] = U.T
        Pinv = np.linalg.inv(P)
        scale = np.abs(M).max()
        assert np.abs(Pinv[:n, :n] - M).max() < 1e-8 * scale
        assert np.abs(Pinv[n:, :n] - G).max() < 1e-8 * max(1.0, np.abs(G).max())

    def test_positive_theta_consistent(self, sites):
        U = null_space_matrix(sites, NullSpaceType.TYPE1)
        n, q = U.shape
        theta = 0.05
        M, G = build_blocks(sites, U, theta=theta)
        K = tps_kernel_matrix(sites) + theta * np.eye(n)
        P = np.zeros((n + q, n + q))
        P[:n, :n] = K
        P[:n, n:] = U
        P[n:, :n] = U.T
        Pinv = np.linalg.inv(P)
        assert np.abs(Pinv[:n, :n] - M).max() < 1e-8 * np.abs(M).max()

    def test_rank_deficient_u(self, sites):
        U = np.column_stack([np.ones(sites.n), np.ones(sites.n)])
        with pytest.raises(RankError):
            build_blocks(sites, U)

    def test_custom_kernel_function(self):
        # pairwise callable matches the vectorized default
        from spconfound.geometry import tps_kernel

        small = sample_sites(12, seed=1)
        U = null_space_matrix(small, NullSpaceType.TYPE1)
        M1, G1 = build_blocks(small, U)
        M2, G2 = build_blocks(small, U, kernel=tps_kernel)
        assert np.allclose(M1, M2, atol=1e-9 * np.abs(M1).max())
        assert np.allclose(G1, G2, atol=1e-9)


class TestPrincipalBasis:
    def test_null_eigenvalue_count(self, sites, exposure):
        for ns in NullSpaceType:
            b = principal_kriging_basis(
                sites, ns, exposure if ns.needs_exposure else None)
            scale = np.abs(b.eigenvalues).max()
            assert (np.abs(b.eigenvalues) < 1e-9 * scale).sum() == ns.q

    def test_m_symmetric_psd(self, basis1):
        M = basis1.M
        assert np.abs(M - M.T).max() < 1e-8 * np.abs(M).max()
        assert basis1.eigenvalues[3:].min() > 0

    def test_eigenvector_orthonormal(self, basis1):
        V = basis1.eigenvectors
        assert np.abs(V.T @ V - np.eye(V.shape[0])).max() < 1e-8

    def test_b_column_layout(self, sites, basis1):
        # two monomials first, then n - 3 interpolating columns
        assert basis1.B.shape == (sites.n, sites.n - 1)
        assert np.array_equal(basis1.B[:, :2], sites.coords)
        assert basis1.n_monomials == 2

    def test_roughness_ordering(self, basis1):
        # coarse-to-fine: quadratic form v'Mv nondecreasing across columns
        V = basis1.eigenvectors[:, 3:]
        rough = np.einsum("ij,jk,ki->i", V.T, basis1.M, V)
        assert np.all(np.diff(rough) > -1e-6 * rough.max())

    def test_type3_orthogonal_to_design(self, sites, exposure):
        b = principal_kriging_basis(sites, NullSpaceType.TYPE3, exposure)
        X = np.column_stack([np.ones(sites.n), exposure])
        assert np.abs(b.B.T @ X).max() < 1e-8

    def test_type1_not_orthogonal_to_design(self, sites, exposure, basis1):
        X = np.column_stack([np.ones(sites.n), exposure])
        assert np.abs(basis1.B.T @ X).max() > 1e-3

    def test_full_expansion_reconstructs_any_vector(self, sites, basis1):
        # with p = n the interpolator reproduces y at the data sites
        rng = np.random.default_rng(0)
        y = rng.standard_normal(sites.n)
        coef = np.linalg.solve(basis1.eigenvectors, y)
        recon = basis1.eigenvectors @ coef
        assert np.abs(recon - y).max() < 1e-6

    def test_missing_exposure_rejected(self, sites):
        with pytest.raises(ValueError):
            principal_kriging_basis(sites, NullSpaceType.TYPE2)


class TestEvaluatePkf:
    def test_interpolates_eigenvectors_at_sites(self, sites, basis1):
        locs = sites.locations
        for l in (1, 2, 4, 10, 40):
            v = basis1.eigenvectors[:, l - 1]
            for i in (0, 17, 55):
                val = evaluate_pkf(basis1, locs[i], l)
                assert val == pytest.approx(v[i], abs=1e-8)

    def test_null_block_is_polynomial(self, sites, basis1):
        # a null-block eigenvector equals U c; off-site the PKF must
        # evaluate to u(s)' c exactly
        for l in (1, 2, 3):
            v = basis1.eigenvectors[:, l - 1]
            c = np.linalg.lstsq(basis1.U, v, rcond=None)[0]
            s = Location(0.123, 0.456)
            expect = c[0] + c[1] * s.easting + c[2] * s.northing
            assert evaluate_pkf(basis1, s, l) == pytest.approx(expect, abs=1e-8)

    def test_linearity_in_eigenvector(self, sites, basis1):
        s = Location(0.3, 0.7)
        l = 6
        base = evaluate_pkf(basis1, s, l)
        doubled = principal_kriging_basis(sites, NullSpaceType.TYPE1)
        object.__setattr__(doubled, "eigenvectors",
                           2.0 * basis1.eigenvectors)
        assert evaluate_pkf(doubled, s, l) == pytest.approx(2 * base, rel=1e-9)

    def test_off_site_smooth_value_finite(self, basis1):
        val = evaluate_pkf(basis1, Location(0.511, 0.327), 12)
        assert np.isfinite(val)


class TestTprsBasis:
    def test_constraint_absorbed(self, sites):
        t = tprs_basis(sites, k=20)
        U = np.column_stack([np.ones(sites.n), sites.coords])
        assert np.abs(U.T @ t.basis).max() < 1e-8

    def test_ordering_by_magnitude(self, sites):
        t = tprs_basis(sites, k=15)
        assert np.all(np.diff(np.abs(t.penalty)) <= 1e-12)

    def test_full_rank_spans_orthocomplement(self, sites):
        n = sites.n
        t = tprs_basis(sites, k=n - 3)
        U = np.column_stack([np.ones(n), sites.coords])
        Q, _ = np.linalg.qr(U)
        proj = np.eye(n) - Q @ Q.T
        # columns live in the orthocomplement and span it
        assert np.linalg.matrix_rank(t.basis, tol=1e-10) == n - 3
        assert np.abs(proj @ t.basis - t.basis).max() < 1e-10

    def test_rank_bounds(self, sites):
        with pytest.raises(RankError):
            tprs_basis(sites, k=3)
        with pytest.raises(RankError):
            tprs_basis(sites, k=sites.n + 1)
