"""Principal kriging / principal spline bases and the reduced-rank TPRS.

The smoother blocks come from the bordered matrix

    P = [[K_theta, U], [U', 0]],   P^{-1} = [[M_theta, G_theta'], [G_theta, L]],

where K is the thin-plate kernel Gram matrix, U spans the chosen null
space, and L is discarded. M_theta annihilates U, so its eigenvectors
with positive eigenvalue, ordered coarse to fine, provide interpolating
basis functions evaluated off-site through

    psi_l(s) = (u(s)' G + k(s)' M) v_l.

Three null spaces are supported: coordinates (type 1), exposure plus
coordinates (type 2), and exposure only (type 3, the restricted
spatial regression case).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import RankError
from .geometry import Location, SiteSet, tps_kernel_matrix

__all__ = [
    "NullSpaceType",
    "PrincipalBasis",
    "TprsBasis",
    "build_blocks",
    "principal_kriging_basis",
    "evaluate_pkf",
    "tprs_basis",
]

# Eigenvalues below EIGEN_TOL * max|lambda| count as the null block.
EIGEN_TOL = 1e-9


class NullSpaceType(Enum):
    TYPE1 = 1  # span(1, s[1], s[2])
    TYPE2 = 2  # span(1, x, s[1], s[2])
    TYPE3 = 3  # span(1, x)

    @property
    def q(self) -> int:
        return {NullSpaceType.TYPE1: 3, NullSpaceType.TYPE2: 4, NullSpaceType.TYPE3: 2}[self]

    @property
    def needs_exposure(self) -> bool:
        return self in (NullSpaceType.TYPE2, NullSpaceType.TYPE3)


def null_space_matrix(sites: SiteSet, nullspace: NullSpaceType,
                      x: np.ndarray | None = None) -> np.ndarray:
    if nullspace.needs_exposure:
        if x is None:
            raise ValueError(f"{nullspace} requires the exposure vector")
        x = np.asarray(x, dtype=float)
        if x.shape != (sites.n,):
            raise ValueError("exposure must be a vector of length n")
    ones = np.ones(sites.n)
    if nullspace is NullSpaceType.TYPE1:
        return np.column_stack([ones, sites.coords])
    if nullspace is NullSpaceType.TYPE2:
        return np.column_stack([ones, x, sites.coords])
    return np.column_stack([ones, x])


def build_blocks(sites: SiteSet, U: np.ndarray, kernel=None, theta: float = 0.0):
    """Smoother blocks (M_theta, G_theta) for null-space matrix U.

    Computed from the standard identities

        G = (U' Kt^{-1} U)^{-1} U' Kt^{-1},
        M = Kt^{-1} - Kt^{-1} U (U' Kt^{-1} U)^{-1} U' Kt^{-1},

    with Kt = K + theta I, which reproduce the blocks of the bordered
    matrix inverse. M is symmetrized before return. `kernel` is a
    pairwise function k(a, b); the default is the thin-plate kernel
    (evaluated through its vectorized form).
    """
    U = np.asarray(U, dtype=float)
    n, q = U.shape
    if n != sites.n:
        raise ValueError("U must have one row per site")
    if theta < 0:
        raise ValueError("theta must be nonnegative")
    if np.linalg.matrix_rank(U) < q:
        raise RankError("null-space matrix U is rank deficient")
    if kernel is None:
        K = tps_kernel_matrix(sites)
    else:
        locs = sites.locations
        K = np.array([[kernel(a, b) for b in locs] for a in locs])
    if theta > 0:
        K = K + theta * np.eye(n)
    try:
        kinv_u = np.linalg.solve(K, U)
        inner = U.T @ kinv_u
        G = np.linalg.solve(inner, kinv_u.T)
        M = np.linalg.inv(K) - kinv_u @ G
    except np.linalg.LinAlgError as exc:
        raise RankError(f"kernel system is singular: {exc}") from exc
    M = 0.5 * (M + M.T)
    return M, G


@dataclass(frozen=True)
class PrincipalBasis:
    """Eigen-structure of M plus the evaluated design block B.

    B stacks the non-intercept null-space monomials first (the two
    coordinates for types 1 and 2, nothing for type 3), then the
    eigenvectors with positive eigenvalue ordered coarse to fine.
    """

    sites: SiteSet
    nullspace: NullSpaceType
    U: np.ndarray = field(repr=False)
    K: np.ndarray = field(repr=False)
    M: np.ndarray = field(repr=False)
    G: np.ndarray = field(repr=False)
    eigenvalues: np.ndarray = field(repr=False)
    eigenvectors: np.ndarray = field(repr=False)
    B: np.ndarray = field(repr=False)
    n_monomials: int = 0

    @property
    def n(self) -> int:
        return self.sites.n

    @property
    def q(self) -> int:
        return self.U.shape[1]

    def truncated(self, k: int) -> np.ndarray:
        """First k columns of B (monomials, then coarse-to-fine functions)."""
        if not 1 <= k <= self.B.shape[1]:
            raise ValueError(f"k must be in [1, {self.B.shape[1]}]")
        return self.B[:, :k]


def principal_kriging_basis(
    sites: SiteSet,
    nullspace: NullSpaceType = NullSpaceType.TYPE1,
    x: np.ndarray | None = None,
) -> PrincipalBasis:
    """Construct the principal basis for a site set (theta fixed at 0).

    Eigenpairs of M are ordered by nondecreasing eigenvalue; exactly q
    of them must fall below the null tolerance, else RankError. Each
    eigenvector is scaled so its largest-magnitude entry is positive.
    """
    U = null_space_matrix(sites, nullspace, x)
    M, G = build_blocks(sites, U, theta=0.0)
    lam, V = np.linalg.eigh(M)
    scale = max(np.abs(lam[0]), np.abs(lam[-1]))
    null_mask = np.abs(lam) < EIGEN_TOL * scale
    q = U.shape[1]
    if null_mask.sum() != q:
        raise RankError(
            f"expected {q} null eigenvalues of M, found {int(null_mask.sum())}"
        )
    # deterministic sign: largest-magnitude entry of each eigenvector positive
    idx = np.argmax(np.abs(V), axis=0)
    V = V * np.sign(V[idx, np.arange(V.shape[1])])

    keep = lam > EIGEN_TOL * scale
    monomials = (
        sites.coords if nullspace in (NullSpaceType.TYPE1, NullSpaceType.TYPE2)
        else np.zeros((sites.n, 0))
    )
    B = np.column_stack([monomials, V[:, keep]])
    K = tps_kernel_matrix(sites)
    return PrincipalBasis(
        sites=sites, nullspace=nullspace, U=U, K=K, M=M, G=G,
        eigenvalues=lam, eigenvectors=V, B=B, n_monomials=monomials.shape[1],
    )


def evaluate_pkf(basis: PrincipalBasis, s: Location, l: int,
                 x_at_s: float | None = None) -> float:
    """Evaluate the l-th principal kriging function at an arbitrary point.

    psi_l(s) = (u(s)' G + k(s)' M) v_l; at a data site this reproduces
    the l-th eigenvector entry. `l` indexes eigenpairs in nondecreasing
    eigenvalue order, 1-based. For null spaces involving the exposure,
    the exposure value at s must be supplied.
    """
    if not 1 <= l <= basis.n:
        raise ValueError(f"l must be in [1, {basis.n}]")
    pt = np.array([[s.easting, s.northing]])
    k_s = tps_kernel_matrix(basis.sites, extra=pt)[0]
    if basis.nullspace is NullSpaceType.TYPE1:
        u_s = np.array([1.0, s.easting, s.northing])
    elif basis.nullspace is NullSpaceType.TYPE2:
        if x_at_s is None:
            raise ValueError("type-2 null space needs the exposure value at s")
        u_s = np.array([1.0, x_at_s, s.easting, s.northing])
    else:
        if x_at_s is None:
            raise ValueError("type-3 null space needs the exposure value at s")
        u_s = np.array([1.0, x_at_s])
    v = basis.eigenvectors[:, l - 1]
    return float((u_s @ basis.G + k_s @ basis.M) @ v)


@dataclass(frozen=True)
class TprsBasis:
    """Reduced-rank thin-plate regression spline block.

    Columns are the top-k kernel eigenvectors scaled by their
    eigenvalues and projected onto the orthogonal complement of the
    null space (the absorbed constraint), ordered by decreasing
    absolute eigenvalue. `penalty` carries those eigenvalues for
    penalized fitters.
    """

    basis: np.ndarray = field(repr=False)
    penalty: np.ndarray = field(repr=False)
    constraint: str = "qr-absorbed"


def tprs_basis(sites: SiteSet, k: int) -> TprsBasis:
    """Rank-k TPRS block with the null-space constraint QR-absorbed.

    Requires q < k <= n with q = 3 (coordinate null space). The
    constraint U' (basis columns) = 0 is enforced by projecting through
    the QR factorization of U.
    """
    n = sites.n
    q = 3
    if not q < k <= n:
        raise RankError(f"rank k must satisfy {q} < k <= {n}")
    K = tps_kernel_matrix(sites)
    lam, V = np.linalg.eigh(K)
    order = np.argsort(-np.abs(lam))[:k]
    lam_k = lam[order]
    V_k = V[:, order]
    idx = np.argmax(np.abs(V_k), axis=0)
    V_k = V_k * np.sign(V_k[idx, np.arange(k)])
    U = np.column_stack([np.ones(n), sites.coords])
    Q, _ = np.linalg.qr(U)
    cols = V_k * lam_k
    cols = cols - Q @ (Q.T @ cols)
    return TprsBasis(basis=cols, penalty=lam_k)
