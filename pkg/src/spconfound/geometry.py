"""Geometry, exponential correlation kernels, and matrix factorizations.

Everything downstream (field simulation, principal bases, bias formulas)
is built on the four operations here: pairwise distances, exponential
correlation matrices, matrix square roots, and the thin-plate kernel.
All functions are pure and operate on immutable inputs.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import DuplicateSiteError, FactorizationError, NumericalError

__all__ = [
    "Location",
    "SiteSet",
    "ExpCorrelation",
    "SqrtMethod",
    "distance_matrix",
    "correlation_matrix",
    "matrix_sqrt",
    "tps_kernel",
    "tps_kernel_matrix",
]


@dataclass(frozen=True)
class Location:
    """A point on the plane: easting and northing coordinates."""

    easting: float
    northing: float

    def __post_init__(self):
        if not (np.isfinite(self.easting) and np.isfinite(self.northing)):
            raise ValueError("location coordinates must be finite")

    def as_array(self) -> np.ndarray:
        return np.array([self.easting, self.northing], dtype=float)


@dataclass(frozen=True)
class SiteSet:
    """An ordered collection of n >= 4 sampling locations.

    Stores coordinates as an (n, 2) array; `locations` gives the
    structured view when individual points are needed.
    """

    coords: np.ndarray = field(repr=False)

    def __post_init__(self):
        c = np.asarray(self.coords, dtype=float)
        if c.ndim != 2 or c.shape[1] != 2:
            raise ValueError("coords must be an (n, 2) array")
        if c.shape[0] < 4:
            raise ValueError("need at least 4 sites (null space rank 3 plus one basis)")
        if not np.all(np.isfinite(c)):
            raise ValueError("site coordinates must be finite")
        object.__setattr__(self, "coords", c)

    @classmethod
    def from_locations(cls, locations) -> "SiteSet":
        return cls(np.array([[p.easting, p.northing] for p in locations]))

    @property
    def n(self) -> int:
        return self.coords.shape[0]

    @property
    def locations(self) -> list[Location]:
        return [Location(e, no) for e, no in self.coords]


@dataclass(frozen=True)
class ExpCorrelation:
    """Exponential correlation R(d) = exp(-d / range)."""

    range: float

    def __post_init__(self):
        if not (self.range > 0 and np.isfinite(self.range)):
            raise ValueError("range parameter must be a positive finite real")

    def __call__(self, d):
        return np.exp(-np.asarray(d, dtype=float) / self.range)

    @property
    def practical_range(self) -> float:
        """Distance at which correlation drops to 0.05 (about 3x the range)."""
        return -self.range * np.log(0.05)


class SqrtMethod(Enum):
    SYMMETRIC_EIGEN = "symmetric_eigen"
    CHOLESKY = "cholesky"


def distance_matrix(sites: SiteSet) -> np.ndarray:
    """Pairwise Euclidean distances between sites.

    Returns a symmetric (n, n) matrix with zero diagonal. Raises
    DuplicateSiteError if two sites coincide (off-diagonal zero).
    """
    c = sites.coords
    diff = c[:, None, :] - c[None, :, :]
    d = np.sqrt((diff**2).sum(axis=-1))
    off = d + np.eye(sites.n)
    if np.any(off == 0.0):
        i, j = np.argwhere(off == 0.0)[0]
        raise DuplicateSiteError(f"sites {i} and {j} coincide")
    return d


def correlation_matrix(sites: SiteSet, corr: ExpCorrelation) -> np.ndarray:
    """Exponential correlation matrix over a site set.

    Symmetric, unit diagonal, entries in (0, 1]; positive definite up
    to numerical jitter for distinct sites.
    """
    d = distance_matrix(sites)
    if not np.all(np.isfinite(d)):
        raise NumericalError("non-finite distance encountered")
    r = corr(d)
    np.fill_diagonal(r, 1.0)
    return r


# Jitter escalation: start at the default and multiply by 10 until the
# factorization succeeds, stopping at JITTER_MAX.
JITTER_DEFAULT = 1e-10
JITTER_MAX = 1e-6


def matrix_sqrt(
    R: np.ndarray,
    method: SqrtMethod = SqrtMethod.SYMMETRIC_EIGEN,
    jitter: float = JITTER_DEFAULT,
) -> np.ndarray:
    """Square-root factor F of a symmetric PSD matrix, R = F F'.

    SYMMETRIC_EIGEN returns the symmetric root V diag(sqrt(lam)) V';
    CHOLESKY returns the lower-triangular factor. The diagonal jitter
    escalates tenfold, up to 1e-6, before giving up with
    FactorizationError.
    """
    R = np.asarray(R, dtype=float)
    if R.ndim != 2 or R.shape[0] != R.shape[1]:
        raise ValueError("matrix_sqrt expects a square matrix")
    if not np.all(np.isfinite(R)):
        raise NumericalError("matrix contains non-finite entries")
    if not np.allclose(R, R.T, rtol=0, atol=1e-10 * max(1.0, np.abs(R).max())):
        raise ValueError("matrix_sqrt expects a symmetric matrix")
    if jitter < 0:
        raise ValueError("jitter must be nonnegative")

    n = R.shape[0]
    jit = jitter
    while True:
        Rj = R if jit == 0 else R + jit * np.eye(n)
        if method is SqrtMethod.CHOLESKY:
            try:
                return np.linalg.cholesky(Rj)
            except np.linalg.LinAlgError:
                pass
        else:
            lam, V = np.linalg.eigh(Rj)
            if lam[0] > -jit - 1e-14 * max(1.0, lam[-1]):
                lam = np.clip(lam, 0.0, None)
                F = (V * np.sqrt(lam)) @ V.T
                # guard against catastrophic loss in near-singular cases
                if np.abs(F @ F.T - R).max() <= 1e-8 * max(1.0, np.abs(R).max()) + 10 * jit:
                    return F
        if jit == 0:
            jit = JITTER_DEFAULT
        elif jit < JITTER_MAX:
            jit = min(jit * 10.0, JITTER_MAX)
        else:
            raise FactorizationError(
                f"factorization failed with jitter escalated to {JITTER_MAX:g}"
            )


_TPS_NORM = 1.0 / (8.0 * np.pi)


def tps_kernel(a: Location, b: Location) -> float:
    """Thin-plate kernel k(a, b) = ||a-b||^2 log ||a-b|| / (8 pi).

    Returns 0 at coincident points (the continuous limit of d^2 log d).
    """
    d = float(np.hypot(a.easting - b.easting, a.northing - b.northing))
    if d == 0.0:
        return 0.0
    return _TPS_NORM * d * d * np.log(d)


def tps_kernel_matrix(sites: SiteSet, extra: np.ndarray | None = None) -> np.ndarray:
    """Thin-plate kernel evaluated pairwise.

    With `extra` (m, 2) given, returns the (m, n) cross-kernel between
    the extra points and the sites; otherwise the (n, n) Gram matrix.
    """
    a = sites.coords if extra is None else np.asarray(extra, dtype=float)
    b = sites.coords
    diff = a[:, None, :] - b[None, :, :]
    d = np.sqrt((diff**2).sum(axis=-1))
    with np.errstate(divide="ignore", invalid="ignore"):
        k = np.where(d > 0.0, d * d * np.log(d), 0.0)
    return _TPS_NORM * k
