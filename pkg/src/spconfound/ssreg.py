"""Bayesian reduced-rank spatial regression with spike-and-slab priors.

The model is y = beta0 + beta_x x + B xi + e with e ~ N(0, sigma2 I),
fitted on standardized inputs. Two local prior families are sampled
here by Gibbs:

  FV    xi_j | gamma_j ~ gamma_j N(0, psi2) + (1 - gamma_j) N(0, c0 psi2)
  NMIG  as FV plus psi2_j ~ InvGamma(a_psi, b_psi)

with gamma_j ~ Bernoulli(w), beta ~ N(0, V_beta), and
sigma2 ~ InvGamma(a, b). The exposure block (beta0, beta_x) is never
subject to selection. The non-local pMOM family lives in `ssmom`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.linalg import cho_factor, cho_solve, solve_triangular

from .errors import NumericalError, UsageError

__all__ = [
    "PriorFamily",
    "SsPriorConfig",
    "ModelState",
    "StandardizationRecord",
    "PosteriorChain",
    "ChainSummary",
    "standardize",
    "SsGibbs",
    "gibbs_fv",
    "gibbs_nmig",
    "summarize",
]


class PriorFamily(Enum):
    FV = "fv"
    NMIG = "nmig"
    MOM = "mom"


@dataclass(frozen=True)
class SsPriorConfig:
    """Hyperparameters shared across the three prior families."""

    family: PriorFamily
    V_beta: float = 1.0
    a: float = 2.0
    b: float = 0.1
    w: float = 0.5            # slab inclusion probability (FV / NMIG)
    c0: float = 1e-4          # spike shrink factor
    psi2: float = 1.0         # fixed slab variance (FV)
    a_psi: float = 2.0        # NMIG inverse-gamma shape
    b_psi: float = 1.0        # NMIG inverse-gamma scale
    nu: float = 0.348         # pMOM scale
    w_beta_prior: bool = False  # Beta(1,1) prior on w instead of fixed

    def __post_init__(self):
        for name in ("V_beta", "a", "b", "psi2", "a_psi", "b_psi", "nu"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if not 0 < self.w < 1:
            raise ValueError("w must lie in (0, 1)")
        if not 0 < self.c0 < 1:
            raise ValueError("c0 must lie in (0, 1)")


@dataclass(frozen=True)
class ModelState:
    """One sweep's parameter values."""

    beta: np.ndarray
    xi: np.ndarray
    gamma: np.ndarray
    sigma2: float
    psi2: np.ndarray | None = None


@dataclass(frozen=True)
class StandardizationRecord:
    """Per-column means and scales used to standardize (y, x, B)."""

    y_mean: float
    y_scale: float
    x_mean: float
    x_scale: float
    B_mean: np.ndarray = field(repr=False)
    B_scale: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.y_scale <= 0 or self.x_scale <= 0 or np.any(self.B_scale <= 0):
            raise ValueError("standardization scales must be positive")

    def beta_x_to_original(self, beta_x_std):
        return np.asarray(beta_x_std) * self.y_scale / self.x_scale


def standardize(y: np.ndarray, x: np.ndarray, B: np.ndarray):
    """Center and scale y, x, and each basis column to unit variance.

    Returns (y_std, x_std, B_std, record). Columns with zero variance
    are rejected: offering a constant basis column to the samplers is
    a usage error.
    """
    y = np.asarray(y, dtype=float)
    x = np.asarray(x, dtype=float)
    B = np.atleast_2d(np.asarray(B, dtype=float))
    scales = B.std(axis=0)
    if y.std() == 0 or x.std() == 0 or np.any(scales == 0):
        raise UsageError("cannot standardize a constant column")
    rec = StandardizationRecord(
        y_mean=float(y.mean()), y_scale=float(y.std()),
        x_mean=float(x.mean()), x_scale=float(x.std()),
        B_mean=B.mean(axis=0), B_scale=scales,
    )
    return (
        (y - rec.y_mean) / rec.y_scale,
        (x - rec.x_mean) / rec.x_scale,
        (B - rec.B_mean) / rec.B_scale,
        rec,
    )


@dataclass
class PosteriorChain:
    """Stored draws plus bookkeeping; summaries are on the original scale
    when a StandardizationRecord is attached."""

    family: PriorFamily
    beta: np.ndarray = field(repr=False)     # (kept, 2)
    xi: np.ndarray = field(repr=False)       # (kept, p)
    gamma: np.ndarray = field(repr=False)    # (kept, p) in {0,1}
    sigma2: np.ndarray = field(repr=False)   # (kept,)
    burn_in: int = 0
    thinning: int = 1
    psi2: np.ndarray | None = field(default=None, repr=False)
    standardization: StandardizationRecord | None = None
    diagnostics: dict = field(default_factory=dict)

    @property
    def n_kept(self) -> int:
        return self.beta.shape[0]

    @property
    def inclusion_probabilities(self) -> np.ndarray:
        return self.gamma.mean(axis=0)

    @property
    def edf(self) -> int:
        """Bases with posterior inclusion probability above one half."""
        return int((self.inclusion_probabilities > 0.5).sum())

    def states(self):
        for i in range(self.n_kept):
            yield ModelState(
                beta=self.beta[i], xi=self.xi[i], gamma=self.gamma[i],
                sigma2=float(self.sigma2[i]),
                psi2=None if self.psi2 is None else self.psi2[i],
            )


@dataclass(frozen=True)
class ChainSummary:
    """Posterior summaries of the exposure effect, original scale."""

    beta_x_mean: float
    beta_x_median: float
    interval: tuple[float, float]
    inclusion_probabilities: np.ndarray = field(repr=False)
    edf: int = 0

    def __post_init__(self):
        lo, hi = self.interval
        if lo > hi:
            raise ValueError("credible interval is inverted")


def summarize(chain: PosteriorChain) -> ChainSummary:
    """Destandardized posterior summaries of beta_x plus inclusion output."""
    if chain.n_kept == 0:
        raise UsageError("chain holds no post burn-in draws")
    bx = chain.beta[:, 1]
    if chain.standardization is not None:
        bx = chain.standardization.beta_x_to_original(bx)
    lo, hi = np.quantile(bx, [0.025, 0.975])
    return ChainSummary(
        beta_x_mean=float(bx.mean()),
        beta_x_median=float(np.median(bx)),
        interval=(float(lo), float(hi)),
        inclusion_probabilities=chain.inclusion_probabilities,
        edf=chain.edf,
    )


def _draw_theta(rng, AtA, Aty, sigma2, prior_prec):
    """theta | rest ~ N(F A'y / sigma2, F), F^{-1} = A'A/sigma2 + diag(prior_prec)."""
    Fi = AtA / sigma2 + np.diag(prior_prec)
    try:
        c, low = cho_factor(Fi, lower=True)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"conditional precision is not PD: {exc}") from exc
    mean = cho_solve((c, low), Aty / sigma2)
    z = rng.standard_normal(Fi.shape[0])
    return mean + solve_triangular(c, z, lower=True, trans="T")


class SsGibbs:
    """One-sweep engine for the FV / NMIG full conditionals.

    Holds (theta, gamma, psi2, sigma2, w) and advances them in place;
    the chain drivers and the joint-distribution (Geweke-style) tests
    share this exact kernel.
    """

    def __init__(self, x, B, prior: SsPriorConfig, *, nmig, rng,
                 fix_sigma2=None, fix_gamma=None):
        x = np.asarray(x, dtype=float)
        B = np.atleast_2d(np.asarray(B, dtype=float))
        if np.any(B.std(axis=0) == 0):
            raise UsageError("basis matrix has a constant (degenerate) column")
        self.n = x.shape[0]
        self.p = B.shape[1]
        self.A = np.column_stack([np.ones(self.n), x, B])
        self.AtA = self.A.T @ self.A
        self.prior = prior
        self.nmig = nmig
        self.rng = rng
        self.fix_sigma2 = fix_sigma2
        self.fix_gamma = None if fix_gamma is None else np.asarray(fix_gamma, dtype=int)

        self.gamma = (np.ones(self.p, dtype=int) if fix_gamma is None
                      else self.fix_gamma.copy())
        self.psi2 = np.full(self.p, prior.psi2)
        self.sigma2 = 1.0 if fix_sigma2 is None else float(fix_sigma2)
        self.w = prior.w
        self.theta = np.zeros(2 + self.p)

    def draw_from_prior(self):
        """Initialize parameters from the prior (joint-test entry point)."""
        rng, prior = self.rng, self.prior
        if self.fix_gamma is None:
            self.gamma = (rng.random(self.p) < self.w).astype(int)
        if self.nmig:
            self.psi2 = 1.0 / rng.gamma(prior.a_psi, 1.0 / prior.b_psi, size=self.p)
        if self.fix_sigma2 is None:
            self.sigma2 = 1.0 / rng.gamma(prior.a, 1.0 / prior.b)
        sd = np.sqrt(self.psi2 * (self.gamma + (1 - self.gamma) * prior.c0))
        self.theta = np.concatenate([
            np.sqrt(prior.V_beta) * rng.standard_normal(2),
            sd * rng.standard_normal(self.p),
        ])

    def sample_data(self):
        """y | theta, sigma2 ~ N(A theta, sigma2 I)."""
        return self.A @ self.theta + np.sqrt(self.sigma2) * self.rng.standard_normal(self.n)

    def sweep(self, y, Aty=None):
        rng, prior = self.rng, self.prior
        if Aty is None:
            Aty = self.A.T @ y
        var = self.psi2 * (self.gamma + (1 - self.gamma) * prior.c0)
        prior_prec = np.concatenate(([1.0 / prior.V_beta] * 2, 1.0 / var))
        self.theta = _draw_theta(rng, self.AtA, Aty, self.sigma2, prior_prec)
        xi = self.theta[2:]

        # gamma_j | rest: Bernoulli with odds m1/m0
        log_m1 = np.log(self.w) - xi**2 / (2 * self.psi2)
        log_m0 = (np.log1p(-self.w) - 0.5 * np.log(prior.c0)
                  - xi**2 / (2 * prior.c0 * self.psi2))
        prob1 = 1.0 / (1.0 + np.exp(log_m0 - log_m1))
        if self.fix_gamma is None:
            self.gamma = (rng.random(self.p) < prob1).astype(int)

        if self.nmig:
            shrink = self.gamma + (1 - self.gamma) * prior.c0
            self.psi2 = 1.0 / rng.gamma(
                prior.a_psi + 0.5, 1.0 / (prior.b_psi + xi**2 / (2 * shrink)))

        if prior.w_beta_prior:
            k1 = int(self.gamma.sum())
            self.w = rng.beta(1 + k1, 1 + self.p - k1)

        if self.fix_sigma2 is None:
            resid = y - self.A @ self.theta
            self.sigma2 = 1.0 / rng.gamma(
                prior.a + self.n / 2, 1.0 / (prior.b + 0.5 * resid @ resid))


def _gibbs(y, x, B, prior: SsPriorConfig, iters, seed, *, nmig, burn_in,
           thinning, record=None, fix_sigma2=None, fix_gamma=None):
    y = np.asarray(y, dtype=float)
    if burn_in >= iters:
        raise ValueError("burn_in must be smaller than iters")
    rng = np.random.default_rng(seed)
    eng = SsGibbs(x, B, prior, nmig=nmig, rng=rng,
                  fix_sigma2=fix_sigma2, fix_gamma=fix_gamma)
    if fix_sigma2 is None:
        eng.sigma2 = float(np.var(y))
    Aty = eng.A.T @ y
    p = eng.p

    kept = (iters - burn_in) // thinning
    out_beta = np.empty((kept, 2))
    out_xi = np.empty((kept, p))
    out_gamma = np.empty((kept, p), dtype=np.int8)
    out_sigma2 = np.empty(kept)
    out_psi2 = np.empty((kept, p)) if nmig else None
    out_w = np.empty(kept) if prior.w_beta_prior else None

    kidx = 0
    for it in range(iters):
        eng.sweep(y, Aty)
        if it >= burn_in and (it - burn_in) % thinning == 0 and kidx < kept:
            out_beta[kidx] = eng.theta[:2]
            out_xi[kidx] = eng.theta[2:]
            out_gamma[kidx] = eng.gamma
            out_sigma2[kidx] = eng.sigma2
            if nmig:
                out_psi2[kidx] = eng.psi2
            if out_w is not None:
                out_w[kidx] = eng.w
            kidx += 1

    diag = {"iters": iters, "burn_in": burn_in}
    if out_w is not None:
        diag["w_mean"] = float(out_w.mean())
    return PosteriorChain(
        family=PriorFamily.NMIG if nmig else PriorFamily.FV,
        beta=out_beta[:kidx], xi=out_xi[:kidx], gamma=out_gamma[:kidx],
        sigma2=out_sigma2[:kidx], burn_in=burn_in, thinning=thinning,
        psi2=None if out_psi2 is None else out_psi2[:kidx],
        standardization=record, diagnostics=diag,
    )


def gibbs_fv(y, x, B, prior: SsPriorConfig, iters=5000, seed=0, *,
             burn_in=1000, thinning=1, record=None,
             fix_sigma2=None, fix_gamma=None) -> PosteriorChain:
    """Gibbs sampler under fixed-variance spike-and-slab priors.

    Inputs are expected standardized (see `standardize`); pass the
    record so summaries destandardize. `fix_sigma2` / `fix_gamma`
    freeze those conditionals, which the reduction-to-ridge and
    enumeration tests rely on.
    """
    if prior.family is not PriorFamily.FV:
        raise ValueError("prior.family must be FV")
    return _gibbs(y, x, B, prior, iters, seed, nmig=False, burn_in=burn_in,
                  thinning=thinning, record=record,
                  fix_sigma2=fix_sigma2, fix_gamma=fix_gamma)


def gibbs_nmig(y, x, B, prior: SsPriorConfig, iters=5000, seed=0, *,
               burn_in=1000, thinning=1, record=None,
               fix_sigma2=None, fix_gamma=None) -> PosteriorChain:
    """Gibbs sampler under normal-mixture-of-inverse-gamma priors.

    Identical to `gibbs_fv` plus the per-coefficient slab variance
    update psi2_j ~ IG(a_psi + 1/2, b_psi + xi_j^2 / (2 shrink_j)).
    """
    if prior.family is not PriorFamily.NMIG:
        raise ValueError("prior.family must be NMIG")
    return _gibbs(y, x, B, prior, iters, seed, nmig=True, burn_in=burn_in,
                  thinning=thinning, record=record,
                  fix_sigma2=fix_sigma2, fix_gamma=fix_gamma)
