"""Model-space sampler for the first-order product-moment (pMOM) priors.

The slab density xi^2 N(xi; 0, nu sigma2) / (nu sigma2) vanishes at the
origin, so models carrying negligible coefficients are eliminated by
the marginal likelihood itself. Inference runs in two blocks:

  * a Metropolis chain over basis subsets whose acceptance ratio uses
    per-model marginal likelihoods, each computed once by a Laplace
    approximation around the within-model posterior mode and cached;
  * a within-model refresh of (beta, xi, log sigma2) by an
    independence Metropolis step centered at that mode.

The model prior is Beta-Binomial(1, 1): uniform on size, uniform
within size. The exposure block (beta0, beta_x) is always included
with N(0, V_beta) priors, and sigma2 carries an InvGamma(a, b) prior.
All computations are expressed through the Gram matrices of the full
standardized design, so per-model cost is independent of n.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln

from .errors import ModeSearchError
from .ssreg import (
    PosteriorChain,
    PriorFamily,
    SsPriorConfig,
    StandardizationRecord,
)

__all__ = ["MomMarginals", "mom_sampler", "enumerate_models", "log_model_prior"]

_LOG2PI = np.log(2.0 * np.pi)

# Proposal mixture over model moves.
_P_ADD, _P_DELETE = 0.45, 0.45  # remainder is swap

# Newton mode search controls.
_MAX_NEWTON = 100
_GRAD_TOL = 1e-7


def log_model_prior(size: int, p: int) -> float:
    """Beta-Binomial(1,1): log p(M) = -log(p+1) - log C(p, |M|)."""
    return float(-np.log(p + 1) - (gammaln(p + 1) - gammaln(size + 1) - gammaln(p - size + 1)))


class MomMarginals:
    """Laplace marginal likelihoods for pMOM models over a fixed design.

    Parametrize theta = (beta0, beta_x, xi_M, t) with t = log sigma2.
    The joint log density h(theta) and its derivatives are evaluated
    through the Gram matrices G = A'A and g = A'y of the full design
    A = [1 x B], so a model touches only the matching submatrices.
    """

    def __init__(self, y, x, B, prior: SsPriorConfig):
        y = np.asarray(y, dtype=float)
        x = np.asarray(x, dtype=float)
        B = np.atleast_2d(np.asarray(B, dtype=float))
        self.n = y.shape[0]
        self.p = B.shape[1]
        A = np.column_stack([np.ones(self.n), x, B])
        self.G = A.T @ A
        self.g = A.T @ y
        self.yty = float(y @ y)
        self.nu = prior.nu
        self.Vb = prior.V_beta
        self.a = prior.a
        self.b = prior.b
        self._cache: dict[tuple, tuple] = {}
        self.mode_failures = 0

    # -- joint log density and derivatives on the model's subspace --

    def _sub(self, model: tuple):
        cols = [0, 1] + [2 + j for j in model]
        return self.G[np.ix_(cols, cols)], self.g[list(cols)]

    def log_joint(self, model: tuple, phi: np.ndarray, t: float) -> float:
        Gm, gm = self._sub(model)
        return self._log_joint(Gm, gm, len(model), phi, t)

    def _log_joint(self, Gm, gm, m, phi, t):
        tau = np.exp(t)
        rss = self.yty - 2.0 * phi @ gm + phi @ Gm @ phi
        beta, xi = phi[:2], phi[2:]
        val = -0.5 * self.n * (_LOG2PI + t) - rss / (2.0 * tau)
        val += -_LOG2PI - np.log(self.Vb) - beta @ beta / (2.0 * self.Vb)
        if m:
            val += (
                np.sum(2.0 * np.log(np.abs(xi)))
                - 1.5 * m * (np.log(self.nu) + t)
                - 0.5 * m * _LOG2PI
                - xi @ xi / (2.0 * self.nu * tau)
            )
        val += self.a * np.log(self.b) - gammaln(self.a) - (self.a + 1.0) * t - self.b / tau
        return float(val + t)  # + t: jacobian of sigma2 -> log sigma2

    def _grad_hess(self, Gm, gm, m, phi, t):
        tau = np.exp(t)
        Gp = Gm @ phi
        rss = self.yty - 2.0 * phi @ gm + phi @ Gp
        xi = phi[2:]
        d = phi.shape[0]
        grad_phi = -(Gp - gm) / tau
        grad_phi[:2] -= phi[:2] / self.Vb
        gt = -0.5 * self.n + rss / (2.0 * tau) - (self.a + 1.0) + self.b / tau + 1.0
        if m:
            grad_phi[2:] += 2.0 / xi - xi / (self.nu * tau)
            gt += -1.5 * m + xi @ xi / (2.0 * self.nu * tau)
        H = np.empty((d + 1, d + 1))
        Hpp = -Gm / tau
        Hpp[0, 0] -= 1.0 / self.Vb
        Hpp[1, 1] -= 1.0 / self.Vb
        if m:
            ii = np.arange(2, d)
            Hpp[ii, ii] += -2.0 / xi**2 - 1.0 / (self.nu * tau)
        Hpt = (Gp - gm) / tau
        if m:
            Hpt[2:] += xi / (self.nu * tau)
        Htt = -rss / (2.0 * tau) - self.b / tau
        if m:
            Htt -= xi @ xi / (2.0 * self.nu * tau)
        H[:d, :d] = Hpp
        H[:d, d] = Hpt
        H[d, :d] = Hpt
        H[d, d] = Htt
        return np.append(grad_phi, gt), H

    def _find_mode(self, Gm, gm, m):
        """Ascend the joint log density by damped Newton steps.

        Starts from the ridge least-squares solution with coefficients
        nudged off zero (the pMOM log barrier keeps each xi_j on its
        starting side). Raises ModeSearchError on failure.
        """
        d = 2 + m
        phi = np.linalg.solve(Gm + 1e-8 * np.eye(d), gm)
        if m:
            tiny = np.abs(phi[2:]) < 1e-3
            phi[2:][tiny] = np.where(phi[2:][tiny] >= 0, 1e-3, -1e-3)
        rss = max(self.yty - 2.0 * phi @ gm + phi @ Gm @ phi, 1e-10)
        th = np.append(phi, np.log(max(rss / max(self.n, 1), 1e-8)))
        f = self._log_joint(Gm, gm, m, th[:-1], th[-1])
        grad_norm = np.inf
        for _ in range(_MAX_NEWTON):
            grad, H = self._grad_hess(Gm, gm, m, th[:-1], th[-1])
            grad_norm = np.abs(grad).max()
            if grad_norm < _GRAD_TOL * (1.0 + abs(f)):
                break
            try:
                step = np.linalg.solve(H, -grad)
            except np.linalg.LinAlgError:
                step = grad
            if step @ grad <= 0:  # not an ascent direction: fall back
                step = grad
            alpha, improved = 1.0, False
            for _ in range(50):
                cand = th + alpha * step
                if m and np.any(cand[2:-1] * th[2:-1] <= 0.0):
                    alpha *= 0.5
                    continue
                fc = self._log_joint(Gm, gm, m, cand[:-1], cand[-1])
                if fc > f:
                    th, f, improved = cand, fc, True
                    break
                alpha *= 0.5
            if not improved:
                break
        if not np.isfinite(f) or grad_norm > 1e-4 * (1.0 + abs(f)):
            raise ModeSearchError(f"Newton stalled (|grad| = {grad_norm:.2e})")
        return th, f

    def laplace(self, model: tuple):
        """(log marginal + log model prior, mode, hessian) for one model.

        Cached: the chain revisits sparse neighborhoods constantly and
        the marginal is deterministic per model.
        """
        hit = self._cache.get(model, False)
        if hit is None:
            raise ModeSearchError("mode search failed previously for this model")
        if hit is not False:
            return hit
        Gm, gm = self._sub(model)
        m = len(model)
        try:
            th, f = self._find_mode(Gm, gm, m)
        except ModeSearchError:
            self._cache[model] = None
            raise
        _, H = self._grad_hess(Gm, gm, m, th[:-1], th[-1])
        sign, logdet = np.linalg.slogdet(-H)
        if sign <= 0:
            H = H - 1e-8 * np.abs(H).max() * np.eye(H.shape[0])
            sign, logdet = np.linalg.slogdet(-H)
            if sign <= 0:
                self._cache[model] = None
                raise ModeSearchError("hessian not negative definite at mode")
        d = th.shape[0]
        log_marg = f + 0.5 * d * _LOG2PI - 0.5 * logdet
        value = (log_marg + log_model_prior(m, self.p), th, H)
        self._cache[model] = value
        return value


def enumerate_models(y, x, B, prior: SsPriorConfig) -> dict[tuple, float]:
    """Exact posterior over all 2^p models under the same Laplace
    marginals the chain uses. Only sensible for small p."""
    from itertools import combinations

    marg = MomMarginals(y, x, B, prior)
    p = marg.p
    logs = {}
    for m in range(p + 1):
        for model in combinations(range(p), m):
            try:
                logs[model] = marg.laplace(model)[0]
            except ModeSearchError:
                continue
    keys = list(logs)
    lv = np.array([logs[k] for k in keys])
    wts = np.exp(lv - lv.max())
    wts /= wts.sum()
    return dict(zip(keys, wts))


def _propose(rng, model: tuple, p: int):
    """Draw one add/delete/swap move; None when the move is impossible.

    Returns (proposal, log q(model|proposal) - log q(proposal|model)).
    """
    inc = set(model)
    m = len(inc)
    u = rng.random()
    if u < _P_ADD:
        if m == p:
            return None, 0.0
        excluded = [j for j in range(p) if j not in inc]
        j = excluded[rng.integers(len(excluded))]
        prop = tuple(sorted(inc | {j}))
        # forward: add one of (p - m); back: delete one of (m + 1)
        return prop, np.log(_P_DELETE / (m + 1)) - np.log(_P_ADD / (p - m))
    if u < _P_ADD + _P_DELETE:
        if m == 0:
            return None, 0.0
        j = sorted(inc)[rng.integers(m)]
        prop = tuple(sorted(inc - {j}))
        return prop, np.log(_P_ADD / (p - m + 1)) - np.log(_P_DELETE / m)
    if m == 0 or m == p:
        return None, 0.0
    j_in = sorted(inc)[rng.integers(m)]
    excluded = [j for j in range(p) if j not in inc]
    j_out = excluded[rng.integers(len(excluded))]
    prop = tuple(sorted((inc - {j_in}) | {j_out}))
    return prop, 0.0  # symmetric


@dataclass
class _ThetaBlock:
    """Within-model state refreshed by mode-centered independence steps."""

    model: tuple
    theta: np.ndarray
    log_dens: float
    chol: np.ndarray = field(repr=False)  # lower factor of (-H)^{-1} scaled


# Proposal covariance inflation for the independence refresh.
_PROP_SCALE = 1.4


def _proposal_chol(H):
    d = H.shape[0]
    cov = np.linalg.inv(-H) * _PROP_SCALE
    cov = 0.5 * (cov + cov.T)
    return np.linalg.cholesky(cov + 1e-12 * np.eye(d))


def _log_mvn(delta, chol):
    z = np.linalg.solve(chol, delta)
    return -0.5 * z @ z - np.log(np.diag(chol)).sum() - 0.5 * delta.shape[0] * _LOG2PI


def mom_sampler(y, x, B, prior: SsPriorConfig, iters=5000, seed=0, *,
                burn_in=1000, thinning=1, record: StandardizationRecord | None = None,
                init_model: tuple = ()) -> PosteriorChain:
    """Sample basis subsets and coefficients under pMOM priors.

    Expects standardized inputs. Each iteration makes one model move
    (45% add / 45% delete / 10% swap, accepted on cached Laplace
    marginal ratios) followed by one independence refresh of
    (beta, xi, log sigma2) around the current model's posterior mode.
    Models whose mode search fails are skipped: the proposal is
    rejected and counted in diagnostics.
    """
    if prior.family is not PriorFamily.MOM:
        raise ValueError("prior.family must be MOM")
    if burn_in >= iters:
        raise ValueError("burn_in must be smaller than iters")
    marg = MomMarginals(y, x, B, prior)
    p = marg.p
    rng = np.random.default_rng(seed)

    def make_block(model):
        log_post, th, H = marg.laplace(model)
        chol = _proposal_chol(H)
        theta = th.copy()
        return log_post, _ThetaBlock(model=model, theta=theta,
                                     log_dens=marg.log_joint(model, theta[:-1], theta[-1]),
                                     chol=chol)

    cur_model = tuple(sorted(init_model))
    cur_log_post, cur_block = make_block(cur_model)
    mode_block_cache = {cur_model: (cur_log_post, cur_block.chol,
                                    marg.laplace(cur_model)[1])}

    kept = (iters - burn_in) // thinning
    out_beta = np.empty((kept, 2))
    out_xi = np.zeros((kept, p))
    out_gamma = np.zeros((kept, p), dtype=np.int8)
    out_sigma2 = np.empty(kept)
    accept_model = accept_theta = proposed = 0
    kidx = 0

    for it in range(iters):
        # --- model move on Laplace marginal ratios ---
        prop, log_q = _propose(rng, cur_model, p)
        if prop is not None:
            proposed += 1
            try:
                if prop in mode_block_cache:
                    prop_log_post, prop_chol, prop_mode = mode_block_cache[prop]
                else:
                    prop_log_post, prop_mode, prop_H = marg.laplace(prop)
                    prop_chol = _proposal_chol(prop_H)
                    mode_block_cache[prop] = (prop_log_post, prop_chol, prop_mode)
                ok = True
            except ModeSearchError:
                marg.mode_failures += 1
                ok = False
            if ok and np.log(rng.random()) < prop_log_post - cur_log_post + log_q:
                accept_model += 1
                cur_model = prop
                cur_log_post = prop_log_post
                theta0 = prop_mode.copy()
                cur_block = _ThetaBlock(
                    model=prop, theta=theta0,
                    log_dens=marg.log_joint(prop, theta0[:-1], theta0[-1]),
                    chol=prop_chol,
                )

        # --- within-model refresh: independence step at the mode ---
        mode = mode_block_cache[cur_model][2]
        chol = cur_block.chol
        z = rng.standard_normal(mode.shape[0])
        cand = mode + chol @ z
        if not len(cur_model) or np.all(cand[2:-1] * mode[2:-1] > 0.0):
            cand_dens = marg.log_joint(cur_model, cand[:-1], cand[-1])
            log_ratio = (cand_dens - cur_block.log_dens
                         + _log_mvn(cur_block.theta - mode, chol)
                         - _log_mvn(cand - mode, chol))
            if np.log(rng.random()) < log_ratio:
                cur_block.theta = cand
                cur_block.log_dens = cand_dens
                accept_theta += 1

        if it >= burn_in and (it - burn_in) % thinning == 0 and kidx < kept:
            th = cur_block.theta
            out_beta[kidx] = th[:2]
            if cur_model:
                out_xi[kidx, list(cur_model)] = th[2:-1]
                out_gamma[kidx, list(cur_model)] = 1
            out_sigma2[kidx] = np.exp(th[-1])
            kidx += 1

    diag = {
        "iters": iters,
        "burn_in": burn_in,
        "model_moves_proposed": proposed,
        "model_acceptance": accept_model / max(proposed, 1),
        "theta_acceptance": accept_theta / iters,
        "distinct_models": len(marg._cache),
        "mode_failures": marg.mode_failures,
    }
    return PosteriorChain(
        family=PriorFamily.MOM,
        beta=out_beta[:kidx], xi=out_xi[:kidx], gamma=out_gamma[:kidx],
        sigma2=out_sigma2[:kidx], burn_in=burn_in, thinning=thinning,
        standardization=record, diagnostics=diag,
    )
