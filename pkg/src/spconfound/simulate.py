"""Joint Gaussian simulation of exposure, conditional confounder, and outcome.

The generative model: X ~ N(0, sigma_x^2 R_x) on a site set, then

    W | X = x  ~  N(mu_wx, Sigma_wx),
    mu_wx    = delta (sigma_w / sigma_x) R_w^{1/2} R_x^{-1/2} x,
    Sigma_wx = sigma_w^2 (1 - delta^2) R_w,
    Y        = beta0 + beta_x x + w + eps,   eps iid N(0, sigma_eps^2),

with exponential correlation matrices R_x, R_w sharing the factorized
cross-covariance parametrization. `calibrate_sigma_w` exploits the
linearity of the unadjusted OLS bias in sigma_w to hit a target
relative bias.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import CalibrationError
from .geometry import (
    ExpCorrelation,
    SiteSet,
    SqrtMethod,
    correlation_matrix,
    matrix_sqrt,
)

__all__ = [
    "ConfoundingScenario",
    "ConditionalLaw",
    "FieldReplicate",
    "sample_exposure",
    "conditional_law",
    "sample_replicate",
    "calibrate_sigma_w",
    "sample_sites",
    "replicate_seed",
    "save_replicates",
    "load_replicates",
]


@dataclass(frozen=True)
class ConfoundingScenario:
    """Generative parameters for one (phi_x, phi_w) cell."""

    phi_x: float
    phi_w: float
    delta: float
    sigma2_x: float = 1.0
    sigma2_w: float = 1.0
    sigma2_eps: float = 0.25
    beta0: float = 1.0
    beta_x: float = 2.0
    sqrt_method: SqrtMethod = SqrtMethod.SYMMETRIC_EIGEN

    def __post_init__(self):
        if not (self.phi_x > 0 and self.phi_w > 0):
            raise ValueError("range parameters must be positive")
        if not abs(self.delta) < 1:
            raise ValueError("correlation delta must lie in (-1, 1)")
        if not (self.sigma2_x > 0 and self.sigma2_w > 0):
            raise ValueError("field variances must be positive")
        if self.sigma2_eps < 0:
            raise ValueError("noise variance must be nonnegative")

    def with_sigma2_w(self, sigma2_w: float) -> "ConfoundingScenario":
        return ConfoundingScenario(
            self.phi_x, self.phi_w, self.delta, self.sigma2_x, sigma2_w,
            self.sigma2_eps, self.beta0, self.beta_x, self.sqrt_method,
        )

    def to_dict(self) -> dict:
        return {
            "phi_x": self.phi_x, "phi_w": self.phi_w, "delta": self.delta,
            "sigma2_x": self.sigma2_x, "sigma2_w": self.sigma2_w,
            "sigma2_eps": self.sigma2_eps, "beta0": self.beta0,
            "beta_x": self.beta_x, "sqrt_method": self.sqrt_method.value,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ConfoundingScenario":
        d = dict(d)
        d["sqrt_method"] = SqrtMethod(d.get("sqrt_method", "symmetric_eigen"))
        return cls(**d)


@dataclass(frozen=True)
class ConditionalLaw:
    """Mean, covariance and square-root factor of W | X = x."""

    mean: np.ndarray = field(repr=False)
    cov: np.ndarray = field(repr=False)
    factor: np.ndarray = field(repr=False)


def smoothing_operator(scenario: ConfoundingScenario, sites: SiteSet) -> np.ndarray:
    """The matrix R_w^{1/2} R_x^{-1/2} shared by the conditional mean
    and every closed-form bias expression."""
    rx = correlation_matrix(sites, ExpCorrelation(scenario.phi_x))
    rw = correlation_matrix(sites, ExpCorrelation(scenario.phi_w))
    fx = matrix_sqrt(rx, scenario.sqrt_method)
    fw = matrix_sqrt(rw, scenario.sqrt_method)
    return fw @ np.linalg.inv(fx)


def sample_exposure(scenario: ConfoundingScenario, sites: SiteSet, seed: int) -> np.ndarray:
    """One draw of X ~ N(0, sigma_x^2 R_x), deterministic given seed."""
    rx = correlation_matrix(sites, ExpCorrelation(scenario.phi_x))
    fx = matrix_sqrt(rx, scenario.sqrt_method)
    rng = np.random.default_rng(seed)
    return np.sqrt(scenario.sigma2_x) * (fx @ rng.standard_normal(sites.n))


def conditional_law(scenario: ConfoundingScenario, sites: SiteSet, x: np.ndarray) -> ConditionalLaw:
    """Conditional law of the confounder given the exposure draw."""
    x = np.asarray(x, dtype=float)
    if x.shape != (sites.n,):
        raise ValueError("x must be a vector of length n")
    rx = correlation_matrix(sites, ExpCorrelation(scenario.phi_x))
    rw = correlation_matrix(sites, ExpCorrelation(scenario.phi_w))
    fx = matrix_sqrt(rx, scenario.sqrt_method)
    fw = matrix_sqrt(rw, scenario.sqrt_method)
    sx = np.sqrt(scenario.sigma2_x)
    sw = np.sqrt(scenario.sigma2_w)
    mean = scenario.delta * (sw / sx) * (fw @ np.linalg.solve(fx, x))
    cov = scenario.sigma2_w * (1.0 - scenario.delta**2) * rw
    # factor of the conditional covariance (scale the correlation factor)
    factor = np.sqrt(scenario.sigma2_w * (1.0 - scenario.delta**2)) * fw
    return ConditionalLaw(mean=mean, cov=cov, factor=factor)


@dataclass(frozen=True)
class FieldReplicate:
    """One draw of (x, w, y) at n sites plus the seed that produced it."""

    x: np.ndarray = field(repr=False)
    w: np.ndarray = field(repr=False)
    y: np.ndarray = field(repr=False)
    seed: int = 0

    @property
    def n(self) -> int:
        return self.x.shape[0]


def sample_replicate(
    scenario: ConfoundingScenario,
    sites: SiteSet,
    law: ConditionalLaw,
    x: np.ndarray,
    seed: int,
) -> FieldReplicate:
    """Draw W | X = x and the outcome Y, deterministic given seed."""
    x = np.asarray(x, dtype=float)
    if law.mean.shape != x.shape:
        raise ValueError("conditional law is inconsistent with x")
    rng = np.random.default_rng(seed)
    w = law.mean + law.factor @ rng.standard_normal(sites.n)
    eps = (
        np.sqrt(scenario.sigma2_eps) * rng.standard_normal(sites.n)
        if scenario.sigma2_eps > 0
        else np.zeros(sites.n)
    )
    y = scenario.beta0 + scenario.beta_x * x + w + eps
    return FieldReplicate(x=x, w=w, y=y, seed=seed)


def calibrate_sigma_w(
    scenario: ConfoundingScenario,
    sites: SiteSet,
    x: np.ndarray,
    target_relative_bias: float,
) -> float:
    """sigma_w making the unadjusted-OLS relative bias equal the target.

    The bias is linear in sigma_w, so it suffices to evaluate the bias
    factor at sigma_w = 1 and scale. Raises CalibrationError when the
    factor vanishes (e.g. delta = 0) or the implied sigma_w is not
    positive (target of the wrong sign, or zero).
    """
    x = np.asarray(x, dtype=float)
    unit = scenario.with_sigma2_w(1.0)
    z = smoothing_operator(unit, sites) @ x
    design = np.column_stack([np.ones(sites.n), x])
    coef = np.linalg.lstsq(design, z, rcond=None)[0]
    bias_factor = scenario.delta / np.sqrt(scenario.sigma2_x) * coef[1]
    if bias_factor == 0.0:
        raise CalibrationError("bias factor is zero; relative bias cannot be targeted")
    sigma_w = target_relative_bias * scenario.beta_x / bias_factor
    if not sigma_w > 0:
        raise CalibrationError(
            f"target {target_relative_bias} implies nonpositive sigma_w "
            f"(bias factor {bias_factor:.4g})"
        )
    return sigma_w


def sample_sites(n: int, seed: int, grid_size: int = 64) -> SiteSet:
    """n sites drawn without replacement from a grid over the unit square."""
    if n > grid_size * grid_size:
        raise ValueError("more sites requested than grid nodes")
    rng = np.random.default_rng(seed)
    idx = rng.choice(grid_size * grid_size, size=n, replace=False)
    ticks = (np.arange(grid_size) + 0.5) / grid_size
    coords = np.column_stack([ticks[idx % grid_size], ticks[idx // grid_size]])
    return SiteSet(coords)


def replicate_seed(study_seed: int, cell_index: int, replicate_index: int) -> int:
    """Counter-based seed: any replicate is reproducible in isolation."""
    ss = np.random.SeedSequence(study_seed, spawn_key=(cell_index, replicate_index))
    return int(ss.generate_state(1, np.uint64)[0])


def save_replicates(path, scenario: ConfoundingScenario, sites: SiteSet,
                    replicates: list[FieldReplicate]) -> None:
    """Persist replicates as an .npz archive; see README for the schema."""
    np.savez_compressed(
        path,
        header=json.dumps({
            "scenario": scenario.to_dict(),
            "n": sites.n,
            "seeds": [int(r.seed) for r in replicates],
        }),
        coords=sites.coords,
        x=np.stack([r.x for r in replicates]),
        w=np.stack([r.w for r in replicates]),
        y=np.stack([r.y for r in replicates]),
    )


def load_replicates(path):
    """Inverse of save_replicates: (scenario, sites, [FieldReplicate])."""
    with np.load(path, allow_pickle=False) as z:
        header = json.loads(str(z["header"]))
        scenario = ConfoundingScenario.from_dict(header["scenario"])
        sites = SiteSet(z["coords"])
        reps = [
            FieldReplicate(x=z["x"][i], w=z["w"][i], y=z["y"][i], seed=s)
            for i, s in enumerate(header["seeds"])
        ]
    return scenario, sites, reps
