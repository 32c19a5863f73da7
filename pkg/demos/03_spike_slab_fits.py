"""Spike-and-slab reduced-rank fits on one confounded replicate.

Fits the three prior families on the same standardized data: the two
local families by Gibbs, the non-local product-moment family by
model-space Metropolis with Laplace marginals. Compare the exposure
estimates to the plain non-spatial fit.
"""

import numpy as np

from spconfound import (
    ConfoundingScenario,
    NullSpaceType,
    PriorFamily,
    SsPriorConfig,
    calibrate_sigma_w,
    conditional_law,
    fit_ols,
    gibbs_fv,
    gibbs_nmig,
    mom_sampler,
    principal_kriging_basis,
    sample_exposure,
    sample_replicate,
    sample_sites,
    standardize,
    summarize,
)

n = 150
sites = sample_sites(n, seed=4)
scenario = ConfoundingScenario(phi_x=0.05, phi_w=0.5, delta=0.5,
                               sigma2_eps=0.25)
x = sample_exposure(scenario, sites, seed=9)
scenario = scenario.with_sigma2_w(
    calibrate_sigma_w(scenario, sites, x, 0.15) ** 2)
rep = sample_replicate(scenario, sites, conditional_law(scenario, sites, x),
                       x, seed=30)

print(f"one replicate at n = {n}: true beta_x = 2, "
      f"OLS gets {fit_ols(rep.y, rep.x).beta_x_hat:.3f}")

basis = principal_kriging_basis(sites, NullSpaceType.TYPE1)
ys, xs, Bs, record = standardize(rep.y, rep.x, basis.B)
print(f"basis offered to the samplers: {Bs.shape[1]} columns (no truncation)")

samplers = {
    "SS_fv": (gibbs_fv, SsPriorConfig(family=PriorFamily.FV)),
    "SS_nmig": (gibbs_nmig, SsPriorConfig(family=PriorFamily.NMIG)),
    "SS_mom": (mom_sampler, SsPriorConfig(family=PriorFamily.MOM)),
}
for name, (sampler, prior) in samplers.items():
    chain = sampler(ys, xs, Bs, prior, iters=2000, seed=5, burn_in=500,
                    record=record)
    s = summarize(chain)
    top = np.argsort(-s.inclusion_probabilities)[:4]
    print(f"{name:8s} beta_x = {s.beta_x_mean:.3f} "
          f"[{s.interval[0]:.3f}, {s.interval[1]:.3f}], edf = {s.edf}, "
          f"top bases {top.tolist()} "
          f"p = {np.round(s.inclusion_probabilities[top], 2).tolist()}")
print("the non-local family is the most parsimonious; all three pull the "
      "estimate back toward 2")
