"""Command-line harness.

Subcommands: simulate, basis, bias, fit, benchmark, app. Each one
validates its flags, writes outputs under the requested directory, and
exits 0 on success. Schemas for every file written here are described
in the README.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import benchmark as bm
from .application import ingest, run_application, write_report
from .basis import NullSpaceType, principal_kriging_basis, tprs_basis
from .bias import bias_curve, delta_gls, delta_ols
from .errors import SpconfoundError
from .simulate import (
    ConfoundingScenario,
    calibrate_sigma_w,
    conditional_law,
    replicate_seed,
    sample_exposure,
    sample_replicate,
    sample_sites,
    save_replicates,
)
from .ssreg import PriorFamily, SsPriorConfig, gibbs_fv, gibbs_nmig, standardize, summarize
from .ssmom import mom_sampler


def _add_scenario_flags(p):
    p.add_argument("--phix", type=float, required=True, help="exposure range")
    p.add_argument("--phiw", type=float, required=True, help="confounder range")
    p.add_argument("--delta", type=float, default=0.5)
    p.add_argument("--sigma2x", type=float, default=1.0)
    p.add_argument("--sigma2w", type=float, default=None,
                   help="fixed confounder variance; default: calibrate")
    p.add_argument("--sigma2eps", type=float, default=0.25)
    p.add_argument("--beta0", type=float, default=1.0)
    p.add_argument("--betax", type=float, default=2.0)
    p.add_argument("--target-bias", type=float, default=0.15,
                   help="relative OLS bias used when calibrating sigma_w")
    p.add_argument("--n", type=int, default=200, help="number of sites")
    p.add_argument("--seed", type=int, default=0)


def _scenario_from_args(args, sites, x=None):
    scenario = ConfoundingScenario(
        phi_x=args.phix, phi_w=args.phiw, delta=args.delta,
        sigma2_x=args.sigma2x, sigma2_w=args.sigma2w or 1.0,
        sigma2_eps=args.sigma2eps, beta0=args.beta0, beta_x=args.betax,
    )
    if args.sigma2w is None:
        if x is None:
            x = sample_exposure(scenario, sites, replicate_seed(args.seed, 0, 0))
        sw = calibrate_sigma_w(scenario, sites, x, args.target_bias)
        scenario = scenario.with_sigma2_w(sw**2)
    return scenario


def _cmd_simulate(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    sites = sample_sites(args.n, args.seed)
    x = sample_exposure(
        ConfoundingScenario(args.phix, args.phiw, args.delta, args.sigma2x,
                            1.0, args.sigma2eps, args.beta0, args.betax),
        sites, replicate_seed(args.seed, 0, 0))
    scenario = _scenario_from_args(args, sites, x)
    law = conditional_law(scenario, sites, x)
    reps = [
        sample_replicate(scenario, sites, law, x,
                         replicate_seed(args.seed, 0, 1 + r))
        for r in range(args.replicates)
    ]
    path = out / "replicates.npz"
    save_replicates(path, scenario, sites, reps)
    print(f"wrote {path} ({len(reps)} replicates, n={sites.n})")
    return 0


def _cmd_basis(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    sites = sample_sites(args.n, args.seed)
    ns = NullSpaceType(args.nullspace)
    x = None
    if ns.needs_exposure:
        scen = ConfoundingScenario(args.phix, args.phix, 0.5)
        x = sample_exposure(scen, sites, replicate_seed(args.seed, 0, 0))
    basis = principal_kriging_basis(sites, ns, x)
    np.savetxt(out / "pkf_basis.csv", basis.B, delimiter=",", fmt="%.9g")
    np.savetxt(out / "pkf_eigenvalues.csv", basis.eigenvalues,
               delimiter=",", fmt="%.9g")
    if args.tprs_rank:
        t = tprs_basis(sites, args.tprs_rank)
        np.savetxt(out / "tprs_basis.csv", t.basis, delimiter=",", fmt="%.9g")
        np.savetxt(out / "tprs_penalty.csv", t.penalty, delimiter=",", fmt="%.9g")
    print(f"wrote basis matrices to {out}")
    return 0


def _cmd_bias(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    sites = sample_sites(args.n, args.seed)
    scenario = _scenario_from_args(args, sites)
    x = sample_exposure(scenario, sites, replicate_seed(args.seed, 0, 0))
    ns = NullSpaceType(args.nullspace)
    curve = bias_curve(scenario, sites, x, ns, k_max=args.kmax)
    d_o = delta_ols(scenario, sites, x)[1]
    d_g = delta_gls(scenario, sites, x)[1]
    path = out / "bias_curve.csv"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["phi_x", "phi_w", "nullspace", "k", "d_x",
                    "delta_ols", "delta_adj", "delta_gls"])
        for k, dx in curve.as_rows():
            w.writerow([args.phix, args.phiw, ns.value, k,
                        format(dx, ".9g"), format(d_o, ".9g"),
                        format(d_o + dx, ".9g"), format(d_g, ".9g")])
    print(f"wrote {path}")
    return 0


def _cmd_fit(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    data = np.loadtxt(args.data, delimiter=",", skiprows=1)
    if data.ndim != 2 or data.shape[1] < 4:
        print("data file must have columns: s1, s2, x, y", file=sys.stderr)
        return 2
    from .geometry import SiteSet

    sites = SiteSet(data[:, :2])
    x, y = data[:, 2], data[:, 3]
    basis = principal_kriging_basis(sites, NullSpaceType.TYPE1)
    ys, xs, Bs, rec = standardize(y, x, basis.B)
    family = PriorFamily(args.family)
    prior = SsPriorConfig(family=family, nu=args.nu, c0=args.c0, w=args.w)
    sampler = {PriorFamily.FV: gibbs_fv, PriorFamily.NMIG: gibbs_nmig,
               PriorFamily.MOM: mom_sampler}[family]
    chain = sampler(ys, xs, Bs, prior, iters=args.iters, seed=args.seed,
                    burn_in=args.burn_in, record=rec)
    s = summarize(chain)
    summary = {
        "family": family.value,
        "beta_x_mean": s.beta_x_mean,
        "beta_x_median": s.beta_x_median,
        "interval": list(s.interval),
        "edf": s.edf,
        "inclusion_probabilities": s.inclusion_probabilities.tolist(),
        "diagnostics": chain.diagnostics,
    }
    (out / "fit_summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    draws = np.column_stack([chain.beta, chain.sigma2, chain.gamma])
    header = "beta0,beta_x,sigma2," + ",".join(
        f"gamma_{j}" for j in range(chain.gamma.shape[1]))
    np.savetxt(out / "fit_draws.csv", draws, delimiter=",", fmt="%.9g",
               header=header, comments="")
    print(f"wrote fit outputs to {out}")
    return 0


def _cmd_benchmark(args) -> int:
    overrides = dict(master_seed=args.seed, workers=args.workers,
                     out_dir=args.out)
    if args.methods:
        overrides["methods"] = tuple(args.methods.split(","))
    if args.replicates:
        overrides["replicates"] = args.replicates
    if args.n:
        overrides["n_sites"] = args.n
    cfg = (bm.paper_preset(**overrides) if args.preset == "paper"
           else bm.desk_preset(**overrides))
    table = bm.run_study(cfg)
    n_flagged = sum(r["flagged"] for r in table.rows)
    print(f"study complete: {len(cfg.cells)} cells x {cfg.replicates} replicates "
          f"-> {args.out} ({n_flagged} flagged cells)")
    return 0


def _cmd_app(args) -> int:
    table = ingest(args.data, temp_in_kelvin=not args.temp_celsius)
    methods = args.methods.split(",") if args.methods else ["OLS", "SS_mom"]
    report = run_application(table, methods, seed=args.seed,
                             chain_iters=args.iters, chain_burn_in=args.burn_in)
    csv_path, _ = write_report(report, args.out)
    print(f"wrote {csv_path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="spconfound",
        description="Spatial-confounding simulation, bias analysis, "
                    "spike-and-slab fits, and benchmarks.",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="draw and persist field replicates")
    _add_scenario_flags(p)
    p.add_argument("--replicates", type=int, default=10)
    p.add_argument("--out", default="sim_out")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("basis", help="export principal/TPRS basis matrices")
    p.add_argument("--n", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--nullspace", type=int, default=1, choices=(1, 2, 3))
    p.add_argument("--phix", type=float, default=0.2,
                   help="exposure range when the null space needs one")
    p.add_argument("--tprs-rank", type=int, default=0)
    p.add_argument("--out", default="basis_out")
    p.set_defaults(func=_cmd_basis)

    p = sub.add_parser("bias", help="closed-form bias tables for plotting")
    _add_scenario_flags(p)
    p.add_argument("--nullspace", type=int, default=1, choices=(1, 2, 3))
    p.add_argument("--kmax", type=int, default=None)
    p.add_argument("--out", default="bias_out")
    p.set_defaults(func=_cmd_bias)

    p = sub.add_parser("fit", help="spike-and-slab fit of one data file")
    p.add_argument("--data", required=True,
                   help="CSV with header and columns s1, s2, x, y")
    p.add_argument("--family", choices=[f.value for f in PriorFamily],
                   default="mom")
    p.add_argument("--iters", type=int, default=5000)
    p.add_argument("--burn-in", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--nu", type=float, default=0.348)
    p.add_argument("--c0", type=float, default=1e-4)
    p.add_argument("--w", type=float, default=0.5)
    p.add_argument("--out", default="fit_out")
    p.set_defaults(func=_cmd_fit)

    p = sub.add_parser("benchmark", help="run the factorial study")
    p.add_argument("--preset", choices=("desk", "paper"), default="desk")
    p.add_argument("--seed", type=int, default=20240901)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--methods", default=None,
                   help="comma-separated method names overriding the preset")
    p.add_argument("--replicates", type=int, default=None)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--out", default="study_out")
    p.set_defaults(func=_cmd_benchmark)

    p = sub.add_parser("app", help="ozone-style comparison on tabular data")
    p.add_argument("--data", required=True)
    p.add_argument("--methods", default=None)
    p.add_argument("--temp-celsius", action="store_true",
                   help="temperatures already in Celsius")
    p.add_argument("--iters", type=int, default=5000)
    p.add_argument("--burn-in", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="app_out")
    p.set_defaults(func=_cmd_app)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except SpconfoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
