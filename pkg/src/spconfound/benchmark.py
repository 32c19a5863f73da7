"""Factorial benchmark: scenario grid x replicates x methods.

Raw-first persistence: every replicate's estimates are written to
raw_estimates.csv before any aggregate is formed, so partial reruns
and audits never depend on in-memory state. All randomness is
counter-based off the master seed, which makes the raw files
byte-identical across parallelism degrees.

Outputs (all schemas documented in the README):
  raw_estimates.csv  phi_x, phi_w, method, replicate, estimate, lo, hi,
                     edf, seed, error
  ratios.csv         phi_x, phi_w, method, mae, rmse, q1, q2,
                     n_success, flagged
  probabilities.json per-method probability summaries (null = undefined)
  edf.csv            phi_x, phi_w, method, median_edf
  study_config.json  exact input echo
"""

from __future__ import annotations

import csv
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from .basis import NullSpaceType, principal_kriging_basis
from .competitors import (
    MethodId,
    SPLINE_METHODS,
    SreConfig,
    fit_ols,
    fit_spline_family,
    fit_sre,
)
from .simulate import (
    ConfoundingScenario,
    calibrate_sigma_w,
    conditional_law,
    replicate_seed,
    sample_exposure,
    sample_replicate,
    sample_sites,
)
from .ssreg import PriorFamily, SsPriorConfig, gibbs_fv, gibbs_nmig, standardize, summarize
from .ssmom import mom_sampler

__all__ = [
    "StudyConfig",
    "BenchmarkTable",
    "desk_preset",
    "paper_preset",
    "run_study",
    "probability_summaries",
    "edf_summary",
]

SS_METHODS = ("SS_fv", "SS_nmig", "SS_mom")
ALL_METHODS = tuple(m.value for m in MethodId) + SS_METHODS

# spawn-key sentinels for per-study / per-cell streams
_SITES_KEY = 4242
_EXPOSURE_KEY = 1717
_METHOD_KEY = 9090


@dataclass(frozen=True)
class StudyConfig:
    """Complete description of one benchmark study."""

    phi_grid: tuple = (0.05, 0.2, 0.5)
    n_sites: int = 200
    replicates: int = 30
    delta: float = 0.5
    sigma2_x: float = 1.0
    sigma2_eps: float = 0.25
    beta0: float = 1.0
    beta_x: float = 2.0
    target_relative_bias: float = 0.15
    methods: tuple = ("OLS", "SS_mom")
    master_seed: int = 20240901
    workers: int = 1
    chain_iters: int = 2000
    chain_burn_in: int = 500
    spline_k_max: int = 150
    resample_exposure: bool = False
    out_dir: str = "study_out"

    def __post_init__(self):
        if self.replicates < 1:
            raise ValueError("need at least one replicate")
        if not self.phi_grid:
            raise ValueError("phi grid must be non-empty")
        unknown = set(self.methods) - set(ALL_METHODS)
        if unknown:
            raise ValueError(f"unknown methods: {sorted(unknown)}")

    @property
    def cells(self):
        return [(px, pw) for px in self.phi_grid for pw in self.phi_grid]

    def to_dict(self):
        d = asdict(self)
        d["phi_grid"] = list(self.phi_grid)
        d["methods"] = list(self.methods)
        return d


def desk_preset(**overrides) -> StudyConfig:
    """3x3 grid {0.05, 0.2, 0.5}^2, n=200, R=30, chains 2000/500."""
    return StudyConfig(**overrides)


def paper_preset(**overrides) -> StudyConfig:
    """Full-scale preset: 10x10 grid, n=500, R=100, chains 5000/1000."""
    base = dict(
        phi_grid=tuple(np.round(np.arange(0.05, 0.51, 0.05), 2)),
        n_sites=500,
        replicates=100,
        chain_iters=5000,
        chain_burn_in=1000,
        methods=ALL_METHODS,
    )
    base.update(overrides)
    return StudyConfig(**base)


@dataclass
class BenchmarkTable:
    """Aggregated per-cell, per-method metrics plus derived summaries."""

    config: StudyConfig
    rows: list = field(default_factory=list)           # dicts: ratios.csv rows
    probabilities: dict = field(default_factory=dict)
    edf_rows: list = field(default_factory=list)
    raw_path: str = ""


def _seed_for(master, *key) -> int:
    ss = np.random.SeedSequence(master, spawn_key=tuple(int(k) for k in key))
    return int(ss.generate_state(1, np.uint64)[0])


# ---------------------------------------------------------------------------
# per-(cell, replicate) work unit
# ---------------------------------------------------------------------------

_CELL_CACHE: dict = {}


def _cell_context(cfg: StudyConfig, cell_index: int):
    """Sites, exposure, calibrated scenario, conditional law, and the
    principal basis for one grid cell. Memoized per process."""
    key = (cfg.master_seed, cfg.n_sites, cfg.phi_grid, cell_index,
           cfg.delta, cfg.sigma2_x, cfg.sigma2_eps, cfg.beta0, cfg.beta_x,
           cfg.target_relative_bias)
    ctx = _CELL_CACHE.get(key)
    if ctx is not None:
        return ctx
    phi_x, phi_w = cfg.cells[cell_index]
    sites = sample_sites(cfg.n_sites, _seed_for(cfg.master_seed, _SITES_KEY))
    scenario = ConfoundingScenario(
        phi_x=phi_x, phi_w=phi_w, delta=cfg.delta, sigma2_x=cfg.sigma2_x,
        sigma2_w=1.0, sigma2_eps=cfg.sigma2_eps,
        beta0=cfg.beta0, beta_x=cfg.beta_x,
    )
    x = sample_exposure(scenario, sites,
                        _seed_for(cfg.master_seed, cell_index, _EXPOSURE_KEY))
    sigma_w = calibrate_sigma_w(scenario, sites, x, cfg.target_relative_bias)
    scenario = scenario.with_sigma2_w(sigma_w**2)
    law = conditional_law(scenario, sites, x)
    basis = principal_kriging_basis(sites, NullSpaceType.TYPE1)
    ctx = (sites, scenario, x, law, basis)
    if len(_CELL_CACHE) > 256:
        _CELL_CACHE.clear()
    _CELL_CACHE[key] = ctx
    return ctx


def _fit_method(method: str, rep, sites, basis, cfg: StudyConfig, seed: int):
    """Run one estimator; returns (estimate, lo, hi, edf)."""
    y, x = rep.y, rep.x
    if method == "OLS":
        r = fit_ols(y, x)
        return r.beta_x_hat, r.interval[0], r.interval[1], r.edf
    if method == "SRE":
        r = fit_sre(y, x, sites, SreConfig(iters=cfg.chain_iters,
                                           burn_in=cfg.chain_burn_in), seed=seed)
        return r.beta_x_hat, r.interval[0], r.interval[1], r.edf
    if method in SS_METHODS:
        ys, xs, Bs, rec = standardize(y, x, basis.B)
        prior = SsPriorConfig(family=PriorFamily[method.split("_")[1].upper()])
        sampler = {"SS_fv": gibbs_fv, "SS_nmig": gibbs_nmig, "SS_mom": mom_sampler}[method]
        chain = sampler(ys, xs, Bs, prior, iters=cfg.chain_iters, seed=seed,
                        burn_in=cfg.chain_burn_in, record=rec)
        s = summarize(chain)
        return s.beta_x_mean, s.interval[0], s.interval[1], float(s.edf)
    mid = MethodId(method)
    if mid in SPLINE_METHODS:
        r = fit_spline_family(mid, y, x, sites, k_max=cfg.spline_k_max)
        lo, hi = r.interval if r.interval else (np.nan, np.nan)
        return r.beta_x_hat, lo, hi, r.edf
    raise ValueError(f"unhandled method {method}")


def _run_task(args):
    """One (cell, replicate): simulate data, fit every method."""
    cfg, cell_index, rep_index = args
    sites, scenario, x, law, basis = _cell_context(cfg, cell_index)
    if cfg.resample_exposure:
        x = sample_exposure(
            scenario, sites,
            _seed_for(cfg.master_seed, cell_index, rep_index, _EXPOSURE_KEY))
        sigma_w = calibrate_sigma_w(scenario, sites, x, cfg.target_relative_bias)
        scenario = scenario.with_sigma2_w(sigma_w**2)
        law = conditional_law(scenario, sites, x)
    data_seed = replicate_seed(cfg.master_seed, cell_index, rep_index)
    rep = sample_replicate(scenario, sites, law, x, data_seed)
    phi_x, phi_w = cfg.cells[cell_index]
    out = []
    for mi, method in enumerate(cfg.methods):
        seed = _seed_for(cfg.master_seed, cell_index, rep_index, _METHOD_KEY + mi)
        try:
            est, lo, hi, edf = _fit_method(method, rep, sites, basis, cfg, seed)
            out.append((cell_index, phi_x, phi_w, method, rep_index,
                        est, lo, hi, edf, data_seed, ""))
        except Exception as exc:  # failures are recorded, never fatal
            out.append((cell_index, phi_x, phi_w, method, rep_index,
                        None, None, None, None, data_seed,
                        f"{type(exc).__name__}: {exc}"))
    return out


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return format(v, ".9g")
    return str(v)


def run_study(cfg: StudyConfig) -> BenchmarkTable:
    """Execute the study; persist raw rows first, then aggregates."""
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "study_config.json").write_text(
        json.dumps(cfg.to_dict(), indent=2) + "\n")

    tasks = [(cfg, ci, ri)
             for ci in range(len(cfg.cells))
             for ri in range(cfg.replicates)]
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            chunks = list(pool.map(_run_task, tasks, chunksize=1))
    else:
        chunks = [_run_task(t) for t in tasks]

    rows = [r for chunk in chunks for r in chunk]
    rows.sort(key=lambda r: (r[0], r[4], cfg.methods.index(r[3])))

    raw_path = out_dir / "raw_estimates.csv"
    with open(raw_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["phi_x", "phi_w", "method", "replicate",
                    "estimate", "lo", "hi", "edf", "seed", "error"])
        for (_, phi_x, phi_w, method, ri, est, lo, hi, edf, seed, err) in rows:
            w.writerow([_fmt(phi_x), _fmt(phi_w), method, ri, _fmt(est),
                        _fmt(lo), _fmt(hi), _fmt(edf), seed, err])

    table = aggregate(cfg, rows)
    table.raw_path = str(raw_path)

    with open(out_dir / "ratios.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["phi_x", "phi_w", "method", "mae", "rmse", "q1", "q2",
                    "n_success", "flagged"])
        for r in table.rows:
            w.writerow([_fmt(r["phi_x"]), _fmt(r["phi_w"]), r["method"],
                        _fmt(r["mae"]), _fmt(r["rmse"]), _fmt(r["q1"]),
                        _fmt(r["q2"]), r["n_success"], int(r["flagged"])])
    with open(out_dir / "edf.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["phi_x", "phi_w", "method", "median_edf"])
        for r in table.edf_rows:
            w.writerow([_fmt(r["phi_x"]), _fmt(r["phi_w"]), r["method"],
                        _fmt(r["median_edf"])])
    (out_dir / "probabilities.json").write_text(
        json.dumps(table.probabilities, indent=2, sort_keys=True) + "\n")
    return table


def aggregate(cfg: StudyConfig, rows) -> BenchmarkTable:
    """Per-cell MAE/RMSE and OLS-referenced ratios from raw rows.

    Rows are re-sorted by (cell, replicate) first, so the aggregation is
    exactly permutation-invariant (floating-point sums included).
    """
    rows = sorted(rows, key=lambda r: (r[0], r[4], cfg.methods.index(r[3])))
    beta_x = cfg.beta_x
    by_cell_method: dict = {}
    for (ci, phi_x, phi_w, method, ri, est, lo, hi, edf, seed, err) in rows:
        by_cell_method.setdefault((ci, method), []).append((ri, est, edf))

    out_rows = []
    cell_stats: dict = {}
    for ci, (phi_x, phi_w) in enumerate(cfg.cells):
        for method in cfg.methods:
            entries = by_cell_method.get((ci, method), [])
            ok = [(e, d) for (_, e, d) in entries if e is not None]
            n_success = len(ok)
            flagged = n_success < 0.9 * cfg.replicates
            if n_success:
                errs = np.array([e - beta_x for e, _ in ok])
                mae = float(np.abs(errs).mean())
                rmse = float(np.sqrt((errs**2).mean()))
            else:
                mae = rmse = float("nan")
            cell_stats[(ci, method)] = (mae, rmse)
            out_rows.append(dict(phi_x=phi_x, phi_w=phi_w, method=method,
                                 mae=mae, rmse=rmse, q1=np.nan, q2=np.nan,
                                 n_success=n_success, flagged=flagged))
    for r in out_rows:
        ci = cfg.cells.index((r["phi_x"], r["phi_w"]))
        mae_ols, rmse_ols = cell_stats.get((ci, "OLS"), (np.nan, np.nan))
        r["q1"] = float(r["mae"] / mae_ols) if mae_ols else np.nan
        r["q2"] = float(r["rmse"] / rmse_ols) if rmse_ols else np.nan

    table = BenchmarkTable(config=cfg, rows=out_rows)
    table.probabilities = probability_summaries(cfg, rows, out_rows)
    table.edf_rows = edf_summary(cfg, rows)
    return table


def probability_summaries(cfg: StudyConfig, raw_rows, ratio_rows) -> dict:
    """Named probabilities per method, OLS-referenced.

    Replicate-level directional indicators use strict inequality (ties
    never count); Q2-based rows are proportions over cells. Empty
    condition sets give null, not zero.
    """
    beta_x = cfg.beta_x
    ols_err: dict = {}
    for (ci, _, _, method, ri, est, *_rest) in raw_rows:
        if method == "OLS" and est is not None:
            ols_err[(ci, ri)] = abs(est - beta_x)

    def frac(values):
        return None if not values else float(np.mean(values))

    out: dict = {}
    for method in cfg.methods:
        if method == "OLS":
            continue
        wins_all, wins_lt, wins_band = [], [], []
        for (ci, phi_x, phi_w, m, ri, est, *_rest) in raw_rows:
            if m != method or est is None or (ci, ri) not in ols_err:
                continue
            win = abs(est - beta_x) < ols_err[(ci, ri)]
            wins_all.append(win)
            if phi_x < phi_w:
                wins_lt.append(win)
                if phi_x > 0.2:
                    wins_band.append(win)
        q2_all, q2_lt, q2_band = [], [], []
        for r in ratio_rows:
            if r["method"] != method or not np.isfinite(r["q2"]):
                continue
            q2_all.append(r["q2"])
            if r["phi_x"] < r["phi_w"]:
                q2_lt.append(r["q2"])
                if r["phi_x"] > 0.2:
                    q2_band.append(r["q2"])
        out[method] = {
            "pr_beats_ols": frac(wins_all),
            "pr_beats_ols_given_phix_lt_phiw": frac(wins_lt),
            "pr_beats_ols_given_band": frac(wins_band),
            "pr_q2_lt_1": frac([q < 1 for q in q2_all]),
            "pr_q2_lt_0.8_given_phix_lt_phiw": frac([q < 0.8 for q in q2_lt]),
            "pr_q2_lt_0.8_given_band": frac([q < 0.8 for q in q2_band]),
            "pr_q2_gt_1.8": frac([q > 1.8 for q in q2_all]),
        }
    return out


def edf_summary(cfg: StudyConfig, raw_rows) -> list:
    """Median effective degrees of freedom per cell and method."""
    acc: dict = {}
    for (ci, phi_x, phi_w, method, ri, est, lo, hi, edf, *_rest) in raw_rows:
        if edf is not None:
            acc.setdefault((ci, phi_x, phi_w, method), []).append(edf)
    rows = []
    for (ci, phi_x, phi_w, method), vals in sorted(acc.items(),
                                                   key=lambda kv: (kv[0][0], str(kv[0][3]))):
        rows.append(dict(phi_x=phi_x, phi_w=phi_w, method=method,
                         median_edf=float(np.median(vals))))
    return rows
