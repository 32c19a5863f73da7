"""Ozone-versus-NOx analysis on user-supplied tabular data.

Ingests a delimited file of per-site summer averages, derives relative
humidity from dew point when needed, fits the full log-log regression
with all measured confounders, and refits the exposure-only variant
under every requested estimator so the reports can be compared side
by side. Longitude/latitude are used as planar coordinates, rescaled
to the unit square before any kernel work.
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .basis import NullSpaceType, principal_kriging_basis
from .competitors import (
    MethodId,
    SPLINE_METHODS,
    SreConfig,
    fit_ols,
    fit_spline_family,
    fit_sre,
)
from .errors import IngestError
from .geometry import SiteSet
from .ssreg import PriorFamily, SsPriorConfig, gibbs_fv, gibbs_nmig, standardize, summarize
from .ssmom import mom_sampler

__all__ = [
    "ObservationTable",
    "AppReport",
    "ingest",
    "derive_rh",
    "run_application",
    "write_report",
]

log = logging.getLogger(__name__)

REQUIRED_COLUMNS = ("lon", "lat", "o3", "nox", "u10", "v10", "temp", "ssr", "voc")
CONFOUNDER_COLUMNS = ("u10", "v10", "temp", "ssr", "voc", "rh")
POSITIVE_COLUMNS = ("o3", "nox", "voc")


@dataclass(frozen=True)
class ObservationTable:
    """Validated per-site records; `rh` is always present after ingest."""

    data: dict = field(repr=False)  # column -> np.ndarray

    @property
    def n(self) -> int:
        return self.data["o3"].shape[0]

    def sites_unit_square(self) -> SiteSet:
        lon, lat = self.data["lon"], self.data["lat"]
        coords = np.column_stack([_rescale(lon), _rescale(lat)])
        return SiteSet(coords)


def _rescale(v):
    span = v.max() - v.min()
    if span == 0:
        raise IngestError("coordinate axis has zero extent")
    return (v - v.min()) / span


def derive_rh(temp_c: float, dewpoint_c: float):
    """Relative humidity (percent) from the August-Roche-Magnus form:

        RH = 100 exp(17.625 DT / (243.04 + DT) - 17.625 T / (243.04 + T)).

    Dew points above the temperature are clamped to 100% with a logged
    warning; constants are Celsius-calibrated.
    """
    t = np.asarray(temp_c, dtype=float)
    dt = np.asarray(dewpoint_c, dtype=float)
    rh = 100.0 * np.exp(17.625 * dt / (243.04 + dt) - 17.625 * t / (243.04 + t))
    over = rh > 100.0
    if np.any(over):
        log.warning("dew point exceeds temperature at %d site(s); RH clamped to 100",
                    int(np.count_nonzero(over)))
        rh = np.where(over, 100.0, rh)
    return rh if rh.ndim else float(rh)


def ingest(path, *, delimiter=",", temp_in_kelvin=True) -> ObservationTable:
    """Read and validate one delimited file of site records.

    The header must carry every required column plus `rh` or
    `dewpoint`. Raises IngestError naming the offending row/column for
    missing columns, non-numeric cells, missing values, or nonpositive
    concentrations (their logarithms enter the model).
    """
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh, delimiter=delimiter)
        if reader.fieldnames is None:
            raise IngestError("file has no header row")
        names = [c.strip().lower() for c in reader.fieldnames]
        missing = [c for c in REQUIRED_COLUMNS if c not in names]
        if missing:
            raise IngestError(f"missing required column(s): {', '.join(missing)}")
        has_rh = "rh" in names
        has_dew = "dewpoint" in names
        if not (has_rh or has_dew):
            raise IngestError("need a 'rh' or 'dewpoint' column")
        cols = {c: [] for c in names}
        for rownum, row in enumerate(reader, start=2):
            for raw_name, value in row.items():
                if raw_name is None:
                    raise IngestError(f"row {rownum}: more cells than header columns")
                name = raw_name.strip().lower()
                if value is None or value.strip() == "":
                    raise IngestError(f"row {rownum}, column '{name}': missing value")
                try:
                    cols[name].append(float(value))
                except ValueError as exc:
                    raise IngestError(
                        f"row {rownum}, column '{name}': non-numeric cell {value!r}"
                    ) from exc
    data = {c: np.asarray(v, dtype=float) for c, v in cols.items()}
    if not data or len(data["o3"]) == 0:
        raise IngestError("file contains no data rows")
    for c in POSITIVE_COLUMNS:
        bad = np.nonzero(data[c] <= 0)[0]
        if bad.size:
            raise IngestError(
                f"row {bad[0] + 2}, column '{c}': nonpositive concentration "
                f"{data[c][bad[0]]!r} (log undefined)")
    if temp_in_kelvin:
        data["temp"] = data["temp"] - 273.15
        if has_dew:
            data["dewpoint"] = data["dewpoint"] - 273.15
    if not has_rh:
        data["rh"] = derive_rh(data["temp"], data["dewpoint"])
    return ObservationTable(data=data)


@dataclass(frozen=True)
class AppReport:
    """Per-method elasticity estimates, full and exposure-only variants."""

    rows: list  # dicts: method, variant, estimate, lo, hi

    def as_dicts(self):
        return list(self.rows)


def _full_model_fit(table: ObservationTable):
    """OLS fit of the all-confounder log-log model (intercept included)."""
    y = np.log(table.data["o3"])
    cols = [np.ones(table.n), np.log(table.data["nox"])]
    cols += [table.data[c] for c in CONFOUNDER_COLUMNS]
    X = np.column_stack(cols)
    coef, _, rank, _ = np.linalg.lstsq(X, y, rcond=None)
    if rank < X.shape[1]:
        raise IngestError("full-model design is rank deficient")
    resid = y - X @ coef
    dof = table.n - X.shape[1]
    s2 = resid @ resid / dof
    cov = s2 * np.linalg.inv(X.T @ X)
    se = np.sqrt(cov[1, 1])
    tq = stats.t.ppf(0.975, dof)
    return float(coef[1]), (float(coef[1] - tq * se), float(coef[1] + tq * se))


def run_application(table: ObservationTable, methods, *, seed=0,
                    chain_iters=5000, chain_burn_in=1000,
                    spline_k_max=150) -> AppReport:
    """Full-model OLS plus exposure-only fits per requested method.

    The exposure-only variant drops the measured confounders entirely
    and lets each estimator absorb spatial structure its own way.
    """
    y = np.log(table.data["o3"])
    x = np.log(table.data["nox"])
    sites = table.sites_unit_square()
    est, iv = _full_model_fit(table)
    rows = [dict(method="OLS", variant="full", estimate=est, lo=iv[0], hi=iv[1])]

    basis = None
    for mi, method in enumerate(sorted(set(methods))):
        mseed = seed + 37 * mi
        if method == "OLS":
            r = fit_ols(y, x)
            est, lo, hi = r.beta_x_hat, r.interval[0], r.interval[1]
        elif method == "SRE":
            r = fit_sre(y, x, sites, SreConfig(iters=chain_iters,
                                               burn_in=chain_burn_in), seed=mseed)
            est, lo, hi = r.beta_x_hat, r.interval[0], r.interval[1]
        elif method in ("SS_fv", "SS_nmig", "SS_mom"):
            if basis is None:
                basis = principal_kriging_basis(sites, NullSpaceType.TYPE1)
            ys, xs, Bs, rec = standardize(y, x, basis.B)
            prior = SsPriorConfig(family=PriorFamily[method.split("_")[1].upper()])
            sampler = {"SS_fv": gibbs_fv, "SS_nmig": gibbs_nmig,
                       "SS_mom": mom_sampler}[method]
            chain = sampler(ys, xs, Bs, prior, iters=chain_iters, seed=mseed,
                            burn_in=chain_burn_in, record=rec)
            s = summarize(chain)
            est, lo, hi = s.beta_x_mean, s.interval[0], s.interval[1]
        else:
            r = fit_spline_family(MethodId(method), y, x, sites, k_max=spline_k_max)
            est, lo, hi = r.beta_x_hat, r.interval[0], r.interval[1]
        rows.append(dict(method=method, variant="exposure_only",
                         estimate=float(est), lo=float(lo), hi=float(hi)))
    return AppReport(rows=rows)


def write_report(report: AppReport, out_dir):
    """app_report.csv and app_report.json side by side."""
    from pathlib import Path

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "app_report.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["method", "variant", "estimate", "lo", "hi"])
        for r in report.rows:
            w.writerow([r["method"], r["variant"],
                        format(r["estimate"], ".9g"),
                        format(r["lo"], ".9g"), format(r["hi"], ".9g")])
    (out / "app_report.json").write_text(json.dumps(report.rows, indent=2) + "\n")
    return out / "app_report.csv", out / "app_report.json"
