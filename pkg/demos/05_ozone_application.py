"""Exposure-effect comparison on an ozone-style site table.

Builds a synthetic dataset with the application's exact schema (per-site
summer averages; temperatures in Kelvin, humidity from dew point), then
runs the comparison pipeline: the full log-log model with all measured
confounders against exposure-only fits under several estimators.
"""

import csv
import tempfile
from pathlib import Path

import numpy as np

from spconfound import derive_rh, ingest, run_application
from spconfound.application import write_report

rng = np.random.default_rng(8)
n = 120
lon = rng.uniform(12.0, 15.0, n)
lat = rng.uniform(41.0, 43.5, n)
# temperature is a smooth surface over the domain (coast-to-inland
# gradient plus a broad bump), the kind of confounder a spatial basis
# can absorb
u, v = (lon - 12.0) / 3.0, (lat - 41.0) / 2.5
temp_c = (24.0 + 5.0 * u - 3.0 * v + 4.0 * np.sin(np.pi * u) * np.cos(np.pi * v)
          + 0.8 * rng.standard_normal(n))
dew_c = temp_c - rng.uniform(2, 12, n)
# the exposure shares the temperature signal, so dropping the measured
# confounders inflates the naive exposure-only estimate
nox = np.exp(rng.normal(2.0, 0.35, n) + 0.06 * (temp_c - temp_c.mean()))
voc = np.exp(rng.normal(1.0, 0.4, n))
u10, v10 = rng.normal(0, 2, n), rng.normal(0, 2, n)
ssr = rng.uniform(1.5e7, 2.5e7, n)
rh = derive_rh(temp_c, dew_c)
log_o3 = (3.0 + 0.05 * np.log(nox) + 0.03 * temp_c - 0.002 * rh
          + 0.01 * u10 + 1e-8 * ssr + 0.05 * np.log(voc)
          + 0.05 * rng.standard_normal(n))

path = Path(tempfile.mkdtemp(prefix="spconfound_app_")) / "sites.csv"
with open(path, "w", newline="") as fh:
    w = csv.writer(fh)
    w.writerow(["lon", "lat", "o3", "nox", "u10", "v10", "temp", "ssr",
                "voc", "dewpoint"])
    for i in range(n):
        w.writerow([lon[i], lat[i], np.exp(log_o3[i]), nox[i], u10[i],
                    v10[i], temp_c[i] + 273.15, ssr[i], voc[i],
                    dew_c[i] + 273.15])
print(f"synthetic dataset written to {path} (true log-log effect 0.05)")

table = ingest(path)
print(f"ingested {table.n} sites; relative humidity derived from dew point")

report = run_application(table, ["OLS", "SpatialTP", "SS_mom"],
                         chain_iters=1500, chain_burn_in=400, seed=3)
print(f"\n{'method':>10} {'variant':>14} {'estimate':>9} {'95% interval':>20}")
for r in report.rows:
    print(f"{r['method']:>10} {r['variant']:>14} {r['estimate']:9.4f} "
          f"[{r['lo']:8.4f}, {r['hi']:8.4f}]")

out_csv, out_json = write_report(report, path.parent)
print(f"\nreport persisted to {out_csv} and {out_json}")
print("the temperature-driven confounding inflates the exposure-only OLS "
      "estimate; the spatial fits pull it back toward the full model")
