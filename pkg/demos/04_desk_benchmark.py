"""A miniature factorial benchmark run, end to end.

Runs a reduced desk-style study (2x2 grid, few replicates) through the
same harness the CLI uses, then prints the ratio table and probability
summaries. The full desk preset is `spconfound benchmark --preset desk`
and the full-scale one `--preset paper`.
"""

import tempfile
from pathlib import Path

from spconfound import StudyConfig, run_study

out_dir = Path(tempfile.mkdtemp(prefix="spconfound_demo_"))
cfg = StudyConfig(
    phi_grid=(0.05, 0.5),
    n_sites=120,
    replicates=8,
    methods=("OLS", "SpatialTP", "SS_mom"),
    chain_iters=1500,
    chain_burn_in=400,
    spline_k_max=60,
    master_seed=2024,
    workers=2,
    out_dir=str(out_dir),
)
print(f"running {len(cfg.cells)} cells x {cfg.replicates} replicates "
      f"x {len(cfg.methods)} methods -> {out_dir}")
table = run_study(cfg)

print("\nper-cell ratios (reference = OLS):")
print(f"{'phi_x':>6} {'phi_w':>6} {'method':>10} {'Q1':>7} {'Q2':>7}")
for r in table.rows:
    print(f"{r['phi_x']:6.2f} {r['phi_w']:6.2f} {r['method']:>10} "
          f"{r['q1']:7.3f} {r['q2']:7.3f}")

print("\nprobability summaries:")
for method, probs in table.probabilities.items():
    frac = probs["pr_beats_ols"]
    cond = probs["pr_beats_ols_given_phix_lt_phiw"]
    print(f"  {method}: beats OLS overall {frac:.2f}, "
          f"given phi_x < phi_w {cond if cond is None else round(cond, 2)}")

print("\nmedian EDF per cell:")
for r in table.edf_rows:
    print(f"  ({r['phi_x']}, {r['phi_w']}) {r['method']}: {r['median_edf']}")

print(f"\nraw estimates, ratios, probabilities and the config echo are in "
      f"{out_dir}")
