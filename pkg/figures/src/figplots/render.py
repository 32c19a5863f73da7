"""Turn benchmark/bias/application CSV outputs into publication figures.

Strictly batch: every entry point reads one input file, writes image
files, and never mutates the input. Each kind validates its schema up
front and reports the column diff on mismatch.

Input schemas (columns, any order):
  contour   ratios.csv        phi_x, phi_w, method, q1, q2
  boxplot   raw_estimates.csv phi_x, phi_w, method, replicate, estimate
  biascurve bias_curve.csv    phi_x, phi_w, nullspace, k, d_x
  forest    app_report.csv    method, variant, estimate, lo, hi
"""

from __future__ import annotations

import argparse
import csv
import sys
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

KINDS = ("contour", "boxplot", "biascurve", "forest")

REQUIRED = {
    "contour": {"phi_x", "phi_w", "method", "q1", "q2"},
    "boxplot": {"phi_x", "phi_w", "method", "replicate", "estimate"},
    "biascurve": {"phi_x", "phi_w", "nullspace", "k", "d_x"},
    "forest": {"method", "variant", "estimate", "lo", "hi"},
}

# Diverging palette split at ratio 1: blues below, reds above.
RATIO_LEVELS = (0.5, 0.7, 0.8, 0.9, 1.0, 1.2, 1.5, 1.8, 2.5)


class SchemaError(Exception):
    """Input file does not match the documented schema for its kind."""


@dataclass(frozen=True)
class PlotJob:
    input_path: str
    kind: str
    output_path: str
    options: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown figure kind {self.kind!r}")
        if not Path(self.input_path).exists():
            raise FileNotFoundError(self.input_path)


def _read_rows(path, kind):
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        names = set(reader.fieldnames or ())
        want = REQUIRED[kind]
        if not want <= names:
            raise SchemaError(
                f"{kind} input is missing columns {sorted(want - names)} "
                f"(found {sorted(names)})")
        rows = list(reader)
    if not rows:
        raise SchemaError(f"{kind} input has no data rows")
    return rows


def _to_float(rows, col):
    return np.array([float(r[col]) for r in rows])


# ---------------------------------------------------------------------------
# renderers (each returns a matplotlib Figure)
# ---------------------------------------------------------------------------


def _fig_contour(rows, options):
    metric = options.get("metric", "q1")
    methods = sorted({r["method"] for r in rows if r["method"] != "OLS"})
    if options.get("methods"):
        methods = [m for m in methods if m in options["methods"]]
    if not methods:
        raise SchemaError("no non-reference methods to draw")
    phis_x = np.array(sorted({float(r["phi_x"]) for r in rows}))
    phis_w = np.array(sorted({float(r["phi_w"]) for r in rows}))
    ncols = min(len(methods), 4)
    nrows = int(np.ceil(len(methods) / ncols))
    fig, axes = plt.subplots(nrows, ncols, figsize=(3.4 * ncols, 3.1 * nrows),
                             squeeze=False)
    for ax in axes.ravel()[len(methods):]:
        ax.set_visible(False)
    for ax, method in zip(axes.ravel(), methods):
        grid = np.full((len(phis_w), len(phis_x)), np.nan)
        for r in rows:
            if r["method"] != method or not r[metric]:
                continue
            i = np.searchsorted(phis_w, float(r["phi_w"]))
            j = np.searchsorted(phis_x, float(r["phi_x"]))
            grid[i, j] = float(r[metric])
        vmax_dev = max(abs(np.nanmax(grid) - 1), abs(1 - np.nanmin(grid)), 0.05)
        pc = ax.pcolormesh(phis_x, phis_w, grid, cmap="RdBu_r",
                           vmin=1 - vmax_dev, vmax=1 + vmax_dev,
                           shading="nearest")
        if len(phis_x) > 1 and len(phis_w) > 1:
            levels = [lv for lv in RATIO_LEVELS
                      if np.nanmin(grid) < lv < np.nanmax(grid)]
            if levels:
                ax.contour(phis_x, phis_w, grid, levels=levels,
                           colors="k", linewidths=0.6)
            # the value-1 level drawn thick, always requested
            ax.contour(phis_x, phis_w, grid, levels=[1.0],
                       colors="k", linewidths=2.2)
        ax.plot([phis_x[0], phis_x[-1]], [phis_x[0], phis_x[-1]],
                color="gray", linestyle=":", linewidth=1.0)
        ax.set_title(f"{method} ({metric.upper()})", fontsize=10)
        ax.set_xlabel("exposure range")
        ax.set_ylabel("confounder range")
        fig.colorbar(pc, ax=ax, shrink=0.85)
    fig.tight_layout()
    return fig


def _fig_boxplot(rows, options):
    beta_true = float(options.get("beta_true", 2.0))
    cells = sorted({(float(r["phi_x"]), float(r["phi_w"])) for r in rows})
    if options.get("cells"):
        cells = [c for c in cells if c in options["cells"]]
    methods = sorted({r["method"] for r in rows})
    fig, axes = plt.subplots(len(cells), 1,
                             figsize=(1.1 * len(methods) + 2.5,
                                      2.6 * len(cells)),
                             squeeze=False)
    for ax, cell in zip(axes.ravel(), cells):
        data = []
        for m in methods:
            vals = [float(r["estimate"]) for r in rows
                    if r["method"] == m and r["estimate"]
                    and (float(r["phi_x"]), float(r["phi_w"])) == cell]
            data.append(vals)
        ax.boxplot(data, tick_labels=methods)
        ax.axhline(beta_true, color="red", linestyle="--", linewidth=1.0)
        ax.set_title(f"exposure range {cell[0]}, confounder range {cell[1]}",
                     fontsize=9)
        ax.tick_params(axis="x", rotation=30, labelsize=8)
    fig.tight_layout()
    return fig


def _fig_biascurve(rows, options):
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    groups = sorted({(r["nullspace"], float(r["phi_x"]), float(r["phi_w"]))
                     for r in rows})
    styles = ["-", "--", ":", "-."]
    for gi, (ns, px, pw) in enumerate(groups):
        sub = [r for r in rows
               if r["nullspace"] == ns
               and float(r["phi_x"]) == px and float(r["phi_w"]) == pw]
        ks = _to_float(sub, "k")
        dx = _to_float(sub, "d_x")
        order = np.argsort(ks)
        ax.plot(ks[order], dx[order], styles[gi % len(styles)],
                label=f"null space {ns} ({px}, {pw})")
    ax.axhline(0.0, color="gray", linewidth=0.8)
    ax.set_xlabel("number of basis columns")
    ax.set_ylabel("bias change d_x")
    ax.legend(fontsize=8)
    fig.tight_layout()
    return fig


def _fig_forest(rows, options):
    order = [(r["method"], r["variant"], float(r["estimate"]),
              float(r["lo"]), float(r["hi"])) for r in rows]
    order.sort(key=lambda t: (t[1] != "full", t[0]))
    fig, ax = plt.subplots(figsize=(6.0, 0.5 * len(order) + 1.6))
    ys = np.arange(len(order))[::-1]
    for y, (method, variant, est, lo, hi) in zip(ys, order):
        color = "firebrick" if variant == "full" else "steelblue"
        ax.errorbar([est], [y], xerr=[[est - lo], [hi - est]], fmt="o",
                    color=color, capsize=3)
    ax.set_yticks(ys)
    ax.set_yticklabels([f"{m} ({v})" for m, v, *_ in order], fontsize=8)
    ax.axvline(0.0, color="gray", linewidth=0.8)
    ax.set_xlabel("estimated effect")
    fig.tight_layout()
    return fig


_RENDERERS = {
    "contour": _fig_contour,
    "boxplot": _fig_boxplot,
    "biascurve": _fig_biascurve,
    "forest": _fig_forest,
}


def render_figure(job: PlotJob):
    """Build the matplotlib figure for a job without writing files."""
    rows = _read_rows(job.input_path, job.kind)
    return _RENDERERS[job.kind](rows, job.options)


def render(job: PlotJob):
    """Render one job; writes the requested image plus a raster twin.

    A vector output (.pdf/.svg) gets a .png sibling and vice versa, so
    both formats always exist. Returns the list of paths written.
    """
    fig = render_figure(job)
    out = Path(job.output_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    written = [out]
    fig.savefig(out, dpi=150)
    if out.suffix.lower() in (".pdf", ".svg"):
        twin = out.with_suffix(".png")
    else:
        twin = out.with_suffix(".pdf")
    fig.savefig(twin, dpi=150)
    written.append(twin)
    plt.close(fig)
    return written


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(
        prog="render", description="Render benchmark figures from CSV outputs.")
    ap.add_argument("--kind", required=True, choices=KINDS)
    ap.add_argument("--in", dest="input_path", required=True)
    ap.add_argument("--out", dest="output_path", required=True)
    ap.add_argument("--metric", default="q1", choices=("q1", "q2"),
                    help="ratio column for contour maps")
    ap.add_argument("--beta-true", type=float, default=2.0,
                    help="reference line for boxplots")
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        job = PlotJob(
            input_path=args.input_path,
            kind=args.kind,
            output_path=args.output_path,
            options={"metric": args.metric, "beta_true": args.beta_true},
        )
        written = render(job)
    except (SchemaError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print("wrote " + ", ".join(str(p) for p in written))
    return 0


if __name__ == "__main__":
    sys.exit(main())
