import csv
import hashlib
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from figplots.render import PlotJob, SchemaError, main, render, render_figure


def sha256(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


@pytest.fixture(scope="module")
def harness_outputs(tmp_path_factory):
    """Desk-scale harness outputs produced through the primary CLI."""
    out = tmp_path_factory.mktemp("primary")
    study = out / "study"
    r = subprocess.run(
        [sys.executable, "-m", "spconfound.cli", "benchmark", "--preset",
         "desk", "--seed", "11", "--replicates", "3", "--n", "60",
         "--methods", "OLS,SS_mom", "--out", str(study)],
        capture_output=True, text=True)
    assert r.returncode == 0, r.stderr
    bias = out / "bias"
    r = subprocess.run(
        [sys.executable, "-m", "spconfound.cli", "bias", "--phix", "0.05",
         "--phiw", "0.5", "--n", "60", "--kmax", "15", "--out", str(bias)],
        capture_output=True, text=True)
    assert r.returncode == 0, r.stderr
    return study, bias


@pytest.fixture()
def app_report(tmp_path):
    path = tmp_path / "app_report.csv"
    write_csv(path, ["method", "variant", "estimate", "lo", "hi"], [
        ["OLS", "full", 0.021, 0.005, 0.038],
        ["OLS", "exposure_only", 0.076, 0.063, 0.088],
        ["SRE", "exposure_only", 0.021, 0.011, 0.031],
        ["SS_mom", "exposure_only", 0.019, 0.012, 0.025],
    ])
    return path


class TestEndToEnd:
    def test_all_kinds_render_from_harness_outputs(self, harness_outputs,
                                                   app_report, tmp_path):
        study, bias = harness_outputs
        start = time.time()
        jobs = [
            PlotJob(str(study / "ratios.csv"), "contour",
                    str(tmp_path / "fig_contour.pdf")),
            PlotJob(str(study / "raw_estimates.csv"), "boxplot",
                    str(tmp_path / "fig_box.pdf")),
            PlotJob(str(bias / "bias_curve.csv"), "biascurve",
                    str(tmp_path / "fig_curve.pdf")),
            PlotJob(str(app_report), "forest",
                    str(tmp_path / "fig_forest.pdf")),
        ]
        checksums = [sha256(j.input_path) for j in jobs]
        for job in jobs:
            written = render(job)
            for p in written:
                assert p.exists() and p.stat().st_size > 0
            # vector plus raster twin
            assert {p.suffix for p in written} == {".pdf", ".png"}
        after = [sha256(j.input_path) for j in jobs]
        assert checksums == after, "rendering must not touch inputs"
        assert time.time() - start < 60

    def test_contour_has_level_one_line(self, harness_outputs):
        study, _ = harness_outputs
        fig = render_figure(PlotJob(str(study / "ratios.csv"), "contour",
                                    "unused.pdf"))
        found_thick_level1 = False
        for ax in fig.axes:
            for coll in getattr(ax, "collections", []):
                lw = np.atleast_1d(coll.get_linewidth())
                if lw.size and float(lw.max()) >= 2.0:
                    found_thick_level1 = True
        assert found_thick_level1

    def test_deterministic_dimensions(self, app_report):
        f1 = render_figure(PlotJob(str(app_report), "forest", "x.pdf"))
        f2 = render_figure(PlotJob(str(app_report), "forest", "x.pdf"))
        assert f1.get_size_inches().tolist() == f2.get_size_inches().tolist()


class TestBiascurveShapes:
    def test_type3_rows_flat_zero(self, tmp_path):
        rows = [[0.05, 0.5, 3, k, 0.0] for k in range(1, 11)]
        path = tmp_path / "curve.csv"
        write_csv(path, ["phi_x", "phi_w", "nullspace", "k", "d_x"], rows)
        fig = render_figure(PlotJob(str(path), "biascurve", "x.pdf"))
        line = fig.axes[0].lines[0]
        assert np.allclose(line.get_ydata(), 0.0)

    def test_all_ones_ratios_degenerate_contour(self, tmp_path):
        rows = []
        for px in (0.1, 0.3):
            for pw in (0.1, 0.3):
                rows.append([px, pw, "OLS", 1.0, 1.0])
                rows.append([px, pw, "M", 1.0, 1.0])
        path = tmp_path / "ratios.csv"
        write_csv(path, ["phi_x", "phi_w", "method", "q1", "q2"], rows)
        # constant field: still renders, no crash on empty level sets
        fig = render_figure(PlotJob(str(path), "contour", "x.pdf"))
        assert fig.axes


class TestValidation:
    def test_schema_mismatch_reports_column_diff(self, tmp_path):
        path = tmp_path / "bad.csv"
        write_csv(path, ["method", "estimate"], [["OLS", 1.0]])
        with pytest.raises(SchemaError, match="missing columns"):
            render_figure(PlotJob(str(path), "forest", "x.pdf"))

    def test_missing_input_rejected(self):
        with pytest.raises(FileNotFoundError):
            PlotJob("/nonexistent/ratios.csv", "contour", "x.pdf")

    def test_unknown_kind_rejected(self, app_report):
        with pytest.raises(ValueError):
            PlotJob(str(app_report), "scatter3d", "x.pdf")

    def test_cli_schema_error_exit_code(self, tmp_path, capsys):
        path = tmp_path / "bad.csv"
        write_csv(path, ["a", "b"], [[1, 2]])
        rc = main(["--kind", "forest", "--in", str(path),
                   "--out", str(tmp_path / "g.pdf")])
        assert rc == 2
        assert "missing columns" in capsys.readouterr().err

    def test_cli_happy_path(self, app_report, tmp_path, capsys):
        rc = main(["--kind", "forest", "--in", str(app_report),
                   "--out", str(tmp_path / "forest.png")])
        assert rc == 0
        assert (tmp_path / "forest.png").exists()
        assert (tmp_path / "forest.pdf").exists()
