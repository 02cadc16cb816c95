import math
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from pum.cli import (CSV_HEADER, ExperimentConfig, RunResult,
                     collocation_spacing, fit_loglog_slope, fit_spectral_rate,
                     main, parse_config, poly_degree, run_experiment,
                     run_single)


class TestPolyDegree:
    def test_n28_d2(self):
        assert poly_degree(28, 2) == 6

    def test_n20_d3(self):
        assert poly_degree(20, 3) == 3

    def test_n1(self):
        assert poly_degree(1, 2) == 0
        assert poly_degree(1, 3) == 0

    def test_boundaries(self):
        assert poly_degree(27, 2) == 5   # binom(8,2)=28 > 27
        assert poly_degree(36, 2) == 7   # binom(9,2)=36

    def test_invalid(self):
        with pytest.raises(ValueError):
            poly_degree(0, 2)


class TestSlopeFit:
    def test_exact_power_law_recovered(self):
        H = np.array([0.5, 0.4, 1 / 3, 0.25, 0.2])
        err = 0.37 * H**4
        slope, resid = fit_loglog_slope(H, err, [True] * 5)
        assert abs(slope - 4.0) <= 1e-9
        assert resid <= 1e-12

    def test_exclusion(self):
        H = [0.5, 0.4, 0.3, 0.2]
        err = [0.5**4, 0.4**4, 0.3**4, 99.0]
        slope, _ = fit_loglog_slope(H, err, [True, True, True, False])
        assert abs(slope - 4.0) <= 1e-9

    def test_spectral_fit(self):
        h = np.array([0.2, 0.1, 0.05])
        gamma = 2.5
        err = 10 * np.exp(-gamma / h)
        rate, resid = fit_spectral_rate(h, err, [True] * 3)
        assert abs(rate - gamma) <= 1e-9

    def test_too_few_points(self):
        slope, _ = fit_loglog_slope([0.5], [0.1], [True])
        assert math.isnan(slope)


class TestConfig:
    def test_parse(self, tmp_path):
        p = tmp_path / "exp.cfg"
        p.write_text("""
# comment line
experiment = alg-conv
domain=box
method = least-squares
solution = u2
sweep = 0.5, 0.4, 0.25
n = 28
eps = 2.0
out = {}
""".format(tmp_path))
        cfg = parse_config(p)
        assert cfg.experiment == "alg-conv"
        assert cfg.sweep == (0.5, 0.4, 0.25)
        assert cfg.n == 28 and cfg.eps == 2.0

    def test_defaults(self, tmp_path):
        p = tmp_path / "e.cfg"
        p.write_text("sweep=0.5,0.4\n")
        cfg = parse_config(p)
        assert cfg.delta == 0.2 and cfg.beta == 1.5 and cfg.probes == 1000

    def test_non_monotone_sweep_rejected(self):
        with pytest.raises(ValueError):
            ExperimentConfig("alg-conv", sweep=(0.5, 0.2, 0.4))

    def test_bad_line(self, tmp_path):
        p = tmp_path / "e.cfg"
        p.write_text("this is not a config\n")
        with pytest.raises(ValueError):
            parse_config(p)


class TestRunSingle:
    def test_failure_recorded_not_raised(self):
        # eps=1 with n=55 in small patches exceeds the conditioning gate
        r = run_single("box", "ls", "u2", 0.2, 55, eps=1.0, with_norm=False)
        assert r.flag == "failed"
        assert math.isnan(r.error_inf)

    def test_collocation_spacing_gives_target_count(self):
        h = collocation_spacing(0.5, 28, 0.2, 2)
        rho = 1.2 * math.sqrt(2) * 0.25
        assert abs(math.pi * rho**2 / h**2 - 28) < 1.0


@pytest.fixture(scope="module")
def small_experiment(tmp_path_factory):
    out = tmp_path_factory.mktemp("exp")
    cfg = ExperimentConfig("alg-conv", domain="box", method="least-squares",
                           solution="u1", sweep=(0.8, 0.5), n=12, eps=2.0,
                           probes=400, out=str(out))
    report = run_experiment(cfg)
    return cfg, report, out


class TestRunExperiment:
    def test_csv_schema(self, small_experiment):
        cfg, report, out = small_experiment
        csv_path = out / "alg-conv_least-squares_u1.csv"
        lines = csv_path.read_text().strip().splitlines()
        assert lines[0] == CSV_HEADER
        assert len(lines) == 3
        row = lines[1].split(",")
        assert len(row) == 10

    def test_svg_well_formed(self, small_experiment):
        cfg, report, out = small_experiment
        svg = out / "alg-conv_least-squares_u1.svg"
        tree = ET.parse(svg)
        assert tree.getroot().tag.endswith("svg")

    def test_error_decreases(self, small_experiment):
        cfg, report, out = small_experiment
        errs = [r.error_inf for r in report.results]
        assert errs[1] < errs[0]

    def test_determinism_non_timing_columns(self, small_experiment):
        cfg, report, out = small_experiment
        first = (out / "alg-conv_least-squares_u1.csv").read_text()
        run_experiment(cfg)
        second = (out / "alg-conv_least-squares_u1.csv").read_text()

        def strip_timing(text):
            rows = []
            for line in text.strip().splitlines()[1:]:
                cells = line.split(",")
                rows.append(cells[:6] + cells[9:])
            return rows

        assert strip_timing(first) == strip_timing(second)


class TestFloorRule:
    def test_floor_point_excluded(self):
        res = [RunResult(param=0.5, error_inf=1e-3, stab_norm=1e3),
               RunResult(param=0.25, error_inf=5e-13, stab_norm=1e3,
                         flag="floor")]
        from pum.cli import _floor_included
        assert _floor_included(res) == [True, False]

    def test_flag_set_by_run(self):
        r = RunResult(param=0.5, error_inf=1e-14, stab_norm=1e3)
        # 1e-14 <= 10 * 1e3 * 1e-16 = 1e-12 -> would be floor-limited
        assert r.error_inf <= 10 * r.stab_norm * 1e-16


class TestCLI:
    def test_solve_command(self, tmp_path, capsys):
        rc = main(["solve", "--domain", "box", "--method", "ls",
                   "--solution", "u1", "--H", "0.8", "--n", "12",
                   "--eps", "2.0", "--probes", "300", "--no-norm",
                   "--export-matrix", str(tmp_path / "m.txt")])
        assert rc == 0
        outp = capsys.readouterr().out
        assert "P=25 rho=" in outp
        assert "error_inf=" in outp
        assert (tmp_path / "m.txt").exists()

    def test_sweep_command(self, tmp_path, capsys):
        cfg = tmp_path / "sweep.cfg"
        cfg.write_text(f"""
domain = box
method = least-squares
solution = u1
sweep = 0.8, 0.5
n = 12
eps = 2.0
probes = 300
out = {tmp_path}
""")
        rc = main(["sweep", "--experiment", "alg-conv", "--config", str(cfg)])
        assert rc == 0
        outp = capsys.readouterr().out
        assert "fitted_slope=" in outp
        assert (tmp_path / "alg-conv_least-squares_u1.csv").exists()

    def test_solve_polygon_domain(self, capsys):
        import importlib.resources as res
        path = res.files("pum") / "data" / "polygon_nonconvex.txt"
        rc = main(["solve", "--domain", f"polygon:{path}", "--method", "ls",
                   "--solution", "u2", "--H", "0.5", "--n", "12",
                   "--eps", "2.0", "--probes", "200", "--no-norm"])
        assert rc == 0
        assert "error_inf=" in capsys.readouterr().out
