import json
import math
from pathlib import Path

import numpy as np
import pytest

from qmetrix.cli import _parse_grid, main
from qmetrix.reporting import read_csv


def run(argv):
    return main([str(a) for a in argv])


class TestGridParsing:
    def test_inclusive(self):
        assert _parse_grid("0:0.05:0.5") == pytest.approx(
            [0.05 * k for k in range(11)]
        )

    def test_irregular_stop_appended(self):
        grid = _parse_grid(f"1.0:0.1:{math.log2(3):.10f}")
        assert grid[0] == 1.0
        assert grid[-1] == pytest.approx(math.log2(3), abs=1e-9)

    def test_bad_grid(self):
        with pytest.raises(ValueError):
            _parse_grid("1:0:2")


class TestLawCommand:
    def test_ggm_eleven_rows(self, tmp_path):
        out = tmp_path / "law.csv"
        assert run(["law", "--measure", "ggm", "--grid", "0:0.05:0.5",
                    "--out", out]) == 0
        kind, _, header, rows = read_csv(out)
        assert kind == "law"
        assert header == ["measure", "value", "q_opt", "stddev"]
        assert len(rows) == 11
        assert float(rows[-1][3]) == pytest.approx(0.25, abs=1e-15)
        assert Path(str(out) + ".manifest.json").exists()

    def test_entropy_monotone_stddev(self, tmp_path):
        out = tmp_path / "law_s.csv"
        run(["law", "--measure", "entropy", "--grid", "0:0.1:1.0", "--out", out])
        _, _, _, rows = read_csv(out)
        stds = [float(r[3]) for r in rows]
        assert all(a >= b for a, b in zip(stds, stds[1:]))

    def test_unequal_d3_rescales_stddev(self, tmp_path):
        std_out, uneq_out = tmp_path / "std.csv", tmp_path / "uneq.csv"
        run(["law", "--measure", "ggm", "--grid", "0:0.1:0.5", "--out", std_out])
        run(["law", "--measure", "ggm", "--grid", "0:0.1:0.5", "--unequal-d3",
             "--out", uneq_out])
        _, _, _, std_rows = read_csv(std_out)
        _, _, _, uneq_rows = read_csv(uneq_out)
        for a, b in zip(std_rows, uneq_rows):
            assert float(b[3]) == pytest.approx(
                float(a[3]) * 0.5625**-0.5, abs=1e-12
            )

    def test_out_of_range_errors(self, tmp_path):
        assert run(["law", "--grid", "0:0.1:0.9", "--out", tmp_path / "x.csv"]) == 2

    def test_svg_emitted(self, tmp_path):
        svg = tmp_path / "law.svg"
        run(["law", "--grid", "0:0.1:0.5", "--out", tmp_path / "law.csv",
             "--svg", svg])
        assert svg.read_text().startswith("<svg")


class TestOptimizeCommand:
    ARGS = ["--generations", "80", "--restarts", "2", "--polish-iters", "150"]

    def test_single_target(self, tmp_path):
        out = tmp_path / "opt.csv"
        assert run(["optimize", "--parties", "2", "--d", "2", "--measure", "ggm",
                    "--target", "0.25", "--seed", "3", "--out", out]
                   + self.ARGS) == 0
        _, config, header, rows = read_csv(out)
        assert header[0] == "target"
        row = dict(zip(header, rows[0]))
        assert float(row["q_best"]) == pytest.approx(14.9282032302755, abs=1e-3)
        assert row["converged"] == "True"
        assert config["seed"] == "3"

    def test_replay_byte_identical(self, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        run(["optimize", "--target", "0.2", "--seed", "5", "--out", a] + self.ARGS)
        run(["optimize", "--target", "0.2", "--seed", "5", "--out", b] + self.ARGS)
        assert a.read_bytes() == b.read_bytes()

    def test_sweep_failures_leave_exit_zero(self, tmp_path):
        out = tmp_path / "sweep.csv"
        code = run(["sweep", "--grid", "0.4:0.2:0.8", "--seed", "1", "--out", out]
                   + self.ARGS)
        assert code == 0  # out-of-range rows are recorded, not fatal
        _, _, header, rows = read_csv(out)
        conv = [dict(zip(header, r))["converged"] for r in rows]
        assert conv[0] == "True"
        assert "False" in conv

    def test_custom_spectrum_flag(self, tmp_path):
        out = tmp_path / "c.csv"
        code = run(["optimize", "--d", "3", "--spectrum", "custom",
                    "--custom-eigenvalues", "0,2,3", "--target", "0.0",
                    "--seed", "2", "--out", out] + self.ARGS)
        assert code == 0
        _, _, header, rows = read_csv(out)
        assert float(dict(zip(header, rows[0]))["q_best"]) == pytest.approx(
            18.0, abs=1e-2
        )

    def test_missing_target_errors(self, tmp_path):
        assert run(["optimize", "--out", tmp_path / "x.csv", "--seed", "1"]) == 2


class TestSampleGmCommand:
    def test_deterministic_files_and_compare(self, tmp_path, capsys):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        argv = ["sample-gm", "--nu", "3000", "-N", "3", "--seed", "7", "--out"]
        assert run(argv + [a]) == 0
        assert run(argv + [b]) == 0
        assert a.read_bytes() == b.read_bytes()
        assert run(["sample-gm", "--compare", a, b]) == 0
        out = capsys.readouterr().out
        assert "converged through k=" in out

    def test_schema_line(self, tmp_path):
        out = tmp_path / "s.csv"
        run(["sample-gm", "--nu", "500", "--seed", "1", "--out", out])
        assert out.read_text().splitlines()[0] == "# qmetrix-csv v1 sample-gm"

    def test_generated_seed_printed(self, tmp_path, capsys):
        run(["sample-gm", "--nu", "200", "--out", tmp_path / "x.csv"])
        assert "generated seed=" in capsys.readouterr().out

    def test_compare_rejects_mismatched_configs(self, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        run(["sample-gm", "--nu", "300", "-N", "3", "--seed", "1", "--out", a])
        run(["sample-gm", "--nu", "300", "-N", "3", "--bin-width", "0.025",
             "--seed", "1", "--out", b])
        assert run(["sample-gm", "--compare", a, b]) == 2


class TestFitCommand:
    def test_fit_from_law_csv(self, tmp_path):
        csv = tmp_path / "law.csv"
        run(["law", "--measure", "ggm", "--grid", "0.05:0.05:0.5", "--out", csv])
        out = tmp_path / "fit.json"
        code = run(["fit", "--family", "rational", "--in", csv,
                    "--x-col", "value", "--y-col", "stddev", "--out", out])
        assert code == 0
        payload = json.loads(out.read_text())
        assert payload["family"] == "rational_inv_sqrt"
        assert len(payload["params"]) == 4
        assert payload["points_used"] == 10

    def test_bad_column_errors(self, tmp_path):
        csv = tmp_path / "law.csv"
        run(["law", "--grid", "0:0.1:0.5", "--out", csv])
        assert run(["fit", "--family", "quadratic", "--in", csv,
                    "--x-col", "nope", "--out", tmp_path / "f.json"]) == 2


class TestConfigFile:
    def test_flags_override_config(self, tmp_path, capsys):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("grid = 0:0.1:0.5\nmeasure = ggm\n# comment\n")
        out = tmp_path / "law.csv"
        assert run(["law", "--config", cfg, "--grid", "0:0.25:0.5",
                    "--out", out]) == 0
        _, _, _, rows = read_csv(out)
        assert len(rows) == 3  # flag value won over the config file

    def test_unknown_key_rejected(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("nope = 1\n")
        assert run(["law", "--config", cfg, "--out", tmp_path / "x.csv"]) == 2


class TestManifest:
    def test_contents(self, tmp_path):
        out = tmp_path / "law.csv"
        run(["law", "--grid", "0:0.1:0.5", "--out", out])
        man = json.loads(Path(str(out) + ".manifest.json").read_text())
        assert man["schema"] == "qmetrix-manifest-v1"
        assert man["command"] == "law"
        assert str(out) in man["outputs"]
        assert len(man["outputs"][str(out)]) == 64
        assert man["config"]["grid"] == "0:0.1:0.5"
