import json

import numpy as np
import pytest

from fracsse import cli
from fracsse.cli import (EXIT_CHECK_FAILED, EXIT_CONFIG, EXIT_OK,
                         SolverConfig, load_config, main)
from fracsse.errors import ConfigurationError


def write_config(tmp_path, **overrides):
    base = {
        "experiment": "single-solve",
        "points": 64,
        "modes": 8,
        "hurst": 0.75,
        "t_end": 0.25,
        "dt": "2^-6",
        "kind": "power",
    }
    base.update(overrides)
    text = (
        "[experiment]\n"
        f"name = {base['experiment']}\n"
        "seed = 7\n\n"
        "[grid]\n"
        f"points = {base['points']}\n"
        f"t_end = {base['t_end']}\n\n"
        "[noise]\n"
        f"hurst = {base['hurst']}\n"
        f"modes = {base['modes']}\n\n"
        "[nonlinearity]\n"
        f"kind = {base['kind']}\n"
        "sigma = 1.0\n"
        "mu = 1.0\n\n"
        "[solver]\n"
        f"dt = {base['dt']}\n"
    )
    path = tmp_path / "exp.ini"
    path.write_text(text)
    return path


class TestConfig:
    def test_dyadic_sugar(self, tmp_path):
        cfg = load_config(write_config(tmp_path, dt="2^-6, 2^-7"))
        assert cfg.dt_list == [2.0 ** -6, 2.0 ** -7]

    def test_validation_names_hurst_constraint(self):
        cfg = SolverConfig(hurst=0.4)
        with pytest.raises(ConfigurationError, match="\\(1/2, 1\\)"):
            cfg.validate()

    def test_grid_power_of_two(self):
        cfg = SolverConfig(grid_points=100)
        with pytest.raises(ConfigurationError, match="power of two"):
            cfg.validate()

    def test_alpha_window(self):
        cfg = SolverConfig(alpha=0.05)
        with pytest.raises(ConfigurationError, match="alpha"):
            cfg.validate()

    def test_unknown_key_rejected(self, tmp_path):
        path = tmp_path / "bad.ini"
        path.write_text("[grid]\nresolution = 7\n")
        with pytest.raises(ConfigurationError, match="unknown key"):
            load_config(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigurationError):
            load_config(tmp_path / "nope.ini")


class TestMain:
    def test_malformed_hurst_exit_code(self, tmp_path, capsys):
        path = write_config(tmp_path, hurst=0.4)
        code = main(["--config", str(path), "--out", str(tmp_path / "out")])
        assert code == EXIT_CONFIG
        err = capsys.readouterr().err
        assert "(1/2, 1)" in err

    def test_single_solve_artifacts(self, tmp_path):
        path = write_config(tmp_path)
        out = tmp_path / "run1"
        code = main(["--config", str(path), "--out", str(out)])
        assert code == EXIT_OK
        for name in ("report.csv", "report.json", "meta.json", "config.ini"):
            assert (out / name).exists()
        payload = json.loads((out / "report.json").read_text())
        assert payload["rows"], "time series rows expected"
        drift = payload["tables"]["summary"][0]["max_charge_drift"]
        assert drift < 1e-10

    def test_reports_byte_identical_across_runs(self, tmp_path):
        path = write_config(tmp_path)
        out1, out2 = tmp_path / "a", tmp_path / "b"
        assert main(["--config", str(path), "--out", str(out1)]) == EXIT_OK
        assert main(["--config", str(path), "--out", str(out2)]) == EXIT_OK
        for name in ("report.csv", "report.json"):
            assert (out1 / name).read_bytes() == (out2 / name).read_bytes()

    def test_gauge_equivalence_experiment(self, tmp_path):
        path = write_config(tmp_path, experiment="gauge-equivalence",
                            dt="2^-4, 2^-5, 2^-6")
        out = tmp_path / "gauge"
        assert main(["--config", str(path), "--out", str(out)]) == EXIT_OK
        payload = json.loads((out / "report.json").read_text())
        sweep = payload["tables"]["gauge_gap"]
        assert len(sweep) == 3
        assert "estimated_order" in payload["tables"]["summary"][0]

    def test_mollification_experiment(self, tmp_path):
        path = write_config(tmp_path, experiment="mollification", kind="none")
        out = tmp_path / "moll"
        assert main(["--config", str(path), "--out", str(out)]) == EXIT_OK
        payload = json.loads((out / "report.json").read_text())
        rows = payload["tables"]["mollification"]
        gaps = [r["noise_gap"] for r in rows]
        assert np.all(np.diff(gaps) <= 0)

    def test_fraccalc_validation_experiment(self, tmp_path):
        path = write_config(tmp_path, experiment="fraccalc-validation")
        out = tmp_path / "val"
        assert main(["--config", str(path), "--out", str(out)]) == EXIT_OK
        payload = json.loads((out / "report.json").read_text())
        checks = payload["tables"]["fraccalc_checks"]
        assert checks and all(row["passed"] for row in checks)

    def test_check_suite_pass(self, capsys):
        assert main(["--check", "fbm"]) == EXIT_OK
        out = capsys.readouterr().out
        assert "[PASS]" in out and "[FAIL]" not in out

    def test_check_suite_unknown(self, capsys):
        assert main(["--check", "nonsense"]) == EXIT_CONFIG

    def test_print_config(self, capsys):
        assert main(["--print-config"]) == EXIT_OK
        assert "[experiment]" in capsys.readouterr().out

    def test_requires_config_or_check(self, capsys):
        assert main([]) == EXIT_CONFIG

    def test_workers_parallel_sweep_matches_serial(self, tmp_path):
        path = write_config(tmp_path, experiment="gauge-equivalence",
                            dt="2^-4, 2^-5, 2^-6")
        serial, parallel = tmp_path / "s", tmp_path / "p"
        assert main(["--config", str(path), "--out", str(serial)]) == EXIT_OK
        assert main(["--config", str(path), "--out", str(parallel),
                     "--workers", "3"]) == EXIT_OK
        a = json.loads((serial / "report.json").read_text())
        b = json.loads((parallel / "report.json").read_text())
        assert a["tables"]["gauge_gap"] == b["tables"]["gauge_gap"]


class TestCheckFailurePath:
    def test_failures_reported_with_exit_one(self, monkeypatch, capsys):
        monkeypatch.setitem(cli.CHECKS, "fbm",
                            lambda: [("forced failure", False, "synthetic")])
        assert cli.run_checks("fbm") == EXIT_CHECK_FAILED
        assert "[FAIL]" in capsys.readouterr().out
