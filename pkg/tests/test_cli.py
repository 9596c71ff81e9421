"""CLI tests: subcommands, config validation, reproducibility."""

from pathlib import Path

import pytest

from splitsde.cli import load_config, main
from splitsde.exceptions import ConfigurationError

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"


def run_cli(args):
    return main([str(a) for a in args])


class TestVerifyAlgebra:
    def test_builtin_schemes(self, capsys):
        assert run_cli(["verify-algebra", "--scheme", "nv_b", "--d", "2"]) == 0
        out = capsys.readouterr().out
        assert "order 2" in out
        assert "defect at degree 3" in out

    def test_custom_expression(self, capsys):
        code = run_cli(["verify-algebra", "--expr", "1 * exp(1,0) exp(1,1)", "--d", "0"])
        assert code == 0
        assert "order 1" in capsys.readouterr().out

    def test_empty_scheme_list_is_usage_error(self, capsys):
        assert run_cli(["verify-algebra"]) == 2

    def test_parse_error_reports_position(self, capsys):
        assert run_cli(["verify-algebra", "--expr", "1 * junk"]) == 2
        assert "position" in capsys.readouterr().err

    def test_unknown_scheme(self, capsys):
        assert run_cli(["verify-algebra", "--scheme", "milstein"]) == 2

    def test_all_builtins_meet_documented_orders(self, capsys):
        args = ["verify-algebra", "--max-order", "4", "--d", "1"]
        for name in ("nv_a", "nv_b", "splitting", "nv_extrapolated", "fujiwara4", "forward_product"):
            args += ["--scheme", name]
        assert run_cli(args) == 0


class TestConfigLoading:
    def test_example_configs_validate(self):
        for path in sorted(CONFIG_DIR.glob("*.toml")):
            cfg = load_config(path)
            assert cfg.T > 0
            assert len(cfg.n_list) >= 3

    def test_example_configs_run_quickly(self, tmp_path):
        # Every shipped config must run end to end well inside five minutes.
        import time

        for path in sorted(CONFIG_DIR.glob("*.toml")):
            start = time.perf_counter()
            code = run_cli(["--out-dir", tmp_path / path.stem, "run", "--config", path])
            assert code == 0, path
            assert time.perf_counter() - start < 300.0, path

    def test_missing_key_names_the_key(self, tmp_path):
        bad = tmp_path / "bad.toml"
        bad.write_text('[model]\nname = "gbm"\n[experiment]\nn_list = [2,4,8]\n')
        with pytest.raises(ConfigurationError, match="'T'"):
            load_config(bad)

    def test_missing_file(self):
        with pytest.raises(ConfigurationError, match="does not exist"):
            load_config("/nonexistent/cfg.toml")

    def test_toml_syntax_error(self, tmp_path):
        bad = tmp_path / "bad.toml"
        bad.write_text("[model\nname=")
        with pytest.raises(ConfigurationError, match="parse error"):
            load_config(bad)

    def test_unknown_model_name(self, tmp_path):
        bad = tmp_path / "bad.toml"
        bad.write_text('[model]\nname = "cir"\n[experiment]\nT = 1.0\nn_list = [2,4,8]\n')
        with pytest.raises(ConfigurationError, match="cir"):
            load_config(bad)


class TestRun:
    def test_dry_run_prints_plan(self, capsys):
        code = run_cli(["--dry-run", "run", "--config", CONFIG_DIR / "vg_one_jump.toml"])
        assert code == 0
        out = capsys.readouterr().out
        assert "plan:" in out
        assert "eps=" in out

    def test_run_writes_outputs(self, tmp_path, capsys):
        code = run_cli(
            ["--out-dir", tmp_path, "--seed", "5", "run", "--config", CONFIG_DIR / "cp_truncate.toml"]
        )
        assert code == 0
        csv = tmp_path / "splitting_x.csv"
        assert csv.exists()
        assert (tmp_path / "plot_splitting_x.py").exists()
        assert "fitted order" in capsys.readouterr().out

    def test_seed_determines_outputs_bytewise(self, tmp_path, capsys):
        outs = []
        for sub in ("a", "b"):
            out_dir = tmp_path / sub
            run_cli(["--out-dir", out_dir, "--seed", "9", "run", "--config", CONFIG_DIR / "cp_truncate.toml"])
            outs.append((out_dir / "splitting_x.csv").read_bytes())
        assert outs[0] == outs[1]


class TestDefectScan:
    def test_scan_outputs_exponents(self, tmp_path, capsys):
        code = run_cli(["--out-dir", tmp_path, "defect-scan", "--config", CONFIG_DIR / "defect_scan.toml"])
        assert code == 0
        out = capsys.readouterr().out
        assert "fitted eps-exponent" in out
        assert (tmp_path / "defect_scan.csv").exists()

    def test_degree_cap(self, tmp_path, capsys):
        cfg = (CONFIG_DIR / "defect_scan.toml").read_text().replace('f = ["x3", "x4"]', 'f = ["x7"]')
        path = tmp_path / "cfg.toml"
        path.write_text(cfg)
        assert run_cli(["--out-dir", tmp_path, "defect-scan", "--config", path]) == 2


class TestConvergence:
    def test_table(self, tmp_path, capsys):
        code = run_cli(
            ["--out-dir", tmp_path, "--threads", "2", "convergence", "--config", CONFIG_DIR / "cp_truncate.toml"]
        )
        assert code == 0
        out = capsys.readouterr().out
        assert "euler_maruyama" in out and "splitting" in out
        assert (tmp_path / "convergence_nv_b_x.csv").exists()
