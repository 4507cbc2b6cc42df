"""Tests for the command-line interface."""

import json
import subprocess
import sys

import pytest

from swarmcap import cli
from swarmcap.errors import SolverError


def run(*argv):
    return cli.main([str(a) for a in argv])


class TestParsing:
    @pytest.mark.parametrize("text,expected", [("13", [13]), ("1,2,4", [1, 2, 4]), ("1-4", [1, 2, 3, 4]), ("1-2,5", [1, 2, 5])])
    def test_k_list(self, text, expected):
        assert cli._k_list(text) == expected

    def test_precedence(self, tmp_path):
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps({"m_y": 8, "phi_deg": 45.0, "trials": 3}))
        args = cli.build_parser().parse_args(["sweep", "--config", str(cfg), "--phi", "30", "-K", "1-3"])
        c = cli.resolve_config(args)
        assert (c.m_y, c.phi_deg, c.trials, c.k_values) == (8, 30.0, 3, [1, 2, 3])
        assert c.r_min == 50.0

    def test_infinite_d_max_flag(self):
        args = cli.build_parser().parse_args(["optimize", "--d-max", "inf"])
        assert cli.resolve_config(args).d_max == float("inf")


class TestExitCodes:
    def test_characterize_ok(self, tmp_path, capsys):
        assert run("characterize", "--array", "UPA", "--m-y", 8, "--m-z", 8, "--theta", 60, "--phi", 60, "--out", tmp_path) == 0
        assert "characterize.csv" in capsys.readouterr().out
        assert (tmp_path / "manifest.json").exists()

    def test_optimize_ok(self, tmp_path):
        assert run("optimize", "--m-y", 8, "-K", 3, "--d-min", 10, "--out", tmp_path) == 0
        assert (tmp_path / "convergence.csv").exists()

    def test_infeasible(self, tmp_path, capsys):
        code = run("optimize", "--m-y", 8, "-K", 2, "--r-min", 50, "--r-max", 50, "--d-min", 200, "--out", tmp_path)
        assert code == cli.EXIT_INFEASIBLE == 2
        assert "infeasible" in capsys.readouterr().err

    def test_solver_failure(self, tmp_path, monkeypatch):
        def boom(*a, **k):
            raise SolverError("forced")

        monkeypatch.setattr(cli, "run_experiment", boom)
        assert run("optimize", "--out", tmp_path) == cli.EXIT_SOLVER == 3

    def test_bad_config_key(self, tmp_path):
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps({"antennas": 3}))
        assert run("optimize", "--config", cfg, "--out", tmp_path) == cli.EXIT_USAGE

    def test_invalid_value(self, tmp_path):
        assert run("optimize", "--r-min", 600, "--out", tmp_path) == cli.EXIT_USAGE

    def test_argparse_error_is_usage(self):
        with pytest.raises(SystemExit) as exc:
            run("optimize", "--m-y", "many")
        assert exc.value.code == cli.EXIT_USAGE

    def test_reproduce_figure(self, tmp_path):
        assert run("reproduce-figure", 3, "--out", tmp_path) == 0
        assert (tmp_path / "fig3" / "scaling" / "count_scaling.csv").exists()

    def test_console_module(self, tmp_path):
        proc = subprocess.run(
            [sys.executable, "-m", "swarmcap.cli", "characterize", "--out", str(tmp_path)],
            capture_output=True,
            text=True,
        )
        assert proc.returncode == 0, proc.stderr
