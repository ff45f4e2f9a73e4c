import json
from pathlib import Path

import pytest

from spherefit.cli import main

CONFIG = """\
target: ramp_u1
space: {lo: -1.0, hi: 1.0, order: 0}
basis: {family: polynomial, dimension: 6}
families:
  - kind: positivity
solver: greedy
samples: 101
"""


def _write_config(tmp_path, text=CONFIG, name="run.yaml"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


class TestApproximate:
    def test_writes_expected_artifacts(self, tmp_path, capsys):
        cfg = _write_config(tmp_path)
        out = tmp_path / "out"
        code = main(["approximate", "--config", cfg, "--out", str(out)])
        assert code == 0
        for name in (
            "metrics.json",
            "samples.csv",
            "coefficients.csv",
            "trace.csv",
            "manifest.json",
        ):
            assert (out / name).exists(), name
        metrics = json.loads((out / "metrics.json").read_text())
        assert metrics["converged"] is True
        assert metrics["dimension"] == 6
        assert 0.5 < metrics["rel_change_np"] < 2.0
        assert "converged=True" in capsys.readouterr().out

    def test_runs_are_byte_identical(self, tmp_path):
        cfg = _write_config(tmp_path)
        outs = []
        for sub in ("a", "b"):
            out = tmp_path / sub
            assert main(["approximate", "--config", cfg, "--out", str(out)]) == 0
            outs.append(out)
        for name in ("metrics.json", "samples.csv", "coefficients.csv", "trace.csv"):
            first = (outs[0] / name).read_bytes()
            second = (outs[1] / name).read_bytes()
            assert first == second, name

    def test_non_convergence_exit_code(self, tmp_path):
        text = CONFIG + "solver_config: {max_iter: 1}\n"
        cfg = _write_config(tmp_path, text)
        out = tmp_path / "out"
        code = main(["approximate", "--config", cfg, "--out", str(out)])
        assert code == 2
        metrics = json.loads((out / "metrics.json").read_text())
        assert metrics["converged"] is False

    def test_solver_override(self, tmp_path):
        cfg = _write_config(tmp_path)
        out = tmp_path / "out"
        code = main(
            ["approximate", "--config", cfg, "--out", str(out), "--solver", "hybrid"]
        )
        assert code == 0
        metrics = json.loads((out / "metrics.json").read_text())
        assert metrics["solver"] == "hybrid"

    def test_seed_recorded_in_manifest(self, tmp_path):
        cfg = _write_config(tmp_path)
        out = tmp_path / "out"
        assert main(
            ["approximate", "--config", cfg, "--out", str(out), "--seed", "7"]
        ) == 0
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["seed"] == 7


class TestUsageErrors:
    def test_missing_config_file(self, tmp_path, capsys):
        code = main(["approximate", "--config", str(tmp_path / "absent.yaml")])
        assert code == 1
        assert "cannot read config" in capsys.readouterr().err

    def test_malformed_config(self, tmp_path, capsys):
        cfg = _write_config(tmp_path, "target: ramp_u1\nbasis: {family: polynomial}\n")
        assert main(["approximate", "--config", cfg]) == 1

    def test_unknown_config_key(self, tmp_path, capsys):
        cfg = _write_config(tmp_path, CONFIG + "typo_key: 3\n")
        assert main(["approximate", "--config", cfg]) == 1
        assert "typo_key" in capsys.readouterr().err

    def test_no_families(self, tmp_path):
        text = CONFIG.replace("families:\n  - kind: positivity\n", "families: []\n")
        cfg = _write_config(tmp_path, text)
        assert main(["approximate", "--config", cfg]) == 1

    def test_unknown_subcommand(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["frobnicate"])
        assert exc.value.code == 1

    def test_no_arguments_is_usage_error(self):
        with pytest.raises(SystemExit) as exc:
            main([])
        assert exc.value.code == 1


class TestReproduce:
    def test_table1_report_artifacts(self, tmp_path, capsys):
        out = tmp_path / "rep"
        code = main(["reproduce", "--table", "table1", "--out", str(out)])
        # The command diffs honestly: 0 only when every reference quantity
        # lands in tolerance, 3 on drift, 2 on non-convergence.
        assert code in (0, 2, 3)
        report = (out / "report.txt").read_text()
        verdict = "ALL WITHIN TOLERANCE" if code == 0 else "MISMATCHES FOUND"
        assert f"OVERALL: {verdict}" in report
        assert report.count("table1") == 18  # three checks per preset cell
        rows = (out / "rows.csv").read_text().strip().splitlines()
        assert len(rows) == 7  # header + one row per solver/dimension cell
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["command"] == "reproduce table1"
        assert "report written to" in capsys.readouterr().out


class TestSweep:
    def test_small_sweep(self, tmp_path):
        text = CONFIG + "dims: [4, 8]\n"
        cfg = _write_config(tmp_path, text)
        out = tmp_path / "sweep"
        code = main(["sweep", "--config", cfg, "--out", str(out)])
        assert code == 0
        rows = (out / "sweep.csv").read_text().strip().splitlines()
        assert len(rows) == 3  # header + 2 dimensions
        slopes = json.loads((out / "slopes.json").read_text())
        assert slopes["slope_np"] < 0

    def test_sweep_requires_dims(self, tmp_path, capsys):
        cfg = _write_config(tmp_path)
        assert main(["sweep", "--config", cfg]) == 1
        assert "dims" in capsys.readouterr().err
