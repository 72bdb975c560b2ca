"""Tests for the command-line front end of the forecaster."""

import csv
import json
import subprocess
import sys

import pytest

import lstm_baseline.cli as cli
from lstm_baseline.errors import DivergenceError
from lstm_baseline.model import FEATURE_HEADER


@pytest.fixture()
def features_csv(tmp_path):
    """A 24-row synthetic feature table, enough for window 10 runs."""
    path = tmp_path / "features.csv"
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(FEATURE_HEADER)
        for k in range(24):
            writer.writerow([
                k, f"2020-{1 + k // 28:02d}-{1 + k % 28:02d}",
                repr(3.0 + 0.1 * k + 0.2 * ((-1) ** k)),
                "0.2", "0.03",
            ])
    return path


def run_cli(capsys, argv):
    code = cli.main(argv)
    captured = capsys.readouterr()
    return code, captured.out, captured.err


FAST = ["--window", "10", "--hidden-units", "4", "--epochs", "3",
        "--learning-rate", "0.01", "--seed", "1"]


class TestRun:
    def test_flags_only_run_writes_predictions(self, capsys, features_csv, tmp_path):
        out = tmp_path / "preds.csv"
        code, stdout, _ = run_cli(
            capsys,
            ["--features", str(features_csv), "--out", str(out)] + FAST,
        )
        assert code == 0
        assert "wrote 14 predictions" in stdout
        with open(out, newline="") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["quote_id", "predicted_price"]
        assert [int(r[0]) for r in rows[1:]] == list(range(10, 24))

    def test_json_record(self, capsys, features_csv, tmp_path):
        out = tmp_path / "preds.csv"
        code, stdout, _ = run_cli(
            capsys,
            ["--features", str(features_csv), "--out", str(out), "--json"] + FAST,
        )
        assert code == 0
        record = json.loads(stdout)
        assert record["command"] == "fit-predict"
        assert record["samples"] == 14
        assert record["rows_written"] == 14
        assert record["epochs"] == 3
        assert record["final_loss"] < record["initial_loss"]

    def test_runs_are_deterministic(self, capsys, features_csv, tmp_path):
        out = tmp_path / "preds.csv"
        argv = ["--features", str(features_csv), "--out", str(out), "--json"] + FAST
        _, out_a, _ = run_cli(capsys, argv)
        first_file = out.read_text()
        _, out_b, _ = run_cli(capsys, argv)
        assert out_a == out_b
        assert out.read_text() == first_file

    def test_config_file_supplies_settings(self, capsys, features_csv, tmp_path):
        out = tmp_path / "preds.csv"
        config = {
            "schema_version": 1,
            "features": str(features_csv),
            "out": str(out),
            "window": 10,
            "hidden_units": 4,
            "layers": 1,
            "epochs": 2,
            "learning_rate": 0.01,
            "seed": 3,
        }
        config_path = tmp_path / "run.json"
        config_path.write_text(json.dumps(config))
        code, stdout, _ = run_cli(capsys, ["--config", str(config_path), "--json"])
        assert code == 0
        record = json.loads(stdout)
        assert record["epochs"] == 2 and record["samples"] == 14

    def test_flags_override_the_config(self, capsys, features_csv, tmp_path):
        out = tmp_path / "preds.csv"
        config = {
            "schema_version": 1,
            "features": str(features_csv),
            "out": str(out),
            "window": 10,
            "hidden_units": 4,
            "epochs": 40,
            "learning_rate": 0.01,
        }
        config_path = tmp_path / "run.json"
        config_path.write_text(json.dumps(config))
        code, stdout, _ = run_cli(
            capsys, ["--config", str(config_path), "--epochs", "0", "--json"]
        )
        assert code == 0
        record = json.loads(stdout)
        assert record["epochs"] == 0
        assert record["initial_loss"] is None and record["final_loss"] is None


class TestErrors:
    def test_missing_features_flag(self, capsys, tmp_path):
        code, _, err = run_cli(capsys, ["--out", str(tmp_path / "p.csv")])
        assert code == 2
        assert "features" in err

    def test_missing_out_flag(self, capsys, features_csv):
        code, _, err = run_cli(capsys, ["--features", str(features_csv)])
        assert code == 2
        assert "out" in err

    def test_absent_features_file(self, capsys, tmp_path):
        code, _, err = run_cli(capsys, [
            "--features", str(tmp_path / "nope.csv"), "--out", str(tmp_path / "p.csv"),
        ])
        assert code == 2
        assert "not found" in err

    def test_series_too_short_for_the_window(self, capsys, features_csv, tmp_path):
        code, _, err = run_cli(capsys, [
            "--features", str(features_csv), "--out", str(tmp_path / "p.csv"),
            "--window", "24",
        ])
        assert code == 2
        assert "too short" in err

    def test_bad_configs(self, capsys, features_csv, tmp_path):
        code, _, err = run_cli(capsys, ["--config", str(tmp_path / "absent.json")])
        assert code == 2 and "not found" in err

        bad = tmp_path / "bad.json"
        bad.write_text("{oops")
        code, _, err = run_cli(capsys, ["--config", str(bad)])
        assert code == 2 and "invalid JSON" in err

        wrong = tmp_path / "wrong.json"
        wrong.write_text(json.dumps({"schema_version": 99}))
        code, _, err = run_cli(capsys, ["--config", str(wrong)])
        assert code == 2 and "schema_version" in err

        listy = tmp_path / "list.json"
        listy.write_text("[]")
        code, _, err = run_cli(capsys, ["--config", str(listy)])
        assert code == 2 and "object" in err

        unknown = tmp_path / "unknown.json"
        unknown.write_text(json.dumps({"schema_version": 1, "momentum": 0.9}))
        code, _, err = run_cli(capsys, ["--config", str(unknown)])
        assert code == 2 and "momentum" in err

    def test_invalid_config_value_exits_two(self, capsys, features_csv, tmp_path):
        code, _, err = run_cli(capsys, [
            "--features", str(features_csv), "--out", str(tmp_path / "p.csv"),
            "--window", "10", "--learning-rate", "-1",
        ])
        assert code == 2
        assert "learning_rate" in err

    def test_divergence_maps_to_exit_one(self, capsys, features_csv, tmp_path, monkeypatch):
        def explode(dataset, config):
            raise DivergenceError("training diverged at epoch 3: loss=inf")

        monkeypatch.setattr(cli, "train", explode)
        code, _, err = run_cli(capsys, [
            "--features", str(features_csv), "--out", str(tmp_path / "p.csv"),
            "--window", "10",
        ])
        assert code == 1
        assert "numerical failure" in err


class TestProcessEntry:
    def test_module_invocation(self, features_csv, tmp_path):
        out = tmp_path / "preds.csv"
        result = subprocess.run(
            [sys.executable, "-m", "lstm_baseline.cli",
             "--features", str(features_csv), "--out", str(out), "--json"] + FAST,
            capture_output=True, text=True, timeout=120,
        )
        assert result.returncode == 0
        record = json.loads(result.stdout)
        assert record["rows_written"] == 14
        assert out.exists()
