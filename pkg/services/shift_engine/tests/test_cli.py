"""
Command-line tests: exit codes and output files.
Run with: pytest tests/
"""
import json

import pytest

from app import __version__
from app.adapters.record_writer import TRAJECTORY_COLUMNS, read_csv
from app.core import objectives
from app.main import main

SMALL_REGRESSION = """
# small blessing run
setting = regression
d = 20
subspace_rank = 10
n_particles = 4
T = 40
seed = 1
"""


@pytest.fixture(autouse=True)
def _clean_env(monkeypatch):
    monkeypatch.delenv("ADVSHIFT_THREADS", raising=False)
    monkeypatch.delenv("LOG_LEVEL", raising=False)


class TestSimulate:
    def test_writes_trajectory(self, write_config, tmp_path):
        out = tmp_path / "out"
        assert main(["simulate", "--config", str(write_config(SMALL_REGRESSION)), "--out", str(out)]) == 0
        meta, rows = read_csv(out / "trajectory.csv")
        assert meta["schema_name"] == "trajectory"
        assert meta["schema_version"] == 1
        assert meta["code_version"] == __version__
        assert meta["config"]["seed"] == 1
        assert list(rows[0]) == list(TRAJECTORY_COLUMNS)
        # 9 record times × 4 particles
        assert len(rows) == 36
        assert sorted({row["t"] for row in rows}) == [0, 5, 10, 15, 20, 25, 30, 35, 40]
        assert all(0.0 <= row["align_b"] <= 1.0 for row in rows)

    def test_seed_override(self, write_config, tmp_path):
        out = tmp_path / "out"
        assert main(["simulate", "--config", str(write_config(SMALL_REGRESSION)), "--out", str(out), "--seed", "9"]) == 0
        meta, _ = read_csv(out / "trajectory.csv")
        assert meta["seed"] == "9"

    def test_missing_config_file(self, tmp_path):
        assert main(["simulate", "--config", str(tmp_path / "nope.cfg"), "--out", str(tmp_path)]) == 2

    def test_config_flag_required(self, tmp_path):
        assert main(["simulate", "--out", str(tmp_path)]) == 2

    def test_negative_step_size(self, write_config, tmp_path, capsys):
        path = write_config(SMALL_REGRESSION + "gamma = -0.5\n")
        assert main(["simulate", "--config", str(path), "--out", str(tmp_path)]) == 2
        assert "step size must be positive" in capsys.readouterr().err

    def test_unknown_key(self, write_config, tmp_path, capsys):
        path = write_config(SMALL_REGRESSION + "colour = red\n")
        assert main(["simulate", "--config", str(path), "--out", str(tmp_path)]) == 2
        assert "colour" in capsys.readouterr().err


class TestReproduce:
    @pytest.mark.parametrize("figure,final_t", [("fig1", 40), ("fig2", 200)])
    def test_writes_snapshots_and_manifest(self, tmp_path, figure, final_t):
        out = tmp_path / figure
        assert main(["reproduce", "--figure", figure, "--out", str(out)]) == 0
        snapshots = sorted(p.name for p in (out / "snapshots").iterdir())
        assert len(snapshots) == 9
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["figure"] == figure
        assert manifest["config"]["seed"] == 2024
        assert manifest["config"]["n_particles"] == 100
        assert len(manifest["files"]) == 10
        assert f"snapshots/t_{final_t}.csv" in manifest["files"]
        assert {"r", "gamma_tilde", "eta", "predicted_c", "final_mean_align_b"} <= set(manifest["derived"])
        meta, rows = read_csv(out / "snapshots" / f"t_{final_t}.csv")
        assert meta["schema_name"] == "snapshot"
        assert len(rows) == 100
        assert all(isinstance(row["stationary"], bool) for row in rows)

    def test_blessing_manifest_alignment(self, tmp_path):
        assert main(["reproduce", "--figure", "fig1", "--out", str(tmp_path)]) == 0
        manifest = json.loads((tmp_path / "manifest.json").read_text())
        assert manifest["derived"]["final_mean_align_b"] >= 0.9999

    def test_unknown_figure(self, tmp_path):
        assert main(["reproduce", "--figure", "fig3", "--out", str(tmp_path)]) == 2


class TestVerify:
    def test_passing_suite(self, capsys):
        assert main(["verify", "--suite", "closed-form", "--seed", "3"]) == 0
        lines = capsys.readouterr().out.strip().splitlines()
        assert lines
        assert all(line.startswith("PASS ") for line in lines)

    def test_failing_suite(self, monkeypatch, capsys):
        original = objectives.pointwise_gradient
        monkeypatch.setattr(objectives, "pointwise_gradient", lambda m, setting, x: -original(m, setting, x))
        assert main(["verify", "--suite", "gradients"]) == 1
        assert "FAIL gradient" in capsys.readouterr().out

    def test_unknown_suite(self):
        assert main(["verify", "--suite", "everything"]) == 2

    def test_negative_seed(self):
        assert main(["verify", "--suite", "closed-form", "--seed", "-1"]) == 2


class TestRatesAndLearner:
    def test_regression_rates(self, write_config, tmp_path):
        out = tmp_path / "out"
        assert main(["rates", "--config", str(write_config(SMALL_REGRESSION + "gamma = 0.3\n")), "--out", str(out)]) == 0
        body = json.loads((out / "ratefit.json").read_text())
        assert body["header"]["schema_name"] == "ratefit"
        assert body["model"] == "exp_decay"
        assert body["setting"] == "regression"
        assert body["fitted_rate"] == pytest.approx(body["predicted_c_or_exponent"], rel=0.01)
        assert (out / "trajectory.csv").is_file()
        assert not (out / "diagnostics.csv").exists()

    def test_classification_rates(self, write_config, tmp_path):
        text = SMALL_REGRESSION.replace("regression", "classification").replace("T = 40", "T = 20000")
        out = tmp_path / "out"
        assert main(["rates", "--config", str(write_config(text)), "--out", str(out)]) == 0
        body = json.loads((out / "ratefit.json").read_text())
        assert body["model"] == "poly_log"
        assert body["predicted_c_or_exponent"] == -2.0
        assert "limit_ra_minus_b_over_t" in body
        meta, rows = read_csv(out / "diagnostics.csv")
        assert meta["schema_name"] == "diagnostics"
        assert len(rows) == 20001

    def test_learner(self, write_config, tmp_path):
        out = tmp_path / "out"
        assert main(["learner", "--config", str(write_config(SMALL_REGRESSION)), "--out", str(out)]) == 0
        body = json.loads((out / "learner.json").read_text())
        assert body["n"] == 4
        assert body["steps"] == 1
        assert len(body["theta1"]) == 20
        assert body["err_norm"] >= 0.0


class TestSweep:
    def test_grid_rows(self, write_config, tmp_path):
        path = write_config(SMALL_REGRESSION + "sweep.gamma = 0.1, 0.2, 0.3\n", name="grid.cfg")
        out = tmp_path / "out"
        assert main(["sweep", "--config", str(path), "--out", str(out), "--threads", "1"]) == 0
        meta, rows = read_csv(out / "sweep.csv")
        assert meta["schema_name"] == "sweep"
        assert [row["gamma"] for row in rows] == [0.1, 0.2, 0.3]
        assert all(row["status"] == "completed" for row in rows)

    def test_sweep_keys_rejected_outside_sweep(self, write_config, tmp_path):
        path = write_config(SMALL_REGRESSION + "sweep.gamma = 0.1, 0.2\n")
        assert main(["simulate", "--config", str(path), "--out", str(tmp_path)]) == 2

    def test_bad_thread_count(self, write_config, tmp_path):
        path = write_config(SMALL_REGRESSION, name="grid.cfg")
        assert main(["sweep", "--config", str(path), "--out", str(tmp_path), "--threads", "0"]) == 2


def test_version(capsys):
    with pytest.raises(SystemExit) as err:
        main(["--version"])
    assert err.value.code == 0
    assert __version__ in capsys.readouterr().out
