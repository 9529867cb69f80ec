"""
Tests for config files, per-setting defaults and environment settings.
Run with: pytest tests/
"""
import pytest

from app.config.loader import build_config, load_config, load_sweep, parse_flat
from app.config.settings import Settings, load_settings, resolve_threads
from app.core.errors import ConfigError
from app.core.objectives import Setting
from app.schemas import InitialLaw, ThetaStarRule


class TestParseFlat:
    def test_comments_and_blank_lines(self):
        values = parse_flat("# header\n\nsetting = classification  # inline\nT=10\n")
        assert values == {"setting": "classification", "T": "10"}

    def test_missing_equals(self):
        with pytest.raises(ConfigError, match="line 2"):
            parse_flat("T = 10\nseed 4\n")

    def test_duplicate_key(self):
        with pytest.raises(ConfigError, match="duplicate"):
            parse_flat("T = 10\nT = 20\n")


class TestExperimentConfig:
    """Validation and per-setting defaults."""

    def test_regression_defaults(self):
        cfg = build_config({})
        assert cfg.setting is Setting.REGRESSION
        assert cfg.gamma == 0.1
        assert cfg.learner_eta == 0.5
        assert cfg.initial_law is InitialLaw.AMBIENT
        assert cfg.theta_star_rule is ThetaStarRule.HARMONIC
        assert cfg.subspace_seed == cfg.seed
        assert cfg.learner_samples == cfg.n_particles
        assert cfg.snapshots == [0, 5, 10, 15, 20, 25, 30, 35, 40]

    def test_classification_defaults(self):
        cfg = build_config({"setting": "classification", "T": 200})
        assert cfg.gamma == 0.25
        assert cfg.initial_law is InitialLaw.SUBSPACE
        assert cfg.snapshots[-1] == 200

    def test_record_every_appends_final_time(self):
        assert build_config({"T": 10, "record_every": 4}).snapshots == [0, 4, 8, 10]

    def test_comma_lists(self):
        cfg = build_config({"d": "3", "subspace_rank": "1", "theta_star_rule": "custom", "theta_star_custom": "1, 0.5, 0"})
        assert cfg.theta_star_custom == [1.0, 0.5, 0.0]

    @pytest.mark.parametrize(
        "values,field",
        [
            ({"gamma": "0"}, "gamma"),
            ({"subspace_rank": "300"}, "config"),
            ({"theta_star_rule": "custom", "d": "3", "subspace_rank": "1"}, "config"),
            ({"snapshots": "0, 50"}, "config"),
            ({"snapshots": "5, 0"}, "config"),
            ({"seed": "-1"}, "seed"),
            ({"n_particles": "4", "learner_samples": "8"}, "config"),
            ({"setting": "ranking"}, "setting"),
            ({"colour": "red"}, "colour"),
        ],
    )
    def test_invalid(self, values, field):
        with pytest.raises(ConfigError) as err:
            build_config(values)
        assert err.value.field == field
        assert err.value.exit_code == 2

    def test_unknown_key_message(self):
        with pytest.raises(ConfigError, match="colour: unknown key"):
            build_config({"colour": "red"})


class TestFiles:
    def test_load_config_with_override(self, write_config):
        cfg = load_config(write_config("setting = regression\nT = 20\nseed = 4\n"), {"seed": 11})
        assert cfg.T == 20
        assert cfg.seed == 11
        assert cfg.subspace_seed == 11

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="file not found"):
            load_config(tmp_path / "absent.cfg")

    def test_sweep_product(self, write_config):
        path = write_config("T = 10\nsweep.gamma = 0.1, 0.2\nsweep.subspace_rank = 50, 100\n")
        configs = load_sweep(path)
        assert [(cfg.gamma, cfg.subspace_rank) for cfg in configs] == [(0.1, 50), (0.1, 100), (0.2, 50), (0.2, 100)]
        assert all(cfg.T == 10 for cfg in configs)

    def test_sweep_without_grid(self, write_config):
        assert len(load_sweep(write_config("T = 10\n"))) == 1

    def test_empty_sweep_list(self, write_config):
        with pytest.raises(ConfigError):
            load_sweep(write_config("sweep.gamma = ,\n"))


class TestSettings:
    def test_environment(self, monkeypatch, tmp_path):
        monkeypatch.setenv("LOG_LEVEL", "DEBUG")
        monkeypatch.setenv("ADVSHIFT_THREADS", "3")
        settings = load_settings(dotenv_path=str(tmp_path / "missing.env"))
        assert settings.log_level == "debug"
        assert settings.threads == 3

    def test_bad_environment(self, monkeypatch, tmp_path):
        monkeypatch.setenv("ADVSHIFT_THREADS", "0")
        with pytest.raises(ConfigError, match="ADVSHIFT_THREADS"):
            load_settings(dotenv_path=str(tmp_path / "missing.env"))

    def test_dotenv_file(self, monkeypatch, tmp_path):
        monkeypatch.setenv("LOG_LEVEL", "info")
        monkeypatch.delenv("LOG_LEVEL")
        env = tmp_path / ".env"
        env.write_text("LOG_LEVEL=warning\n")
        assert load_settings(dotenv_path=str(env)).log_level == "warning"

    def test_resolve_threads(self):
        assert resolve_threads(None, Settings()) == 1
        assert resolve_threads(4, Settings()) == 4
        assert resolve_threads(4, Settings(threads=2)) == 2
        with pytest.raises(ConfigError):
            resolve_threads(0, Settings())
