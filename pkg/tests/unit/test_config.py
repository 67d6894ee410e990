"""Tests for configuration loader."""

import pytest
import yaml
from pydantic import ValidationError

from src.core.config import (
    CONFIG_ENV,
    TOL_ENV,
    AppConfig,
    LoggingConfig,
    NormalizerConfig,
    SolverConfig,
    ToleranceConfig,
    apply_environment,
    find_config_file,
    load_config,
    with_overrides,
)
from src.core.exceptions import ConfigurationError


class TestToleranceConfig:
    """Test ToleranceConfig model."""

    def test_default_values(self):
        """Test default tolerances."""
        config = ToleranceConfig()
        assert config.tol == 1e-9
        assert config.rank_tol == 1e-7
        assert config.exact_tol == 1e-12

    def test_rejects_non_positive(self):
        """Test that a zero tolerance is rejected."""
        with pytest.raises(Exception):
            ToleranceConfig(tol=0.0)

    def test_rejects_unknown_keys(self):
        """Test that unknown keys are rejected."""
        with pytest.raises(Exception):
            ToleranceConfig(tolerance=1e-3)


class TestSolverConfig:
    """Test SolverConfig model."""

    def test_default_damping_schedule(self):
        """Test the default damping schedule."""
        config = SolverConfig()
        assert config.damping_init == 1e-3
        assert config.damping_increase == 10.0
        assert config.damping_decrease == 10.0
        assert config.damping_min == 1e-12
        assert config.damping_max == 1e6
        assert config.max_iters == 500

    def test_custom_values(self):
        """Test custom solver values."""
        config = SolverConfig(restarts=100, workers=8)
        assert config.restarts == 100
        assert config.workers == 8


class TestLoggingConfig:
    """Test LoggingConfig model."""

    def test_default_values(self):
        """Test default logging configuration."""
        config = LoggingConfig()
        assert config.level == "WARNING"
        assert config.format == "text"

    def test_level_upper_cased(self):
        """Test that levels are accepted in any case."""
        assert LoggingConfig(level="debug").level == "DEBUG"

    @pytest.mark.parametrize("field,value", [("level", "LOUD"), ("format", "xml")])
    def test_rejects_unknown(self, field, value):
        """Test that unknown levels and formats are rejected."""
        with pytest.raises(ValidationError):
            LoggingConfig(**{field: value})


class TestAppConfig:
    """Test AppConfig model."""

    def test_load_from_dict(self):
        """Test loading configuration from dictionary."""
        config = AppConfig(**{
            "tolerance": {"tol": 1e-8},
            "normalizer": {"seed": 7},
            "logging": {"level": "DEBUG"},
        })
        assert config.tolerance.tol == 1e-8
        assert config.normalizer.seed == 7
        assert config.logging.level == "DEBUG"
        assert isinstance(config.solver, SolverConfig)
        assert isinstance(config.normalizer, NormalizerConfig)


class TestLoadConfig:
    """Test locating and reading the YAML file."""

    @pytest.fixture(autouse=True)
    def clean_environment(self, monkeypatch):
        """Drop inherited overrides."""
        monkeypatch.delenv(CONFIG_ENV, raising=False)
        monkeypatch.delenv(TOL_ENV, raising=False)

    def test_find_config_file_default(self):
        """Test finding the shipped config file from the repository root."""
        assert find_config_file() == "config/config.yaml"

    def test_find_config_file_from_environment(self, monkeypatch):
        """Test that BKLKIT_CONFIG selects the file."""
        monkeypatch.setenv(CONFIG_ENV, "/tmp/elsewhere.yaml")
        assert find_config_file() == "/tmp/elsewhere.yaml"

    def test_shipped_file_matches_defaults(self):
        """Test that config/config.yaml restates the model defaults."""
        assert load_config("config/config.yaml") == AppConfig()

    def test_load_config(self, tmp_path):
        """Test loading configuration from file."""
        path = tmp_path / "test_config.yaml"
        path.write_text(yaml.dump({"tolerance": {"tol": 1e-6}, "solver": {"restarts": 3}}))

        cfg = load_config(str(path))

        assert cfg.tolerance.tol == 1e-6
        assert cfg.solver.restarts == 3
        assert cfg.solver.max_iters == 500

    @pytest.mark.parametrize(
        "text",
        [
            "solver:\n  restarts: 0\n",
            "solver: {restarts: [\n",
            "- just\n- a list\n",
            "frobnicate: {}\n",
        ],
    )
    def test_invalid_file_raises(self, tmp_path, text):
        """Test that bad sections, bad YAML and non-mappings raise ConfigurationError."""
        path = tmp_path / "bad.yaml"
        path.write_text(text)
        with pytest.raises(ConfigurationError):
            load_config(str(path))

    def test_no_file_gives_defaults(self, tmp_path, monkeypatch):
        """Test that defaults are used when no file is named and none is found."""
        monkeypatch.chdir(tmp_path)
        assert load_config() == AppConfig()

    def test_missing_explicit_file(self, tmp_path):
        """Test that a named file that does not exist is an error."""
        with pytest.raises(ConfigurationError, match="not found"):
            load_config(str(tmp_path / "missing.yaml"))

    def test_missing_file_from_environment(self, tmp_path, monkeypatch):
        """Test that BKLKIT_CONFIG pointing nowhere is an error."""
        monkeypatch.setenv(CONFIG_ENV, str(tmp_path / "missing.yaml"))
        with pytest.raises(ConfigurationError, match="not found"):
            load_config()

    def test_environment_applied_after_file(self, tmp_path, monkeypatch):
        """Test that BKLKIT_TOL wins over the file."""
        path = tmp_path / "c.yaml"
        path.write_text(yaml.dump({"tolerance": {"tol": 1e-6}}))
        monkeypatch.setenv(TOL_ENV, "1e-3")
        assert load_config(str(path)).tolerance.tol == 1e-3


class TestWithOverrides:
    """Test per-field overrides."""

    def test_single_field(self):
        """Test that one field changes and its neighbours stay."""
        cfg = with_overrides(AppConfig(), tolerance={"tol": 1e-6})
        assert cfg.tolerance.tol == 1e-6
        assert cfg.tolerance.rank_tol == 1e-7

    def test_empty_sections_ignored(self):
        """Test that empty overrides return an equal configuration."""
        assert with_overrides(AppConfig(), logging={}, solver={}) == AppConfig()

    def test_revalidates(self):
        """Test that overrides go through validation."""
        with pytest.raises(ConfigurationError, match="solver.workers"):
            with_overrides(AppConfig(), solver={"workers": 0})

    def test_level_normalized(self):
        """Test that a lower-case level override is accepted."""
        assert with_overrides(AppConfig(), logging={"level": "info"}).logging.level == "INFO"


class TestEnvironmentOverride:
    """Test the BKLKIT_TOL override."""

    def test_override_applied(self, monkeypatch):
        """Test that BKLKIT_TOL replaces the tolerance."""
        monkeypatch.setenv(TOL_ENV, "1e-4")
        assert apply_environment(AppConfig()).tolerance.tol == 1e-4

    def test_empty_value_ignored(self, monkeypatch):
        """Test that an empty value leaves the tolerance alone."""
        monkeypatch.setenv(TOL_ENV, "")
        assert apply_environment(AppConfig()).tolerance.tol == 1e-9

    @pytest.mark.parametrize("raw", ["abc", "0", "-1e-3"])
    def test_invalid_value_raises(self, monkeypatch, raw):
        """Test that non-numeric or non-positive values raise."""
        monkeypatch.setenv(TOL_ENV, raw)
        with pytest.raises(ConfigurationError):
            apply_environment(AppConfig())
