"""Configuration loader for bklkit."""

import os
from pathlib import Path
from typing import Any, Dict, Literal, Optional

import yaml
from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from .exceptions import ConfigurationError

TOL_ENV = "BKLKIT_TOL"
CONFIG_ENV = "BKLKIT_CONFIG"


class ToleranceConfig(BaseModel):
    """Numerical tolerances."""
    model_config = ConfigDict(extra="forbid")

    tol: float = Field(default=1e-9, gt=0, description="Absolute tolerance on residual max-norms")
    rank_tol: float = Field(default=1e-7, gt=0, description="Relative singular value threshold for ranks and kernels")
    exact_tol: float = Field(default=1e-12, gt=0, description="Tolerance for recognising exact constants")


class NormalizerConfig(BaseModel):
    """Frame normalizer configuration."""
    model_config = ConfigDict(extra="forbid")

    seed: int = Field(default=0, description="Seed for the random combinations used in simultaneous diagonalization")
    retries: int = Field(default=5, ge=1, description="Attempts before a diagonalization failure is reported")


class SolverConfig(BaseModel):
    """Feasibility solver configuration."""
    model_config = ConfigDict(extra="forbid")

    restarts: int = Field(default=8, ge=1, description="Number of seeded random starts")
    max_iters: int = Field(default=500, ge=1, description="Iteration cap per restart")
    residual_tol: float = Field(default=1e-12, gt=0, description="Success threshold on the residual norm")
    damping_init: float = Field(default=1e-3, gt=0, description="Initial damping")
    damping_increase: float = Field(default=10.0, gt=1, description="Damping factor on a rejected step")
    damping_decrease: float = Field(default=10.0, gt=1, description="Damping divisor on an accepted step")
    damping_min: float = Field(default=1e-12, gt=0, description="Lower damping cap")
    damping_max: float = Field(default=1e6, gt=0, description="Upper damping cap")
    init_scale: float = Field(default=1.0, gt=0, description="Standard deviation of random starting points")
    rank_margin: float = Field(default=1e-2, gt=0, description="Barrier margin for eigenvalues kept away from zero")
    workers: int = Field(default=1, ge=1, description="Worker threads running restarts")
    fd_step: float = Field(default=1e-6, gt=0, description="Central difference step of the Jacobian self-check")
    fd_rel_tol: float = Field(default=1e-5, gt=0, description="Accepted relative error of the Jacobian self-check")
    strict_jacobian: bool = Field(default=False, description="Abort a search when the Jacobian self-check fails")


LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR")


class LoggingConfig(BaseModel):
    """Logging to standard error."""
    model_config = ConfigDict(extra="forbid")

    level: str = Field(default="WARNING", description="One of DEBUG, INFO, WARNING, ERROR")
    format: Literal["text", "json"] = Field(default="text", description="Line renderer")

    @field_validator("level")
    @classmethod
    def _known_level(cls, value: str) -> str:
        level = value.upper()
        if level not in LOG_LEVELS:
            raise ValueError(f"unknown log level {value!r}, expected one of {', '.join(LOG_LEVELS)}")
        return level


class AppConfig(BaseModel):
    """Everything one bklkit invocation reads."""
    model_config = ConfigDict(extra="forbid")

    tolerance: ToleranceConfig = Field(default_factory=ToleranceConfig)
    normalizer: NormalizerConfig = Field(default_factory=NormalizerConfig)
    solver: SolverConfig = Field(default_factory=SolverConfig)
    logging: LoggingConfig = Field(default_factory=LoggingConfig)


def find_config_file() -> Optional[str]:
    """$BKLKIT_CONFIG, else config/config.yaml.local, else config/config.yaml, else None."""
    explicit = os.environ.get(CONFIG_ENV)
    if explicit:
        return explicit
    for candidate in ("config/config.yaml.local", "config/config.yaml"):
        if Path(candidate).exists():
            return candidate
    return None


def load_config(path: Optional[str] = None) -> AppConfig:
    """Read the YAML file, then apply BKLKIT_TOL.

    A ``.env`` file in the working directory is loaded first, so both variables may live there.
    Without ``path`` or $BKLKIT_CONFIG and with no config/config.yaml, defaults are used.

    Raises:
        ConfigurationError: If an explicitly named file is missing or does not parse, a section
            is invalid, or the environment override is malformed.
    """
    load_dotenv()
    path = path or find_config_file()

    data: Dict[str, Any] = {}
    if path and not Path(path).is_file():
        raise ConfigurationError(f"Configuration file not found: {path}")
    if path:
        try:
            with open(path, "r", encoding="utf-8") as f:
                data = yaml.safe_load(f) or {}
        except yaml.YAMLError as e:
            raise ConfigurationError(f"Cannot parse {path}: {e}") from e
        except OSError as e:
            raise ConfigurationError(f"Cannot read {path}: {e}") from e
        if not isinstance(data, dict):
            raise ConfigurationError(f"{path} must hold a mapping of sections")

    try:
        loaded = AppConfig(**data)
    except ValidationError as e:
        raise ConfigurationError(f"Invalid configuration in {path}: {e}") from e
    return apply_environment(loaded)


def with_overrides(app_config: AppConfig, **sections: Dict[str, Any]) -> AppConfig:
    """Merge per-section overrides and validate the result again.

    ``with_overrides(cfg, tolerance={"tol": 1e-6})`` replaces one field and keeps the rest.
    """
    merged = app_config.model_dump()
    for section, values in sections.items():
        if values:
            merged[section].update(values)
    try:
        return AppConfig.model_validate(merged)
    except ValidationError as e:
        errors = "; ".join(f"{'.'.join(map(str, err['loc']))}: {err['msg']}" for err in e.errors())
        raise ConfigurationError(f"Invalid override: {errors}") from e


def apply_environment(app_config: AppConfig) -> AppConfig:
    """Apply the BKLKIT_TOL override on top of a loaded configuration."""
    raw = os.environ.get(TOL_ENV)
    if raw is None or raw.strip() == "":
        return app_config

    try:
        tol = float(raw)
    except ValueError as e:
        raise ConfigurationError(f"{TOL_ENV} is not a number: {raw!r}") from e
    if not tol > 0:
        raise ConfigurationError(f"{TOL_ENV} must be positive, got {raw!r}")

    return with_overrides(app_config, tolerance={"tol": tol})

