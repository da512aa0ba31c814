from functools import lru_cache
from typing import Any, Literal

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from fracostro._errors import ConfigError
from fracostro._filesystem import cached_file_read, get_config_path


@lru_cache(maxsize=1)
def get_defaults() -> dict:
    """Get the packaged numerical defaults."""
    try:
        config_path = get_config_path("defaults.yml")
        return yaml.safe_load(cached_file_read(config_path)) or {}
    except Exception:
        return {}


@lru_cache(maxsize=1)
def get_systems_config() -> dict:
    """Get the builtin system parameters."""
    try:
        config_path = get_config_path("systems.yml")
        config_content = cached_file_read(config_path)
        return yaml.safe_load(config_content)
    except Exception:
        raise ConfigError(f"Failed to load systems config: {config_path}") from None


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class GridConfig(_Strict):
    a: float = 0.0
    b: float
    n: int = Field(ge=2)

    @model_validator(mode="after")
    def _ordered(self) -> "GridConfig":
        if self.b <= self.a:
            raise ValueError("grid.b must exceed grid.a")
        return self


class BoundaryConfig(_Strict):
    left: list[tuple[int, Any]] | None = None
    right: list[tuple[int, Any]] | None = None
    profile: str | None = None

    @model_validator(mode="after")
    def _one_source(self) -> "BoundaryConfig":
        explicit = self.left is not None or self.right is not None
        if explicit == (self.profile is not None):
            raise ValueError("boundary needs either left/right pairs or a profile, not both")
        return self


class SolveConfig(_Strict):
    max_unknowns: int = Field(default_factory=lambda: int(get_defaults().get("max_unknowns", 20000)), ge=1)


def _default_fit_window() -> tuple[float, float] | None:
    window = get_defaults().get("fit_window")
    return None if window is None else (float(window[0]), float(window[1]))


class KernelConfig(_Strict):
    fit_window: tuple[float, float] | None = Field(default_factory=_default_fit_window)
    max_separation: float = Field(
        default_factory=lambda: float(get_defaults().get("max_separation", 0.25)), gt=0, le=0.5
    )

    @field_validator("fit_window")
    @classmethod
    def _window_order(cls, window: tuple[float, float] | None) -> tuple[float, float] | None:
        if window is not None and not 0 <= window[0] < window[1]:
            raise ValueError("kernel.fit_window must satisfy 0 <= tau_min < tau_max")
        return window


class SweepConfig(_Strict):
    alphas: list[float] = Field(min_length=1)
    workers: int = Field(default=1, ge=1)

    @field_validator("alphas")
    @classmethod
    def _alpha_range(cls, alphas: list[float]) -> list[float]:
        if any(not 0 < alpha <= 1 for alpha in alphas):
            raise ValueError("sweep alphas must lie in (0, 1]")
        return alphas


class OutputConfig(_Strict):
    trajectory: str = "trajectory.csv"
    report: str = "report.json"
    correlator: str = "correlator.csv"


class RunConfig(_Strict):
    """Validated run configuration; unknown keys are rejected."""

    schema_version: Literal[1] = Field(alias="schema")
    system: Literal["pu", "damped", "sho", "custom"]
    lagrangian: str | None = None
    ladder: list[float] | None = None
    alpha: float | None = Field(default=None, gt=0, le=1)
    params: dict[str, Any] = Field(default_factory=dict)
    riewe: bool | None = None
    grid: GridConfig
    boundary: BoundaryConfig | None = None
    reference: str | None = None
    solve: SolveConfig = Field(default_factory=SolveConfig)
    kernel: KernelConfig = Field(default_factory=KernelConfig)
    sweep: SweepConfig | None = None
    output: OutputConfig = Field(default_factory=OutputConfig)

    @field_validator("params")
    @classmethod
    def _param_values(cls, params: dict[str, Any]) -> dict[str, Any]:
        for name, value in params.items():
            if isinstance(value, bool) or not isinstance(value, int | float | str | list):
                raise ValueError(f"parameter {name!r} must be a number, [re, im] pair or DSL constant")
            if isinstance(value, list) and len(value) != 2:
                raise ValueError(f"parameter {name!r} pair must have two entries")
        return params

    @model_validator(mode="after")
    def _custom_text(self) -> "RunConfig":
        if (self.system == "custom") != (self.lagrangian is not None):
            raise ValueError("lagrangian text is required for system 'custom' and only allowed there")
        return self


def parse_run_config(data: dict, alpha: float | None = None, grid_n: int | None = None) -> RunConfig:
    """Validate raw config data, applying command-line overrides."""
    if not isinstance(data, dict):
        raise ConfigError("Config must be a mapping")
    data = dict(data)
    if alpha is not None:
        data["alpha"] = alpha
    if grid_n is not None:
        data["grid"] = {**data.get("grid", {}), "n": grid_n}

    try:
        return RunConfig.model_validate(data)
    except ValidationError as e:
        first = e.errors()[0]
        where = ".".join(str(part) for part in first["loc"])
        raise ConfigError(f"{where}: {first['msg']}") from e


def load_run_config(path: str, alpha: float | None = None, grid_n: int | None = None) -> RunConfig:
    try:
        with open(path) as f:
            data = yaml.safe_load(f)
    except (OSError, yaml.YAMLError) as e:
        raise ConfigError(f"Failed to read config {path}: {e}") from e
    return parse_run_config(data, alpha=alpha, grid_n=grid_n)
