import json
from pathlib import Path
from typing import Any, Optional

from pydantic import Field, ValidationError
from pydantic_settings import BaseSettings, PydanticBaseSettingsSource, SettingsConfigDict

from .constants import ConfigConstants, ForestConstants
from .core.custom_exceptions import ConfigVersionError, UsageError
from .schemas.forest import ForestParams
from .schemas.model import EqmLevel
from .schemas.trace import NormConfig


class PipelineConfig(BaseSettings):
    """Pipeline configuration (config file, .env and EQM_* environment variables)"""

    model_config = SettingsConfigDict(
        env_prefix=ConfigConstants.ENV_PREFIX,
        env_file=".env",
        env_nested_delimiter="__",
        extra="ignore",
    )

    config_version: int = ConfigConstants.CONFIG_VERSION

    # Feature extraction
    norm: NormConfig = Field(default_factory=NormConfig)
    segment_frames: Optional[int] = Field(default=None, ge=1)
    pixel_format: str = ConfigConstants.DEFAULT_PIXEL_FORMAT
    frame_rate_override: Optional[float] = Field(default=None, gt=0)

    # Model
    level: EqmLevel = EqmLevel.NR
    two_stage: bool = True
    base_qp: bool = True
    base_forest: ForestParams = Field(default_factory=ForestParams)
    residual_forest: ForestParams = Field(default_factory=ForestParams)

    # Runtime
    seed: int = Field(default=ForestConstants.DEFAULT_SEED, ge=0, le=ForestConstants.UINT64_MASK)
    threads: int = Field(default=ConfigConstants.DEFAULT_THREADS, ge=1)
    log_level: str = ConfigConstants.DEFAULT_LOG_LEVEL

    @classmethod
    def settings_customise_sources(
        cls,
        settings_cls: type[BaseSettings],
        init_settings: PydanticBaseSettingsSource,
        env_settings: PydanticBaseSettingsSource,
        dotenv_settings: PydanticBaseSettingsSource,
        file_secret_settings: PydanticBaseSettingsSource,
    ) -> tuple[PydanticBaseSettingsSource, ...]:
        """
        Source precedence (highest → lowest):
        1) explicit init kwargs (config file values and CLI flags),
        2) .env file,
        3) OS environment variables,
        4) file secrets.
        """
        return (
            init_settings,
            dotenv_settings,
            env_settings,
            file_secret_settings,
        )

    @classmethod
    def load(cls, path: Optional[Path] = None, **overrides: Any) -> "PipelineConfig":
        """Build the effective config from an optional JSON file plus explicit overrides."""
        values: dict[str, Any] = {}
        if path is not None:
            try:
                values = json.loads(Path(path).read_text(encoding="utf-8"))
            except (OSError, json.JSONDecodeError) as exc:
                raise UsageError(f"Cannot read config file {path}: {exc}") from exc
            if not isinstance(values, dict):
                raise UsageError(f"Config file {path} must hold a JSON object")
            version = values.get("config_version", ConfigConstants.CONFIG_VERSION)
            if version != ConfigConstants.CONFIG_VERSION:
                raise ConfigVersionError(
                    f"Config version {version} is not supported (expected {ConfigConstants.CONFIG_VERSION})"
                )
        values.update({key: value for key, value in overrides.items() if value is not None})
        try:
            return cls(**values)
        except ValidationError as exc:
            first = exc.errors()[0]
            field = ".".join(str(part) for part in first.get("loc", ()))
            raise UsageError(f"Invalid configuration value for '{field}': {first.get('msg')}") from exc

    def forest_params(self) -> tuple[ForestParams, ForestParams]:
        """Base and residual forest params with the run seed applied where none was configured."""
        base = self.base_forest
        residual = self.residual_forest
        if "seed" not in base.model_fields_set:
            base = base.model_copy(update={"seed": self.seed})
        if "seed" not in residual.model_fields_set:
            residual = residual.model_copy(update={"seed": self.seed})
        return base, residual

    def echo(self) -> dict:
        """JSON-safe dump of every effective setting."""
        return self.model_dump(mode="json")
