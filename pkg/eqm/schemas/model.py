from enum import Enum
from typing import Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

from ..constants import ModelConstants
from .forest import Forest
from .trace import NormConfig


class EqmLevel(str, Enum):
    """Operating level: which inputs the model may use"""
    METADATA = "metadata"
    METADATA_QP = "metadata_qp"
    NR = "nr"
    FR = "fr"


class EqmModel(BaseModel):
    """Trained EQM predictor.

    Two-stage models hold ``base`` and a ``residual`` forest whose first
    feature is the base output. Single-forest models (metadata levels and
    the one-forest ablation) keep their only forest in ``residual``.
    """

    model_config = ConfigDict(frozen=True)

    version: int = ModelConstants.MODEL_FILE_VERSION
    level: EqmLevel
    two_stage: bool
    base_qp: bool
    norm_config: NormConfig
    codec_dictionary: dict[str, int] = Field(default_factory=lambda: dict(ModelConstants.CODEC_DICTIONARY))
    pixel_format_dictionary: dict[str, int] = Field(
        default_factory=lambda: dict(ModelConstants.PIXEL_FORMAT_DICTIONARY)
    )
    base_feature_keys: list[str] = Field(default_factory=list)
    residual_feature_keys: list[str]
    external_columns: list[str] = Field(default_factory=list)
    base: Optional[Forest] = None
    residual: Forest

    @model_validator(mode="after")
    def validate_forests(self):
        has_base_output = ModelConstants.BASE_OUTPUT_KEY in self.residual_feature_keys
        if (self.base is not None) != has_base_output:
            raise ValueError(f"'{ModelConstants.BASE_OUTPUT_KEY}' must be a residual key exactly when a base forest exists")
        if self.base is not None and self.base.feature_names != self.base_feature_keys:
            raise ValueError("base feature keys do not match the base forest")
        if self.residual.feature_names != self.residual_feature_keys:
            raise ValueError("residual feature keys do not match the residual forest")
        return self

    @property
    def input_keys(self) -> list[str]:
        """Every input column the model reads, in first-use order."""
        keys = list(self.base_feature_keys)
        for key in self.residual_feature_keys:
            if key != ModelConstants.BASE_OUTPUT_KEY and key not in keys:
                keys.append(key)
        return keys
