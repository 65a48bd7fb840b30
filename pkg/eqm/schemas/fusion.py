import math

from pydantic import BaseModel, ConfigDict, Field, model_validator

from ..constants import FusionConstants


class AnchorPair(BaseModel):
    """One anchor video rated in both the source and the target study"""

    model_config = ConfigDict(frozen=True)

    video_id: str = Field(..., min_length=1)
    source_mos: float = Field(..., allow_inf_nan=False)
    target_mos: float = Field(..., allow_inf_nan=False)


class AnchorSet(BaseModel):
    """Anchor pairs shared by a source study and the target scale"""

    model_config = ConfigDict(frozen=True)

    pairs: list[AnchorPair]

    @model_validator(mode="after")
    def validate_unique_ids(self):
        ids = [pair.video_id for pair in self.pairs]
        if len(set(ids)) != len(ids):
            raise ValueError("anchor video ids must be unique")
        return self

    @property
    def video_ids(self) -> set[str]:
        return {pair.video_id for pair in self.pairs}


class LinearMap(BaseModel):
    """target = a * source + b, fitted on anchors"""

    model_config = ConfigDict(frozen=True)

    a: float = Field(..., allow_inf_nan=False)
    b: float = Field(..., allow_inf_nan=False)
    r2: float = Field(..., le=1.0)
    n_anchors: int = Field(..., ge=FusionConstants.MIN_ANCHORS)
    stderr_a: float = Field(default=0.0, ge=0)
    stderr_b: float = Field(default=0.0, ge=0)

    def apply(self, value: float) -> float:
        return self.a * value + self.b

    def invert(self, value: float) -> float:
        return (value - self.b) / self.a

    @property
    def is_increasing(self) -> bool:
        return self.a > 0 and math.isfinite(self.a)
