import math
from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from ..constants import FeatureConstants, PoolingConstants
from .hevc import MetadataFeatures
from .trace import FrameType


class FrameFeatures(BaseModel):
    """Per-frame feature tuple before temporal pooling"""

    model_config = ConfigDict(frozen=True)

    frame_type: FrameType
    frame_size: int = Field(..., ge=0)
    min_qp: float
    max_qp: float
    avg_qp: float
    avg_block_depth: float
    skip_ratio: Optional[float] = Field(default=None, ge=0, le=1)
    avg_motion: Optional[float] = None
    stddev_motion: Optional[float] = None
    avg_qp_lm: Optional[float] = None
    avg_qp_local_mv_dir: Optional[float] = None
    mv_global_angle: Optional[float] = Field(default=None, ge=0, lt=360)

    @model_validator(mode="after")
    def validate_qp_order(self):
        # tolerance for area-weighted float means
        slack = 1e-9 * max(1.0, abs(self.max_qp))
        if not (self.min_qp - slack <= self.avg_qp <= self.max_qp + slack):
            raise ValueError("avg_qp must lie within [min_qp, max_qp]")
        return self


class AngleHistogram(BaseModel):
    """Area-weighted MV direction histogram, bin d covers [d, d+1) degrees"""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    bins: np.ndarray

    @field_validator("bins", mode="before")
    @classmethod
    def validate_bins(cls, value: np.ndarray) -> np.ndarray:
        value = np.asarray(value, dtype=np.float64)
        if value.shape != (FeatureConstants.HISTOGRAM_BINS,):
            raise ValueError(f"histogram needs exactly {FeatureConstants.HISTOGRAM_BINS} bins")
        if np.any(value < 0):
            raise ValueError("histogram counts must be non-negative")
        value.setflags(write=False)
        return value

    @classmethod
    def empty(cls) -> "AngleHistogram":
        return cls(bins=np.zeros(FeatureConstants.HISTOGRAM_BINS))

    @property
    def total(self) -> float:
        return float(self.bins.sum())

    def nonzero_bins(self) -> set[int]:
        return {int(b) for b in np.flatnonzero(self.bins)}


class SegmentFeatures(BaseModel):
    """Pooled segment (or averaged video) feature vector with metadata"""

    model_config = ConfigDict(frozen=True)

    values: dict[str, float]
    metadata: MetadataFeatures
    frame_count: int = Field(..., ge=1)

    @field_validator("values")
    @classmethod
    def validate_keys(cls, value: dict[str, float]) -> dict[str, float]:
        if set(value) != set(PoolingConstants.EQM_KEYS):
            missing = sorted(set(PoolingConstants.EQM_KEYS) - set(value))
            extra = sorted(set(value) - set(PoolingConstants.EQM_KEYS))
            raise ValueError(f"non-canonical key set (missing={missing}, extra={extra})")
        if not all(math.isfinite(v) for v in value.values()):
            raise ValueError("segment feature values must be finite")
        return {key: float(value[key]) for key in PoolingConstants.EQM_KEYS}

    def as_row(self) -> dict[str, float | int | str]:
        """All 28 feature columns in canonical order."""
        row: dict[str, float | int | str] = dict(self.values)
        row[PoolingConstants.FRAME_COUNT_KEY] = self.frame_count
        row.update(self.metadata.as_record())
        return row

    @classmethod
    def from_row(cls, row: dict) -> "SegmentFeatures":
        return cls(
            values={key: float(row[key]) for key in PoolingConstants.EQM_KEYS},
            metadata=MetadataFeatures.from_record(row),
            frame_count=int(row[PoolingConstants.FRAME_COUNT_KEY]),
        )
