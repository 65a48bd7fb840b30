import math
from typing import Sequence, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


FeatureValue = Union[float, str]


class LabeledRow(BaseModel):
    """One video: feature columns (segment features and external columns) plus its MOS"""

    model_config = ConfigDict(frozen=True)

    video_id: str = Field(..., min_length=1)
    features: dict[str, FeatureValue]
    mos: float = Field(..., allow_inf_nan=False)

    @field_validator("features")
    @classmethod
    def validate_numeric_values(cls, value: dict[str, FeatureValue]) -> dict[str, FeatureValue]:
        for key, item in value.items():
            if isinstance(item, float) and not math.isfinite(item):
                raise ValueError(f"feature '{key}' is not finite")
        return value


class LabeledDataset(BaseModel):
    """Rows with unique video ids and one shared feature key set"""

    model_config = ConfigDict(frozen=True)

    rows: list[LabeledRow]

    @model_validator(mode="after")
    def validate_rows(self):
        seen: set[str] = set()
        for row in self.rows:
            if row.video_id in seen:
                raise ValueError(f"duplicate video_id '{row.video_id}'")
            seen.add(row.video_id)
        if self.rows:
            keys = set(self.rows[0].features)
            for row in self.rows[1:]:
                if set(row.features) != keys:
                    raise ValueError(f"row '{row.video_id}' has a different feature key set")
        return self

    def __len__(self) -> int:
        return len(self.rows)

    @property
    def video_ids(self) -> list[str]:
        return [row.video_id for row in self.rows]

    @property
    def feature_keys(self) -> list[str]:
        return list(self.rows[0].features) if self.rows else []

    def mos_vector(self) -> np.ndarray:
        return np.array([row.mos for row in self.rows], dtype=np.float64)

    def subset(self, indices: Sequence[int]) -> "LabeledDataset":
        return LabeledDataset(rows=[self.rows[int(i)] for i in indices])
