from enum import Enum, IntEnum
from typing import Any

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from ..constants import FeatureConstants, TraceConstants


class FrameType(str, Enum):
    """Coded picture type"""
    I = "I"
    P = "P"
    B = "B"


class RefList(IntEnum):
    """Reference picture list of a motion vector"""
    L0 = TraceConstants.LIST_L0
    L1 = TraceConstants.LIST_L1


class MotionVector(BaseModel):
    """Quarter-pel motion vector; serialized in traces as [list, ref_poc, mvx, mvy]"""

    model_config = ConfigDict(frozen=True)

    ref_list: RefList
    ref_poc: int
    mv_x: int
    mv_y: int

    @model_validator(mode="before")
    @classmethod
    def from_trace_array(cls, data: Any) -> Any:
        if isinstance(data, (list, tuple)):
            if len(data) != 4:
                raise ValueError("motion vector must be [list, ref_poc, mvx, mvy]")
            ref_list, ref_poc, mv_x, mv_y = data
            return {"ref_list": ref_list, "ref_poc": ref_poc, "mv_x": mv_x, "mv_y": mv_y}
        return data

    def to_trace(self) -> list[int]:
        return [int(self.ref_list), self.ref_poc, self.mv_x, self.mv_y]


class BlockRecord(BaseModel):
    """One prediction block: position, size, CU size, QP, skip flag and 0..2 MVs"""

    model_config = ConfigDict(frozen=True, populate_by_name=True)

    x: int = Field(..., ge=0)
    y: int = Field(..., ge=0)
    w: int = Field(..., gt=0)
    h: int = Field(..., gt=0)
    qp: int = Field(..., ge=TraceConstants.MIN_QP, le=TraceConstants.MAX_QP)
    cu_size: int = Field(..., alias="cu")
    skip: bool = False
    mvs: tuple[MotionVector, ...] = Field(default=(), max_length=TraceConstants.MAX_MVS_PER_BLOCK)

    @field_validator("cu_size")
    @classmethod
    def validate_cu_size(cls, value: int) -> int:
        if value not in TraceConstants.CU_SIZES:
            raise ValueError(f"cu must be one of {TraceConstants.CU_SIZES}")
        return value

    @property
    def area(self) -> int:
        return self.w * self.h

    def to_trace(self) -> dict:
        return {
            "x": self.x,
            "y": self.y,
            "w": self.w,
            "h": self.h,
            "qp": self.qp,
            "cu": self.cu_size,
            "skip": self.skip,
            "mvs": [mv.to_trace() for mv in self.mvs],
        }


class FrameRecord(BaseModel):
    """One coded frame with its block records (trace field names as aliases)"""

    model_config = ConfigDict(frozen=True, populate_by_name=True)

    poc: int
    frame_type: FrameType = Field(..., alias="type")
    frame_size: int = Field(..., alias="size", ge=0)
    width: int = Field(..., alias="w", gt=0)
    height: int = Field(..., alias="h", gt=0)
    frame_rate: float = Field(..., alias="fps", gt=0, allow_inf_nan=False)
    blocks: tuple[BlockRecord, ...]

    @property
    def is_intra(self) -> bool:
        return self.frame_type == FrameType.I

    def to_trace(self) -> dict:
        return {
            "poc": self.poc,
            "type": self.frame_type.value,
            "size": self.frame_size,
            "w": self.width,
            "h": self.height,
            "fps": self.frame_rate,
            "blocks": [block.to_trace() for block in self.blocks],
        }


class NormConfig(BaseModel):
    """Motion normalization and MV-angle partition settings"""

    model_config = ConfigDict(frozen=True)

    max_frame_width: int = Field(default=FeatureConstants.DEFAULT_MAX_FRAME_WIDTH, gt=0)
    max_frame_rate: float = Field(default=FeatureConstants.DEFAULT_MAX_FRAME_RATE, gt=0, allow_inf_nan=False)
    low_motion_tau: float = Field(default=FeatureConstants.DEFAULT_LOW_MOTION_TAU, gt=0, allow_inf_nan=False)
    global_threshold: float = Field(default=FeatureConstants.DEFAULT_GLOBAL_THRESHOLD, gt=0, lt=1)
