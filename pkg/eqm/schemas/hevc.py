from enum import Enum
from typing import Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

from ..constants import HevcConstants
from ..core.bitstream import escape_payload


class ChromaFormat(str, Enum):
    """Chroma sampling signalled by chroma_format_idc"""
    MONO = "mono"
    YUV420 = "420"
    YUV422 = "422"
    YUV444 = "444"


class Codec(str, Enum):
    """Codec tag of the metadata feature set"""
    H264 = HevcConstants.CODEC_H264
    H265 = HevcConstants.CODEC_H265


class NalUnit(BaseModel):
    """One Annex-B NAL unit with emulation-prevention bytes removed.

    ``payload`` includes the two-byte NAL header. ``prefix_zeros`` is the
    number of zero bytes in front of the 0x01 of its start code and
    ``trailing_zeros`` counts trailing_zero_8bits after the last unit of a stream.
    """

    model_config = ConfigDict(frozen=True)

    nal_type: int = Field(..., ge=0, le=63)
    payload: bytes
    prefix_zeros: int = Field(default=2, ge=2)
    trailing_zeros: int = Field(default=0, ge=0)

    @model_validator(mode="after")
    def validate_header(self):
        if len(self.payload) < HevcConstants.NAL_HEADER_BYTES:
            raise ValueError("payload shorter than the NAL unit header")
        if (self.payload[0] >> 1) & 0x3F != self.nal_type:
            raise ValueError("nal_type does not match the NAL unit header")
        return self

    def to_annexb(self) -> bytes:
        """Start code + re-escaped payload (+ trailing zero bytes)."""
        return (
            b"\x00" * self.prefix_zeros
            + b"\x01"
            + escape_payload(self.payload)
            + b"\x00" * self.trailing_zeros
        )


class SpsInfo(BaseModel):
    """Fields of a sequence parameter set needed for video-level metadata"""

    model_config = ConfigDict(frozen=True)

    sps_id: int = Field(default=0, ge=0, le=HevcConstants.MAX_SPS_ID)
    width_luma: int = Field(..., gt=0, description="Displayed width after the conformance window")
    height_luma: int = Field(..., gt=0, description="Displayed height after the conformance window")
    coded_width: Optional[int] = Field(default=None, gt=0)
    coded_height: Optional[int] = Field(default=None, gt=0)
    bit_depth_luma: int = Field(..., ge=HevcConstants.MIN_BIT_DEPTH, le=HevcConstants.MAX_BIT_DEPTH)
    bit_depth_chroma: int = Field(default=8, ge=HevcConstants.MIN_BIT_DEPTH, le=HevcConstants.MAX_BIT_DEPTH)
    chroma_format: ChromaFormat
    frame_rate: Optional[float] = Field(default=None, gt=0)
    full_range: Optional[bool] = None
    colour_primaries: Optional[int] = None
    transfer_characteristics: Optional[int] = None
    matrix_coeffs: Optional[int] = None

    @property
    def resolution(self) -> int:
        return self.width_luma * self.height_luma

    @property
    def pixel_format(self) -> str:
        """ffmpeg-style name, e.g. yuv420p10le; full-range streams get a -full suffix."""
        stem = HevcConstants.PIXEL_FORMAT_STEMS[self.chroma_format.value]
        name = stem if self.bit_depth_luma == 8 else f"{stem}{self.bit_depth_luma}le"
        return f"{name}{HevcConstants.FULL_RANGE_SUFFIX}" if self.full_range else name


class MetadataFeatures(BaseModel):
    """Video-level metadata features (Resolution, FrameRate, Codec, PixelFormat, Bitrate)"""

    model_config = ConfigDict(frozen=True)

    resolution: int = Field(..., gt=0, description="Pixel count width x height")
    frame_rate: float = Field(..., gt=0, allow_inf_nan=False)
    codec: Codec = Codec.H265
    pixel_format: str = Field(..., min_length=1)
    bitrate: float = Field(..., gt=0, allow_inf_nan=False, description="kbit/s")

    def as_record(self) -> dict[str, float | int | str]:
        """Key/value record using the published feature names."""
        return {
            "Resolution": self.resolution,
            "FrameRate": self.frame_rate,
            "Codec": self.codec.value,
            "PixelFormat": self.pixel_format,
            "Bitrate": self.bitrate,
        }

    @classmethod
    def from_record(cls, record: dict) -> "MetadataFeatures":
        return cls(
            resolution=int(record["Resolution"]),
            frame_rate=float(record["FrameRate"]),
            codec=Codec(str(record["Codec"])),
            pixel_format=str(record["PixelFormat"]),
            bitrate=float(record["Bitrate"]),
        )
