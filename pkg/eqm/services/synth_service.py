"""
Synthetic trace generator

Produces seeded traces, matching Annex-B streams, MOS values and a pixel
proxy column. Each video draws a latent QP, a latent normalized motion and a
hidden pixel-level quality term; its MOS is

    INTERCEPT - QP_SLOPE*(meanQP - QP_REF) - MOTION_SLOPE*motion
      + BITRATE_GAIN*log10(kbps) + hidden + noise

clamped to [0, 100]. The pixel proxy observes the hidden term with noise, so
a model given the proxy can explain what the bitstream features cannot.
"""
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from ..constants import FeatureConstants, ForestConstants, ModelConstants, SynthConstants, TraceConstants
from ..schemas.hevc import ChromaFormat
from ..schemas.trace import BlockRecord, FrameRecord, FrameType, MotionVector, RefList
from . import dataset_io_service, trace_service
from .forest_service import derive_seed
from .hevc_meta_service import build_stream, encode_sps


logger = logging.getLogger(__name__)

_MIN_CU = min(TraceConstants.CU_SIZES)


@dataclass(frozen=True)
class SyntheticVideo:
    video_id: str
    frames: list[FrameRecord]
    stream: bytes
    latent_qp: int
    latent_motion: float
    mean_qp: float
    bitrate: float
    mos: float
    pixel_proxy: float


def quadtree_layout(width: int, height: int, rng: np.random.Generator) -> list[tuple[int, int, int]]:
    """Square CU tiling of the frame: (x, y, size) in CTU raster order, z-order inside a CTU."""
    if width % _MIN_CU or height % _MIN_CU:
        raise ValueError(f"frame dimensions must be multiples of {_MIN_CU}")
    blocks: list[tuple[int, int, int]] = []

    def visit(x: int, y: int, size: int) -> None:
        if x >= width or y >= height:
            return
        inside = x + size <= width and y + size <= height
        if size > _MIN_CU and (not inside or rng.random() < SynthConstants.SPLIT_PROBABILITY[size]):
            half = size // 2
            for dx, dy in ((0, 0), (half, 0), (0, half), (half, half)):
                visit(x + dx, y + dy, half)
        elif inside:
            blocks.append((x, y, size))

    for ctu_y in range(0, height, SynthConstants.CTU_SIZE):
        for ctu_x in range(0, width, SynthConstants.CTU_SIZE):
            visit(ctu_x, ctu_y, SynthConstants.CTU_SIZE)
    return blocks


def _frame_type(poc: int) -> FrameType:
    if poc == 0:
        return FrameType.I
    pattern = SynthConstants.GOP_PATTERN
    return FrameType(pattern[(poc - 1) % len(pattern)])


def _motion_vector(
    rng: np.random.Generator,
    ref_list: RefList,
    ref_poc: int,
    distance: int,
    magnitude: float,
    direction_deg: float,
    scale: float,
) -> MotionVector:
    """Quarter-pel MV whose normalized length is about ``magnitude`` per unit distance."""
    radians = math.radians(direction_deg)
    length = magnitude * scale * distance
    noise = rng.normal(0.0, SynthConstants.MV_NOISE * scale, size=2)
    # trace y axis points down
    mv_x = int(round(length * math.cos(radians) + noise[0]))
    mv_y = int(round(-length * math.sin(radians) + noise[1]))
    return MotionVector(ref_list=ref_list, ref_poc=ref_poc, mv_x=mv_x, mv_y=mv_y)


def _inter_block(
    rng: np.random.Generator,
    frame_type: FrameType,
    poc: int,
    n_frames: int,
    x: int,
    y: int,
    size: int,
    qp: int,
    motion: float,
    direction: float,
    scale: float,
) -> BlockRecord:
    if rng.random() < SynthConstants.LOCAL_BLOCK_FRACTION:
        direction = (direction + 180.0 + rng.uniform(-30.0, 30.0)) % 360.0
        motion = motion * rng.uniform(0.5, 1.5)
    skip = bool(rng.random() < SynthConstants.SKIP_PROBABILITY * math.exp(-motion / SynthConstants.SKIP_MOTION_SCALE))

    mvs = [_motion_vector(rng, RefList.L0, poc - 1, 1, motion, direction, scale)]
    if frame_type == FrameType.B and rng.random() < SynthConstants.TWO_MV_FRACTION:
        if poc + 1 < n_frames:
            mvs.append(_motion_vector(rng, RefList.L1, poc + 1, 1, motion, (direction + 180.0) % 360.0, scale))
        else:
            mvs.append(_motion_vector(rng, RefList.L1, poc - 2, 2, motion, direction, scale))
    return BlockRecord(x=x, y=y, w=size, h=size, qp=qp, cu_size=size, skip=skip, mvs=tuple(mvs))


def _frame_size(rng: np.random.Generator, pixels: int, frame_qp: int, frame_type: FrameType, motion: float) -> int:
    size = (
        pixels
        * SynthConstants.BYTES_PER_PIXEL
        * 2.0 ** ((SynthConstants.QP_SIZE_PIVOT - frame_qp) / SynthConstants.QP_HALVING_STEP)
        * SynthConstants.FRAME_TYPE_SIZE_FACTOR[frame_type.value]
        * (1.0 + motion / SynthConstants.MOTION_SIZE_SCALE)
        * math.exp(rng.normal(0.0, SynthConstants.SIZE_LOG_NOISE))
    )
    return max(SynthConstants.MIN_FRAME_BYTES, int(size))


def planted_mos(mean_qp: float, motion: float, bitrate: float) -> float:
    """Noise-free quality before the hidden pixel term."""
    return (
        SynthConstants.MOS_INTERCEPT
        - SynthConstants.MOS_QP_SLOPE * (mean_qp - SynthConstants.MOS_QP_REFERENCE)
        - SynthConstants.MOS_MOTION_SLOPE * motion
        + SynthConstants.MOS_BITRATE_GAIN * math.log10(bitrate)
    )


def generate_video(
    video_index: int,
    seed: int,
    n_frames: int = SynthConstants.DEFAULT_FRAMES,
    resolutions: tuple[tuple[int, int], ...] = SynthConstants.RESOLUTIONS,
) -> SyntheticVideo:
    rng = np.random.default_rng(derive_seed(seed, video_index))
    width, height = resolutions[int(rng.integers(len(resolutions)))]
    frame_rate = SynthConstants.FRAME_RATES[int(rng.integers(len(SynthConstants.FRAME_RATES)))]
    latent_qp = int(rng.integers(SynthConstants.QP_RANGE[0], SynthConstants.QP_RANGE[1] + 1))
    motion = float(rng.uniform(*SynthConstants.MOTION_RANGE))
    direction = float(rng.uniform(0.0, 360.0))
    hidden = float(rng.normal(0.0, SynthConstants.PIXEL_PROXY_SPREAD))

    layout = quadtree_layout(width, height, rng)
    areas = np.array([size * size for _, _, size in layout], dtype=np.float64)
    # quarter-pel units per unit of normalized length at this resolution and rate
    scale = (width / FeatureConstants.DEFAULT_MAX_FRAME_WIDTH) * (FeatureConstants.DEFAULT_MAX_FRAME_RATE / frame_rate)

    frames: list[FrameRecord] = []
    frame_qps: list[float] = []
    for poc in range(n_frames):
        frame_type = _frame_type(poc)
        frame_qp = latent_qp + SynthConstants.FRAME_TYPE_QP_OFFSET[frame_type.value]
        jitter = rng.integers(-SynthConstants.QP_JITTER, SynthConstants.QP_JITTER + 1, size=len(layout))
        qps = np.clip(frame_qp + jitter, TraceConstants.MIN_QP, TraceConstants.MAX_QP)
        frame_qps.append(float(np.average(qps, weights=areas)))

        if frame_type == FrameType.I:
            blocks = [
                BlockRecord(x=x, y=y, w=size, h=size, qp=int(qp), cu_size=size)
                for (x, y, size), qp in zip(layout, qps)
            ]
        else:
            blocks = [
                _inter_block(rng, frame_type, poc, n_frames, x, y, size, int(qp), motion, direction, scale)
                for (x, y, size), qp in zip(layout, qps)
            ]
        frames.append(FrameRecord(
            poc=poc,
            frame_type=frame_type,
            frame_size=_frame_size(rng, width * height, frame_qp, frame_type, motion),
            width=width,
            height=height,
            frame_rate=frame_rate,
            blocks=tuple(blocks),
        ))

    frame_sizes = [frame.frame_size for frame in frames]
    bitrate = 8 * sum(frame_sizes) / (n_frames / frame_rate) / 1000
    mean_qp = math.fsum(frame_qps) / len(frame_qps)
    quality = planted_mos(mean_qp, motion, bitrate) + hidden + float(rng.normal(0.0, SynthConstants.MOS_NOISE))
    pixel_proxy = hidden + float(rng.normal(0.0, SynthConstants.PIXEL_PROXY_NOISE))

    sps = encode_sps(
        width,
        height,
        bit_depth_luma=10,
        chroma_format=ChromaFormat.YUV420,
        frame_rate=(int(frame_rate), 1),
    )
    return SyntheticVideo(
        video_id=f"synth_{video_index:04d}",
        frames=frames,
        stream=build_stream(sps, frame_sizes),
        latent_qp=latent_qp,
        latent_motion=motion,
        mean_qp=mean_qp,
        bitrate=bitrate,
        mos=float(np.clip(quality, ModelConstants.MIN_SCORE, ModelConstants.MAX_SCORE)),
        pixel_proxy=pixel_proxy,
    )


def generate_videos(
    n_videos: int = SynthConstants.DEFAULT_VIDEOS,
    n_frames: int = SynthConstants.DEFAULT_FRAMES,
    seed: int = ForestConstants.DEFAULT_SEED,
    resolutions: Optional[tuple[tuple[int, int], ...]] = None,
) -> list[SyntheticVideo]:
    if n_videos < 1 or n_frames < 1:
        raise ValueError("n_videos and n_frames must be positive")
    chosen = resolutions or SynthConstants.RESOLUTIONS
    return [generate_video(index, seed, n_frames, chosen) for index in range(n_videos)]


def write_videos(videos: list[SyntheticVideo], out_dir: Path) -> list[Path]:
    """traces/<id>.jsonl, streams/<id>.hevc, mos.csv and externals.csv under ``out_dir``."""
    out_dir = Path(out_dir)
    trace_dir = out_dir / "traces"
    stream_dir = out_dir / "streams"
    trace_dir.mkdir(parents=True, exist_ok=True)
    stream_dir.mkdir(parents=True, exist_ok=True)

    written: list[Path] = []
    for video in videos:
        trace_path = trace_dir / f"{video.video_id}.jsonl"
        with trace_path.open("w", encoding=TraceConstants.ENCODING, newline="\n") as handle:
            trace_service.write_trace(video.frames, handle)
        stream_path = stream_dir / f"{video.video_id}.hevc"
        stream_path.write_bytes(video.stream)
        written.extend([trace_path, stream_path])

    written.append(dataset_io_service.write_mos({v.video_id: v.mos for v in videos}, out_dir / "mos.csv"))
    externals = {v.video_id: v.pixel_proxy for v in videos}
    written.append(dataset_io_service.write_externals(externals, SynthConstants.PIXEL_PROXY_COLUMN, out_dir / "externals.csv"))
    logger.info("Wrote %d synthetic videos to %s", len(videos), out_dir)
    return written
