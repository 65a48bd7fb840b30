"""
Trace-to-feature pipeline: ingest a trace, extract per-frame features
concurrently, split into segments, pool, and optionally average per video
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Optional, Sequence

from ..constants import ConfigConstants, PoolingConstants, TraceConstants
from ..schemas.features import SegmentFeatures
from ..schemas.hevc import MetadataFeatures
from ..schemas.trace import FrameRecord, NormConfig
from .frame_feature_service import extract_frame_features, metadata_from_trace
from .hevc_meta_service import probe_metadata
from .pooling_service import average_segments, pool_segment, split_segments
from .trace_service import parse_trace


logger = logging.getLogger(__name__)


def extract_segments(
    frames: Sequence[FrameRecord],
    meta: MetadataFeatures,
    cfg: NormConfig,
    segment_frames: Optional[int] = None,
    average: bool = False,
    threads: int = 1,
) -> list[tuple[int, SegmentFeatures]]:
    """(segment_idx, features) pairs; a single (-1, averaged) pair when ``average`` is set."""
    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        frame_features = list(pool.map(lambda frame: extract_frame_features(frame, cfg), frames))

    pooled = [pool_segment(segment, meta) for segment in split_segments(frame_features, segment_frames)]
    if average:
        return [(PoolingConstants.VIDEO_LEVEL_SEGMENT_IDX, average_segments(pooled))]
    return list(enumerate(pooled))


def video_metadata(
    frames: Sequence[FrameRecord],
    stream_path: Optional[Path] = None,
    pixel_format: str = ConfigConstants.DEFAULT_PIXEL_FORMAT,
    frame_rate_override: Optional[float] = None,
) -> MetadataFeatures:
    """Metadata from the bitstream when one is given, otherwise from the trace."""
    if stream_path is not None:
        return probe_metadata(
            Path(stream_path).read_bytes(),
            frame_rate_override=frame_rate_override,
            frame_count=len(frames),
        )
    meta = metadata_from_trace(list(frames), pixel_format=pixel_format)
    if frame_rate_override is not None:
        meta = meta.model_copy(update={"frame_rate": frame_rate_override})
    return meta


def extract_trace_file(
    trace_path: Path,
    cfg: NormConfig,
    stream_path: Optional[Path] = None,
    pixel_format: str = ConfigConstants.DEFAULT_PIXEL_FORMAT,
    frame_rate_override: Optional[float] = None,
    segment_frames: Optional[int] = None,
    average: bool = False,
    threads: int = 1,
) -> list[tuple[int, SegmentFeatures]]:
    with Path(trace_path).open(encoding=TraceConstants.ENCODING) as handle:
        frames = parse_trace(handle)
    meta = video_metadata(frames, stream_path, pixel_format, frame_rate_override)
    segments = extract_segments(frames, meta, cfg, segment_frames, average, threads)
    logger.info("Extracted %d segment row(s) from %d frames of %s", len(segments), len(frames), trace_path)
    return segments
