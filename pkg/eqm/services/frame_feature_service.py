"""
Frame-level feature service

QP statistics, block statistics, normalized motion-length statistics and
MV-angle features of a single frame. Every function is a pure function of
(FrameRecord, NormConfig), so frames can be processed in any order.

Weighting: a PU counts once per 4x4 unit it covers, i.e. with weight w*h/16,
which reproduces a per-4x4 iteration without storing MVs per 4x4.
"""
import logging
import math
from typing import Optional

import numpy as np

from ..constants import ConfigConstants, FeatureConstants
from ..core.custom_exceptions import EmptyGlobalSetError, EmptyInputError, NoMotionBlocksError, ZeroRefDistanceError
from ..schemas.features import AngleHistogram, FrameFeatures
from ..schemas.hevc import Codec, MetadataFeatures
from ..schemas.trace import BlockRecord, FrameRecord, MotionVector, NormConfig


logger = logging.getLogger(__name__)


def normalized_mv_length(mv: MotionVector, frame: FrameRecord, cfg: NormConfig) -> float:
    """|MV| scaled by resolution, frame rate and reference distance."""
    distance = abs(frame.poc - mv.ref_poc)
    if distance == 0:
        raise ZeroRefDistanceError(f"Motion vector of poc {frame.poc} references its own picture")
    f_res = cfg.max_frame_width / frame.width
    f_fr = frame.frame_rate / cfg.max_frame_rate
    return f_fr * f_res * (1.0 / distance) * math.hypot(mv.mv_x, mv.mv_y)


def block_motion_length(block: BlockRecord, frame: FrameRecord, cfg: NormConfig) -> float:
    """Normalized length of a PU; bi-predicted blocks average their two MVs."""
    lengths = [normalized_mv_length(mv, frame, cfg) for mv in block.mvs]
    return sum(lengths) / len(lengths)


def _unit_weight(block: BlockRecord) -> float:
    return block.area / FeatureConstants.UNIT_AREA


def frame_motion_stats(frame: FrameRecord, cfg: NormConfig) -> tuple[float, float]:
    """Area-weighted mean and population std of normalized MV length."""
    values = []
    weights = []
    for block in frame.blocks:
        if not block.mvs:
            continue
        values.append(block_motion_length(block, frame, cfg))
        weights.append(_unit_weight(block))
    if not values:
        raise NoMotionBlocksError(f"Frame poc {frame.poc} has no MV-bearing block")

    values_arr = np.asarray(values)
    weights_arr = np.asarray(weights)
    mean = float(np.average(values_arr, weights=weights_arr))
    variance = float(np.average((values_arr - mean) ** 2, weights=weights_arr))
    return mean, math.sqrt(variance)


def mv_angle(mv: MotionVector) -> float:
    """Direction in [0, 360) with y pointing up; raster MVs point y down."""
    angle = math.degrees(math.atan2(-mv.mv_y, mv.mv_x)) % 360.0
    return 0.0 if angle >= 360.0 else angle


def mv_angle_bin(mv: MotionVector) -> int:
    return min(int(math.floor(mv_angle(mv))), FeatureConstants.HISTOGRAM_BINS - 1)


def _is_zero(mv: MotionVector) -> bool:
    return mv.mv_x == 0 and mv.mv_y == 0


def mv_angle_histogram(frame: FrameRecord) -> AngleHistogram:
    bins = np.zeros(FeatureConstants.HISTOGRAM_BINS)
    for block in frame.blocks:
        if not block.mvs:
            continue
        share = _unit_weight(block) / len(block.mvs)
        for mv in block.mvs:
            if _is_zero(mv):
                continue
            bins[mv_angle_bin(mv)] += share
    return AngleHistogram(bins=bins)


def partition_global_local(histogram: AngleHistogram, threshold: float) -> tuple[set[int], set[int]]:
    """Split nonzero bins into the dominant (global) directions and the rest.

    Bins are taken by descending count, ties to the lower bin, until their
    cumulative count reaches ``threshold`` of the total.
    """
    if not 0 < threshold < 1:
        raise ValueError("threshold must lie in (0, 1)")
    total = histogram.total
    if total <= 0:
        return set(), set()

    counts = histogram.bins
    order = np.lexsort((np.arange(counts.size), -counts))
    target = threshold * total * (1 - FeatureConstants.THRESHOLD_RELATIVE_TOLERANCE)
    global_bins: set[int] = set()
    cumulative = 0.0
    for index in order:
        if counts[index] <= 0:
            break
        global_bins.add(int(index))
        cumulative += float(counts[index])
        if cumulative >= target:
            break
    return global_bins, histogram.nonzero_bins() - global_bins


def global_angle(histogram: AngleHistogram, global_bins: set[int]) -> tuple[float, bool]:
    """Direction of the count-weighted vector sum over bin centers.

    Returns (degrees, degenerate); a cancelling resultant gives (0.0, True).
    """
    if not global_bins:
        raise EmptyGlobalSetError("Global bin set is empty")
    indices = np.array(sorted(global_bins))
    counts = histogram.bins[indices]
    count_total = float(counts.sum())
    if count_total <= 0:
        raise EmptyGlobalSetError("Global bins hold no counts")

    radians = np.radians(indices + FeatureConstants.BIN_CENTER_OFFSET)
    x = float(np.sum(counts * np.cos(radians)))
    y = float(np.sum(counts * np.sin(radians)))
    if math.hypot(x, y) <= FeatureConstants.DEGENERATE_RESULTANT_FRACTION * count_total:
        return 0.0, True
    angle = math.degrees(math.atan2(y, x)) % 360.0
    return (0.0 if angle >= 360.0 else angle), False


def _weighted_qp(blocks: list[BlockRecord]) -> Optional[float]:
    if not blocks:
        return None
    qps = np.array([block.qp for block in blocks], dtype=np.float64)
    areas = np.array([block.area for block in blocks], dtype=np.float64)
    return float(np.average(qps, weights=areas))


def avg_qp_local_mv_dir(frame: FrameRecord, local_bins: set[int]) -> Optional[float]:
    """Area-weighted QP of blocks moving in a local (non-dominant) direction."""
    if not local_bins:
        return None
    selected = [
        block
        for block in frame.blocks
        if any(not _is_zero(mv) and mv_angle_bin(mv) in local_bins for mv in block.mvs)
    ]
    return _weighted_qp(selected)


def avg_qp_low_motion(frame: FrameRecord, cfg: NormConfig) -> Optional[float]:
    """Area-weighted QP of skip blocks and blocks whose normalized motion is below tau."""
    selected = [
        block
        for block in frame.blocks
        if block.skip or (block.mvs and block_motion_length(block, frame, cfg) < cfg.low_motion_tau)
    ]
    return _weighted_qp(selected)


def frame_scalar_stats(frame: FrameRecord) -> tuple[float, float, float, float, Optional[float]]:
    """(min_qp, max_qp, avg_qp, avg_block_depth, skip_ratio); skip_ratio is None for I frames."""
    qps = np.array([block.qp for block in frame.blocks], dtype=np.float64)
    areas = np.array([block.area for block in frame.blocks], dtype=np.float64)
    depths = np.log2(np.array([block.cu_size for block in frame.blocks], dtype=np.float64))

    avg_qp = float(np.average(qps, weights=areas))
    avg_block_depth = float(np.average(depths, weights=areas))
    skip_ratio = None
    if not frame.is_intra:
        skip_area = sum(block.area for block in frame.blocks if block.skip)
        skip_ratio = skip_area / float(areas.sum())
    return float(qps.min()), float(qps.max()), avg_qp, avg_block_depth, skip_ratio


def extract_frame_features(frame: FrameRecord, cfg: NormConfig) -> FrameFeatures:
    min_qp, max_qp, avg_qp, avg_block_depth, skip_ratio = frame_scalar_stats(frame)
    features = {
        "frame_type": frame.frame_type,
        "frame_size": frame.frame_size,
        "min_qp": min_qp,
        "max_qp": max_qp,
        "avg_qp": avg_qp,
        "avg_block_depth": avg_block_depth,
        "skip_ratio": skip_ratio,
    }
    if frame.is_intra:
        return FrameFeatures(**features)

    try:
        features["avg_motion"], features["stddev_motion"] = frame_motion_stats(frame, cfg)
    except NoMotionBlocksError:
        logger.debug("Frame poc %d has no motion vectors; motion features absent", frame.poc)
    features["avg_qp_lm"] = avg_qp_low_motion(frame, cfg)

    histogram = mv_angle_histogram(frame)
    global_bins, local_bins = partition_global_local(histogram, cfg.global_threshold)
    if global_bins:
        features["mv_global_angle"], _ = global_angle(histogram, global_bins)
    features["avg_qp_local_mv_dir"] = avg_qp_local_mv_dir(frame, local_bins)
    return FrameFeatures(**features)


def metadata_from_trace(
    frames: list[FrameRecord],
    pixel_format: str = ConfigConstants.DEFAULT_PIXEL_FORMAT,
    codec: Codec = Codec.H265,
) -> MetadataFeatures:
    """Metadata features derived from the trace alone, for traces without a bitstream."""
    if not frames:
        raise EmptyInputError("Cannot derive metadata from an empty trace")
    first = frames[0]
    duration = len(frames) / first.frame_rate
    total_bytes = sum(frame.frame_size for frame in frames)
    if total_bytes <= 0:
        raise EmptyInputError("Trace frames carry no coded bytes")
    return MetadataFeatures(
        resolution=first.width * first.height,
        frame_rate=first.frame_rate,
        codec=codec,
        pixel_format=pixel_format,
        bitrate=8 * total_bytes / duration / 1000,
    )
