"""
Temporal pooling service

Frame features -> segment vector -> video vector. Every statistic is
order-free, so frames and segments may arrive in any order.
"""
import logging
import math
from typing import Optional, Sequence

import numpy as np
from scipy import stats

from ..constants import PoolingConstants
from ..core.custom_exceptions import EmptyInputError, SchemaMismatchError
from ..schemas.features import FrameFeatures, SegmentFeatures
from ..schemas.hevc import MetadataFeatures


logger = logging.getLogger(__name__)


def pool_statistic(values: Sequence[float], kind: str) -> float:
    """Reduce a nonempty sample with one of the pooling statistics.

    std and kurtosis are population moments; kurtosis is excess kurtosis and
    is 0 for a constant sample. iqr uses linear-interpolation quartiles.
    """
    if kind not in PoolingConstants.VALID_STATS:
        raise ValueError(f"Unknown pooling statistic '{kind}'")
    sample = np.asarray(values, dtype=np.float64)
    if sample.size == 0:
        raise EmptyInputError(f"Cannot pool an empty sample with '{kind}'")

    if kind == PoolingConstants.STAT_MEAN:
        # clamp float drift so the mean never leaves [min, max]
        return float(np.clip(sample.mean(), sample.min(), sample.max()))
    if kind == PoolingConstants.STAT_STD:
        return float(sample.std(ddof=0))
    if kind == PoolingConstants.STAT_MIN:
        return float(sample.min())
    if kind == PoolingConstants.STAT_MAX:
        return float(sample.max())
    if kind == PoolingConstants.STAT_MEDIAN:
        return float(np.median(sample))
    if kind == PoolingConstants.STAT_IQR:
        return float(stats.iqr(sample, interpolation="linear"))

    if np.all(sample == sample[0]):
        return 0.0
    return float(stats.kurtosis(sample, fisher=True, bias=True))


def pool_segment(frames: Sequence[FrameFeatures], meta: MetadataFeatures) -> SegmentFeatures:
    """Pool per-frame features into the canonical segment vector.

    A feature is pooled over the frames where it is present; a feature absent
    from every frame (e.g. motion in an all-intra segment) pools to 0.
    """
    if not frames:
        raise EmptyInputError("Cannot pool an empty segment")

    values: dict[str, float] = {}
    for attribute, label, statistics in PoolingConstants.POOLING_PLAN:
        present = [getattr(frame, attribute) for frame in frames if getattr(frame, attribute) is not None]
        if not present:
            logger.warning("Feature %s absent from all %d frames; pooled as 0", label, len(frames))
        for statistic in statistics:
            key = f"{statistic}_{label}"
            values[key] = pool_statistic(present, statistic) if present else 0.0

    return SegmentFeatures(values=values, metadata=meta, frame_count=len(frames))


def average_segments(segments: Sequence[SegmentFeatures]) -> SegmentFeatures:
    """Per-key arithmetic mean of segment vectors; frame counts are summed."""
    if not segments:
        raise EmptyInputError("Cannot average an empty segment list")

    first = segments[0]
    for index, segment in enumerate(segments[1:], start=1):
        if segment.metadata != first.metadata:
            raise SchemaMismatchError(f"Segment {index} metadata differs from segment 0")
        if list(segment.values) != list(first.values):
            raise SchemaMismatchError(f"Segment {index} key set differs from segment 0")

    # fsum is exactly rounded, so the mean does not depend on segment order
    values = {
        key: math.fsum(segment.values[key] for segment in segments) / len(segments)
        for key in PoolingConstants.EQM_KEYS
    }
    return SegmentFeatures(
        values=values,
        metadata=first.metadata,
        frame_count=sum(segment.frame_count for segment in segments),
    )


def split_segments(items: Sequence, segment_frames: Optional[int]) -> list[list]:
    """Fixed-length segmentation in decode order; the last segment may be shorter."""
    if segment_frames is None:
        return [list(items)] if items else []
    if segment_frames <= 0:
        raise ValueError("segment_frames must be positive")
    return [list(items[start:start + segment_frames]) for start in range(0, len(items), segment_frames)]
