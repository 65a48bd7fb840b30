import itertools
import logging
import math
import statistics

import pytest

from eqm.constants import PoolingConstants
from eqm.core.custom_exceptions import EmptyInputError, SchemaMismatchError
from eqm.schemas.features import FrameFeatures
from eqm.schemas.hevc import MetadataFeatures
from eqm.schemas.trace import FrameType
from eqm.services.frame_feature_service import extract_frame_features
from eqm.services.pooling_service import average_segments, pool_segment, pool_statistic, split_segments


META = MetadataFeatures(resolution=1920 * 1080, frame_rate=30.0, pixel_format="yuv420p", bitrate=2500.0)


def _features(frame_type=FrameType.P, size=1000, qp=30.0, motion=None, skip=0.0) -> FrameFeatures:
    inter = frame_type != FrameType.I
    return FrameFeatures(
        frame_type=frame_type,
        frame_size=size,
        min_qp=qp - 2,
        max_qp=qp + 2,
        avg_qp=qp,
        avg_block_depth=4.0,
        skip_ratio=skip if inter else None,
        avg_motion=motion if inter else None,
        stddev_motion=0.5 if inter and motion is not None else None,
        avg_qp_lm=qp + 1 if inter else None,
        avg_qp_local_mv_dir=None,
    )


class TestPoolStatistic:
    @pytest.mark.parametrize(
        "kind, expected",
        [
            ("mean", 2.5),
            ("std", math.sqrt(1.25)),
            ("min", 1.0),
            ("max", 4.0),
            ("median", 2.5),
            ("iqr", 1.5),
            ("kurtosis", 2.5625 / 1.5625 - 3.0),
        ],
    )
    def test_statistics(self, kind, expected) -> None:
        assert pool_statistic([3.0, 1.0, 4.0, 2.0], kind) == pytest.approx(expected)

    def test_constant_sample_has_zero_kurtosis(self) -> None:
        assert pool_statistic([7.0, 7.0, 7.0], "kurtosis") == 0.0
        assert pool_statistic([7.0], "std") == 0.0

    def test_mean_stays_within_range(self) -> None:
        values = [0.1] * 10
        assert pool_statistic(values, "mean") <= max(values)

    def test_empty_sample(self) -> None:
        with pytest.raises(EmptyInputError):
            pool_statistic([], "mean")

    def test_unknown_statistic(self) -> None:
        with pytest.raises(ValueError):
            pool_statistic([1.0], "mode")


class TestPoolSegment:
    def test_canonical_keys_and_values(self) -> None:
        frames = [
            _features(FrameType.I, size=5000, qp=26.0),
            _features(size=1000, qp=30.0, motion=2.0, skip=0.2),
            _features(size=600, qp=34.0, motion=4.0, skip=0.6),
        ]
        segment = pool_segment(frames, META)

        assert list(segment.values) == list(PoolingConstants.EQM_KEYS)
        assert len(segment.values) == 22
        assert segment.frame_count == 3
        assert segment.values["mean_framesize"] == pytest.approx(2200.0)
        assert segment.values["max_framesize"] == 5000.0
        assert segment.values["mean_avgQP"] == pytest.approx(30.0)
        # intra frames carry no skip or motion values
        assert segment.values["median_skipBlksRatio"] == pytest.approx(0.4)
        assert segment.values["mean_avgMotion"] == pytest.approx(3.0)
        assert segment.values["std_avgQpLm"] == pytest.approx(2.0)

    def test_absent_feature_pools_to_zero(self) -> None:
        segment = pool_segment([_features(FrameType.I), _features(FrameType.I, qp=28.0)], META)
        assert segment.values["mean_avgMotion"] == 0.0
        assert segment.values["mean_avgQpLocalMvDir"] == 0.0
        assert segment.values["max_avgQpLocalMvDir"] == 0.0

    def test_absent_feature_is_logged_as_warning(self, caplog) -> None:
        with caplog.at_level(logging.WARNING, logger="eqm.services.pooling_service"):
            pool_segment([_features(FrameType.I)], META)
        absent = [r for r in caplog.records if "absent from all 1 frames" in r.getMessage()]
        assert absent
        assert {r.levelno for r in absent} == {logging.WARNING}
        assert any("avgMotion" in r.getMessage() for r in absent)

    def test_frame_order_does_not_matter(self) -> None:
        frames = [_features(size=s, qp=q, motion=m) for s, q, m in [(900, 31, 1.0), (300, 35, 3.0), (600, 27, 0.5)]]
        pooled = [pool_segment(list(order), META).values for order in itertools.permutations(frames)]
        assert all(values == pooled[0] for values in pooled)

    def test_empty_segment(self) -> None:
        with pytest.raises(EmptyInputError):
            pool_segment([], META)

    def test_row_has_all_feature_columns(self) -> None:
        row = pool_segment([_features(motion=1.0)], META).as_row()
        assert list(row) == list(PoolingConstants.FEATURE_COLUMNS)
        assert row["Resolution"] == 1920 * 1080
        assert row["Codec"] == "h265"


class TestAverageSegments:
    def test_mean_and_frame_count(self) -> None:
        first = pool_segment([_features(size=1000, motion=1.0)] * 2, META)
        second = pool_segment([_features(size=3000, motion=3.0)], META)
        averaged = average_segments([first, second])

        assert averaged.frame_count == 3
        assert averaged.values["mean_framesize"] == pytest.approx(2000.0)
        assert averaged.values["mean_avgMotion"] == pytest.approx(2.0)
        assert averaged.metadata == META

    def test_segment_order_does_not_matter(self) -> None:
        segments = [pool_segment([_features(size=s, qp=q, motion=0.1 * s)], META) for s, q in [(1, 20), (7, 33), (13, 41)]]
        results = [average_segments(list(order)).values for order in itertools.permutations(segments)]
        assert all(values == results[0] for values in results)

    def test_metadata_mismatch(self) -> None:
        other = META.model_copy(update={"bitrate": 900.0})
        with pytest.raises(SchemaMismatchError):
            average_segments([pool_segment([_features()], META), pool_segment([_features()], other)])

    def test_empty_list(self) -> None:
        with pytest.raises(EmptyInputError):
            average_segments([])


def test_split_segments():
    assert split_segments(list(range(7)), 3) == [[0, 1, 2], [3, 4, 5], [6]]
    assert split_segments(list(range(4)), None) == [[0, 1, 2, 3]]
    assert split_segments([], None) == []
    with pytest.raises(ValueError):
        split_segments([1], 0)


# ── Reference pooling ──────────────────────────────────────────────────────────

def _reference_statistic(sample: list[float], kind: str) -> float:
    if kind == "mean":
        return statistics.fmean(sample)
    if kind == "std":
        return statistics.pstdev(sample)
    if kind == "min":
        return min(sample)
    if kind == "max":
        return max(sample)
    if kind == "median":
        return statistics.median(sample)
    if kind == "iqr":
        if len(sample) == 1:
            return 0.0
        lower, _, upper = statistics.quantiles(sample, n=4, method="inclusive")
        return upper - lower
    mean = statistics.fmean(sample)
    m2 = statistics.fmean((x - mean) ** 2 for x in sample)
    m4 = statistics.fmean((x - mean) ** 4 for x in sample)
    return 0.0 if m2 == 0 else m4 / m2 ** 2 - 3.0


def _reference_pool(frames: list[FrameFeatures]) -> dict[str, float]:
    pooled = {}
    plan = {
        "framesize": ("frame_size", ("mean", "std", "kurtosis", "min", "max")),
        "minQP": ("min_qp", ("iqr",)),
        "maxQP": ("max_qp", ("std",)),
        "avgQP": ("avg_qp", ("mean", "std", "kurtosis", "min", "max")),
        "avgBlockDepth": ("avg_block_depth", ("median", "kurtosis")),
        "skipBlksRatio": ("skip_ratio", ("median", "kurtosis")),
        "stdDevMotion": ("stddev_motion", ("mean",)),
        "avgMotion": ("avg_motion", ("mean", "kurtosis")),
        "avgQpLm": ("avg_qp_lm", ("std",)),
        "avgQpLocalMvDir": ("avg_qp_local_mv_dir", ("mean", "max")),
    }
    for label, (attribute, kinds) in plan.items():
        sample = [float(getattr(f, attribute)) for f in frames if getattr(f, attribute) is not None]
        for kind in kinds:
            pooled[f"{kind}_{label}"] = _reference_statistic(sample, kind) if sample else 0.0
    return pooled


def test_synthetic_segments_match_reference_pooling(synthetic_videos, norm_config):
    for video in synthetic_videos[:6]:
        features = [extract_frame_features(f, norm_config) for f in video.frames]
        for start, stop in ((0, len(features)), (0, 1), (1, 4), (2, len(features))):
            window = features[start:stop]
            pooled = pool_segment(window, META).values
            reference = _reference_pool(window)

            assert set(pooled) == set(reference)
            for key, expected in reference.items():
                assert pooled[key] == pytest.approx(expected, rel=1e-7, abs=1e-7), key


def test_reference_kurtosis_of_a_known_sample():
    sample = [1.0, 2.0, 3.0, 4.0, 10.0]
    assert pool_statistic(sample, "kurtosis") == pytest.approx(_reference_statistic(sample, "kurtosis"))
    assert pool_statistic(sample, "iqr") == pytest.approx(_reference_statistic(sample, "iqr")) == pytest.approx(2.0)
