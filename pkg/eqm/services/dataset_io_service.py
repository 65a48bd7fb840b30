"""
CSV input/output for feature, MOS, anchor and score tables

All tables are written with LF line endings and a fixed float format so
reruns are byte-identical.
"""
import logging
from pathlib import Path
from typing import Iterable, Optional, Sequence

import pandas as pd

from ..constants import CliConstants, PoolingConstants
from ..core.custom_exceptions import DuplicateVideoIdError, InvalidValueError, MissingColumnsError
from ..schemas.dataset import LabeledDataset, LabeledRow
from ..schemas.features import SegmentFeatures
from ..schemas.fusion import AnchorPair, AnchorSet
from .pooling_service import average_segments


logger = logging.getLogger(__name__)

_ID_COLUMNS = [PoolingConstants.VIDEO_ID_COLUMN, PoolingConstants.SEGMENT_IDX_COLUMN]


def write_table(frame: pd.DataFrame, path: Path) -> Path:
    path = Path(path)
    frame.to_csv(path, index=False, float_format=PoolingConstants.FLOAT_FORMAT, lineterminator="\n")
    return path


def read_table(path: Path, required: Sequence[str] = ()) -> pd.DataFrame:
    frame = pd.read_csv(path, dtype={PoolingConstants.VIDEO_ID_COLUMN: str}, keep_default_na=False)
    missing = [column for column in required if column not in frame.columns]
    if missing:
        raise MissingColumnsError(missing)
    return frame


def _unique_ids(frame: pd.DataFrame, path: Path) -> list[str]:
    ids = [str(v) for v in frame[PoolingConstants.VIDEO_ID_COLUMN]]
    repeated = frame[PoolingConstants.VIDEO_ID_COLUMN].duplicated()
    if repeated.any():
        raise DuplicateVideoIdError(ids[int(repeated.to_numpy().argmax())], where=str(path))
    return ids


def _numeric(frame: pd.DataFrame, column: str, path: Path) -> list[float]:
    """Column as floats; blank, non-numeric and infinite cells are rejected."""
    values = pd.to_numeric(frame[column], errors="coerce").astype(float)
    bad = values.isna() | values.abs().eq(float("inf"))
    if bad.any():
        video_id = str(frame[PoolingConstants.VIDEO_ID_COLUMN].iloc[int(bad.to_numpy().argmax())])
        raise InvalidValueError(str(path), column, video_id)
    return values.tolist()


def features_frame(rows: Iterable[tuple[str, int, SegmentFeatures]], extra: Optional[dict[str, dict]] = None) -> pd.DataFrame:
    """One row per (video_id, segment_idx) with the canonical feature columns."""
    records = []
    for video_id, segment_idx, segment in rows:
        record = {PoolingConstants.VIDEO_ID_COLUMN: video_id, PoolingConstants.SEGMENT_IDX_COLUMN: segment_idx}
        record.update(segment.as_row())
        if extra and video_id in extra:
            record.update(extra[video_id])
        records.append(record)
    columns = _ID_COLUMNS + list(PoolingConstants.FEATURE_COLUMNS)
    frame = pd.DataFrame.from_records(records)
    if frame.empty:
        return pd.DataFrame(columns=columns)
    ordered = columns + [column for column in frame.columns if column not in columns]
    return frame[ordered]


def video_level_features(frame: pd.DataFrame) -> dict[str, dict]:
    """Collapse a feature table to one feature record per video.

    A row with segment_idx -1 is taken as is; otherwise the video's segments
    are averaged. Extra (external) columns are taken from the first row.
    """
    missing = [column for column in _ID_COLUMNS + list(PoolingConstants.FEATURE_COLUMNS) if column not in frame.columns]
    if missing:
        raise MissingColumnsError(missing)
    extra_columns = [c for c in frame.columns if c not in _ID_COLUMNS and c not in PoolingConstants.FEATURE_COLUMNS]

    videos: dict[str, dict] = {}
    for video_id, group in frame.groupby(PoolingConstants.VIDEO_ID_COLUMN, sort=False):
        records = group.to_dict(orient="records")
        averaged = [r for r in records if int(r[PoolingConstants.SEGMENT_IDX_COLUMN]) == PoolingConstants.VIDEO_LEVEL_SEGMENT_IDX]
        if averaged:
            record = averaged[0]
            features = SegmentFeatures.from_row(record).as_row()
        else:
            features = average_segments([SegmentFeatures.from_row(r) for r in records]).as_row()
            record = records[0]
        features.update({column: record[column] for column in extra_columns})
        videos[str(video_id)] = features
    return videos


def read_mos(path: Path) -> dict[str, float]:
    frame = read_table(path, [PoolingConstants.VIDEO_ID_COLUMN, CliConstants.MOS_COLUMN])
    return dict(zip(_unique_ids(frame, path), _numeric(frame, CliConstants.MOS_COLUMN, path)))


def write_mos(mos: dict[str, float], path: Path) -> Path:
    frame = pd.DataFrame({
        PoolingConstants.VIDEO_ID_COLUMN: list(mos),
        CliConstants.MOS_COLUMN: list(mos.values()),
    })
    return write_table(frame, path)


def read_externals(path: Path) -> dict[str, dict]:
    frame = read_table(path, [PoolingConstants.VIDEO_ID_COLUMN])
    ids = _unique_ids(frame, path)
    columns = {c: _numeric(frame, c, path) for c in frame.columns if c != PoolingConstants.VIDEO_ID_COLUMN}
    return {video_id: {c: values[i] for c, values in columns.items()} for i, video_id in enumerate(ids)}


def read_anchors(path: Path) -> AnchorSet:
    frame = read_table(
        path,
        [PoolingConstants.VIDEO_ID_COLUMN, CliConstants.ANCHOR_SOURCE_COLUMN, CliConstants.ANCHOR_TARGET_COLUMN],
    )
    ids = _unique_ids(frame, path)
    sources = _numeric(frame, CliConstants.ANCHOR_SOURCE_COLUMN, path)
    targets = _numeric(frame, CliConstants.ANCHOR_TARGET_COLUMN, path)
    return AnchorSet(pairs=[
        AnchorPair(video_id=video_id, source_mos=source, target_mos=target)
        for video_id, source, target in zip(ids, sources, targets)
    ])


def build_dataset(
    features: dict[str, dict],
    mos: dict[str, float],
    externals: Optional[dict[str, dict]] = None,
) -> LabeledDataset:
    """Join video-level features with MOS (and optional external columns) on video_id."""
    rows = []
    skipped = 0
    for video_id, record in features.items():
        if video_id not in mos:
            skipped += 1
            continue
        merged = dict(record)
        if externals is not None:
            if video_id not in externals:
                raise MissingColumnsError([f"external columns for '{video_id}'"])
            merged.update(externals[video_id])
        rows.append(LabeledRow(video_id=video_id, features=merged, mos=mos[video_id]))
    if skipped:
        logger.warning("%d video(s) have features but no mos and were skipped", skipped)
    return LabeledDataset(rows=rows)


def mos_only_dataset(mos: dict[str, float]) -> LabeledDataset:
    return LabeledDataset(rows=[LabeledRow(video_id=v, features={}, mos=m) for v, m in mos.items()])


def write_scores(video_ids: Sequence[str], scores: Sequence[float], path: Path) -> Path:
    frame = pd.DataFrame({
        PoolingConstants.VIDEO_ID_COLUMN: list(video_ids),
        CliConstants.SCORE_COLUMN: [float(s) for s in scores],
    })
    return write_table(frame, path)


def read_scores(path: Path) -> dict[str, float]:
    frame = read_table(path, [PoolingConstants.VIDEO_ID_COLUMN, CliConstants.SCORE_COLUMN])
    return dict(zip(_unique_ids(frame, path), _numeric(frame, CliConstants.SCORE_COLUMN, path)))


def write_externals(values: dict[str, float], column: str, path: Path) -> Path:
    frame = pd.DataFrame({PoolingConstants.VIDEO_ID_COLUMN: list(values), column: list(values.values())})
    return write_table(frame, path)
