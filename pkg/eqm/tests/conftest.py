import pytest

from eqm.constants import SynthConstants
from eqm.schemas.dataset import LabeledDataset, LabeledRow
from eqm.schemas.forest import ForestParams
from eqm.schemas.trace import BlockRecord, FrameRecord, FrameType, MotionVector, NormConfig
from eqm.services.extraction_service import extract_segments
from eqm.services.hevc_meta_service import probe_metadata
from eqm.services.synth_service import generate_videos


# Small frames keep the synthetic corpus fast while leaving room for motion
TEST_RESOLUTIONS = ((320, 192), (640, 384))


def mv(dx: int, dy: int, ref_poc: int = 0, ref_list: int = 0) -> MotionVector:
    return MotionVector(ref_list=ref_list, ref_poc=ref_poc, mv_x=dx, mv_y=dy)


def block(x, y, w, h, qp=30, cu=None, skip=False, mvs=()) -> BlockRecord:
    return BlockRecord(x=x, y=y, w=w, h=h, qp=qp, cu_size=cu or min(w, h, 64), skip=skip, mvs=tuple(mvs))


def frame(blocks, poc=1, frame_type=FrameType.P, size=1000, width=64, height=64, fps=60.0) -> FrameRecord:
    return FrameRecord(
        poc=poc,
        frame_type=frame_type,
        frame_size=size,
        width=width,
        height=height,
        frame_rate=fps,
        blocks=tuple(blocks),
    )


def labeled_dataset(videos, with_proxy: bool = False) -> LabeledDataset:
    rows = []
    for video in videos:
        meta = probe_metadata(video.stream, frame_count=len(video.frames))
        [(_, segment)] = extract_segments(video.frames, meta, NormConfig(), average=True)
        features = segment.as_row()
        if with_proxy:
            features[SynthConstants.PIXEL_PROXY_COLUMN] = video.pixel_proxy
        rows.append(LabeledRow(video_id=video.video_id, features=features, mos=video.mos))
    return LabeledDataset(rows=rows)


@pytest.fixture
def norm_config():
    return NormConfig()


@pytest.fixture
def small_forest_params():
    return ForestParams(n_trees=40, min_samples_leaf=2, seed=11)


@pytest.fixture(scope="session")
def synthetic_videos():
    return generate_videos(n_videos=40, n_frames=8, seed=7, resolutions=TEST_RESOLUTIONS)


@pytest.fixture(scope="session")
def holdout_videos():
    return generate_videos(n_videos=30, n_frames=8, seed=1234, resolutions=TEST_RESOLUTIONS)


@pytest.fixture(scope="session")
def training_dataset(synthetic_videos):
    return labeled_dataset(synthetic_videos, with_proxy=True)


@pytest.fixture(scope="session")
def holdout_dataset(holdout_videos):
    return labeled_dataset(holdout_videos, with_proxy=True)


@pytest.fixture(scope="session")
def cv_dataset():
    """Larger corpus for comparisons between model levels."""
    return labeled_dataset(generate_videos(n_videos=120, n_frames=8, seed=2024, resolutions=TEST_RESOLUTIONS), with_proxy=True)
