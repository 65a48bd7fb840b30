import pytest

from eqm.constants import PoolingConstants
from eqm.core.custom_exceptions import DuplicateVideoIdError, InvalidValueError, MissingColumnsError
from eqm.schemas.features import SegmentFeatures
from eqm.schemas.hevc import MetadataFeatures
from eqm.services import dataset_io_service


META = MetadataFeatures(resolution=640 * 360, frame_rate=30.0, pixel_format="yuv420p", bitrate=800.0)


def _segment(scale: float, frames: int = 10) -> SegmentFeatures:
    return SegmentFeatures(
        values={key: scale * (i + 1) for i, key in enumerate(PoolingConstants.EQM_KEYS)},
        metadata=META,
        frame_count=frames,
    )


def test_feature_table_round_trip(tmp_path):
    rows = [("clip_a", 0, _segment(1.0)), ("clip_a", 1, _segment(3.0, frames=5)), ("clip_b", -1, _segment(2.0))]
    path = dataset_io_service.write_table(dataset_io_service.features_frame(rows), tmp_path / "features.csv")

    text = path.read_text(encoding="utf-8")
    assert text.splitlines()[0].startswith("video_id,segment_idx,mean_framesize")
    assert "\r" not in text

    videos = dataset_io_service.video_level_features(dataset_io_service.read_table(path))
    assert list(videos) == ["clip_a", "clip_b"]
    # segments of clip_a are averaged, clip_b already holds its video-level row
    assert videos["clip_a"]["mean_framesize"] == pytest.approx(2.0)
    assert videos["clip_a"][PoolingConstants.FRAME_COUNT_KEY] == 15
    assert videos["clip_b"]["mean_framesize"] == pytest.approx(2.0)
    assert videos["clip_b"]["PixelFormat"] == "yuv420p"


def test_rewriting_is_byte_identical(tmp_path):
    frame = dataset_io_service.features_frame([("x", -1, _segment(1.0 / 3.0))])
    first = dataset_io_service.write_table(frame, tmp_path / "a.csv").read_bytes()
    second = dataset_io_service.write_table(frame, tmp_path / "b.csv").read_bytes()
    assert first == second


def test_numeric_looking_video_ids_stay_strings(tmp_path):
    path = dataset_io_service.write_mos({"007": 40.0, "1e3": 55.5}, tmp_path / "mos.csv")
    assert dataset_io_service.read_mos(path) == {"007": 40.0, "1e3": 55.5}


def test_missing_columns_are_reported(tmp_path):
    path = tmp_path / "scores.csv"
    path.write_text("video_id,value\na,1\n", encoding="utf-8")
    with pytest.raises(MissingColumnsError) as excinfo:
        dataset_io_service.read_scores(path)
    assert excinfo.value.missing == ["score"]


def test_build_dataset_joins_on_video_id():
    features = {"a": {"f": 1.0}, "b": {"f": 2.0}, "c": {"f": 3.0}}
    dataset = dataset_io_service.build_dataset(features, {"a": 10.0, "c": 30.0}, {"a": {"px": 0.5}, "c": {"px": 0.7}})

    assert dataset.video_ids == ["a", "c"]
    assert dataset.rows[1].features == {"f": 3.0, "px": 0.7}
    assert list(dataset.mos_vector()) == [10.0, 30.0]


def test_build_dataset_requires_externals_for_every_row():
    with pytest.raises(MissingColumnsError):
        dataset_io_service.build_dataset({"a": {"f": 1.0}}, {"a": 1.0}, {"b": {"px": 0.1}})


def test_read_anchors(tmp_path):
    path = tmp_path / "anchors.csv"
    path.write_text("video_id,source_mos,target_mos\nv1,20,30\nv2,60,70\n", encoding="utf-8")
    anchors = dataset_io_service.read_anchors(path)
    assert anchors.video_ids == {"v1", "v2"}
    assert anchors.pairs[1].target_mos == 70.0


class TestCellChecks:
    def test_repeated_score_id(self, tmp_path) -> None:
        path = tmp_path / "scores.csv"
        path.write_text("video_id,score\na,1\nb,2\nb,3\n", encoding="utf-8")
        with pytest.raises(DuplicateVideoIdError) as excinfo:
            dataset_io_service.read_scores(path)
        assert excinfo.value.video_id == "b"
        assert excinfo.value.where == str(path)

    @pytest.mark.parametrize("cell", ["", "n/a", "inf"])
    def test_unusable_external_cell(self, tmp_path, cell) -> None:
        path = tmp_path / "externals.csv"
        path.write_text(f"video_id,px,vmaf\na,0.5,80\nb,0.7,{cell}\n", encoding="utf-8")
        with pytest.raises(InvalidValueError) as excinfo:
            dataset_io_service.read_externals(path)
        assert (excinfo.value.column, excinfo.value.video_id) == ("vmaf", "b")
        assert excinfo.value.error_code == "dataset.InvalidValue"

    def test_externals_keep_column_order(self, tmp_path) -> None:
        path = tmp_path / "externals.csv"
        path.write_text("video_id,px,vmaf\na,0.5,80\nb,0.7,91.5\n", encoding="utf-8")
        assert dataset_io_service.read_externals(path) == {
            "a": {"px": 0.5, "vmaf": 80.0},
            "b": {"px": 0.7, "vmaf": 91.5},
        }

    def test_blank_mos(self, tmp_path) -> None:
        path = tmp_path / "mos.csv"
        path.write_text("video_id,mos\na,40\nb,\n", encoding="utf-8")
        with pytest.raises(InvalidValueError):
            dataset_io_service.read_mos(path)
