import io

import numpy as np
import pytest

from eqm.services.hevc_meta_service import probe_metadata
from eqm.services.synth_service import generate_videos, planted_mos, quadtree_layout, write_videos
from eqm.services.trace_service import parse_trace, write_trace
from eqm.services import dataset_io_service


SMALL = ((128, 64), (192, 128))


class TestQuadtreeLayout:
    def test_tiles_the_frame(self) -> None:
        blocks = quadtree_layout(200, 120, np.random.default_rng(0))
        assert sum(size * size for _, _, size in blocks) == 200 * 120
        assert all(x + size <= 200 and y + size <= 120 for x, y, size in blocks)

    def test_rejects_unaligned_dimensions(self) -> None:
        with pytest.raises(ValueError):
            quadtree_layout(100, 64, np.random.default_rng(0))


class TestGenerateVideos:
    def test_same_seed_same_corpus(self) -> None:
        assert generate_videos(3, 4, seed=1, resolutions=SMALL) == generate_videos(3, 4, seed=1, resolutions=SMALL)
        assert generate_videos(2, 4, seed=1, resolutions=SMALL) != generate_videos(2, 4, seed=2, resolutions=SMALL)

    def test_traces_pass_validation(self) -> None:
        for video in generate_videos(4, 7, seed=3, resolutions=SMALL):
            out = io.StringIO()
            write_trace(video.frames, out)
            frames = parse_trace(out.getvalue().splitlines())
            assert [f.poc for f in frames] == list(range(7))
            assert frames[0].frame_type.value == "I"

    def test_stream_matches_trace_bitrate(self) -> None:
        [video] = generate_videos(1, 8, seed=4, resolutions=SMALL)
        meta = probe_metadata(video.stream, frame_count=len(video.frames))

        assert meta.bitrate == pytest.approx(video.bitrate, rel=0.1)
        assert meta.frame_rate == video.frames[0].frame_rate
        assert meta.pixel_format == "yuv420p10le"

    def test_mos_is_on_the_rating_scale(self) -> None:
        videos = generate_videos(10, 3, seed=5, resolutions=SMALL)
        assert all(0.0 <= v.mos <= 100.0 for v in videos)
        assert len({v.video_id for v in videos}) == 10

    def test_invalid_counts(self) -> None:
        with pytest.raises(ValueError):
            generate_videos(0, 5)


def test_planted_mos_falls_with_qp_and_motion():
    assert planted_mos(24.0, 2.0, 1000.0) > planted_mos(36.0, 2.0, 1000.0)
    assert planted_mos(30.0, 1.0, 1000.0) > planted_mos(30.0, 10.0, 1000.0)


def test_write_videos(tmp_path):
    videos = generate_videos(3, 3, seed=6, resolutions=SMALL)
    written = write_videos(videos, tmp_path)

    assert all(path.exists() for path in written)
    assert (tmp_path / "traces" / "synth_0000.jsonl").exists()
    assert (tmp_path / "streams" / "synth_0002.hevc").read_bytes() == videos[2].stream
    mos = dataset_io_service.read_mos(tmp_path / "mos.csv")
    assert list(mos) == ["synth_0000", "synth_0001", "synth_0002"]
    assert mos["synth_0001"] == pytest.approx(videos[1].mos, rel=1e-8)
