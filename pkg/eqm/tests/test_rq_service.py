import pytest

from eqm.services.rq_service import BITRATE_COLUMN, find_crossovers, rq_points


def _points(curves: dict[int, list[tuple[float, float]]]):
    video_ids, bitrates, resolutions, scores = [], [], [], []
    for resolution, curve in curves.items():
        for index, (bitrate, score) in enumerate(curve):
            video_ids.append(f"r{resolution}_{index}")
            bitrates.append(bitrate)
            resolutions.append(resolution)
            scores.append(score)
    return rq_points(video_ids, bitrates, resolutions, scores)


def test_points_are_sorted_by_resolution_then_bitrate():
    points = rq_points(["c", "a", "b"], [300.0, 200.0, 100.0], [720, 1080, 720], [60.0, 70.0, 40.0])
    assert list(points["video_id"]) == ["b", "c", "a"]


def test_single_crossing_is_interpolated():
    points = _points({
        360: [(100.0, 50.0), (200.0, 60.0), (300.0, 65.0)],
        720: [(100.0, 40.0), (200.0, 58.0), (300.0, 70.0)],
    })
    crossovers = find_crossovers(points)

    assert len(crossovers) == 1
    assert crossovers.iloc[0]["resolution_a"] == 360
    assert crossovers.iloc[0]["resolution_b"] == 720
    assert crossovers.iloc[0][BITRATE_COLUMN] == pytest.approx(200.0 + 100.0 * 2.0 / 7.0)


def test_crossing_on_a_sample_bitrate_is_reported_once():
    points = _points({
        360: [(100.0, 0.0), (200.0, 10.0), (300.0, 20.0)],
        720: [(100.0, -5.0), (200.0, 10.0), (300.0, 25.0)],
    })
    assert list(find_crossovers(points)[BITRATE_COLUMN]) == [200.0]


def test_disjoint_bitrate_ranges_have_no_crossing():
    points = _points({
        360: [(100.0, 30.0), (200.0, 40.0)],
        720: [(500.0, 10.0), (900.0, 90.0)],
    })
    assert find_crossovers(points).empty
