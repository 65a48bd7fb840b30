"""
Rate-quality curve data

Emits (bitrate, resolution, score) points per scored variant and the
bitrates at which the curves of two resolutions cross.
"""
import logging
from itertools import combinations
from typing import Sequence

import numpy as np
import pandas as pd

from ..constants import CliConstants, PoolingConstants


logger = logging.getLogger(__name__)

BITRATE_COLUMN = "bitrate"
RESOLUTION_COLUMN = "resolution"
LOWER_RESOLUTION_COLUMN = "resolution_a"
HIGHER_RESOLUTION_COLUMN = "resolution_b"


def rq_points(
    video_ids: Sequence[str],
    bitrates: Sequence[float],
    resolutions: Sequence[int],
    scores: Sequence[float],
) -> pd.DataFrame:
    """One row per variant, sorted by resolution then bitrate."""
    frame = pd.DataFrame({
        PoolingConstants.VIDEO_ID_COLUMN: list(video_ids),
        BITRATE_COLUMN: np.asarray(bitrates, dtype=np.float64),
        RESOLUTION_COLUMN: np.asarray(resolutions, dtype=np.int64),
        CliConstants.SCORE_COLUMN: np.asarray(scores, dtype=np.float64),
    })
    return frame.sort_values(
        [RESOLUTION_COLUMN, BITRATE_COLUMN, PoolingConstants.VIDEO_ID_COLUMN], kind="mergesort"
    ).reset_index(drop=True)


def _curve(points: pd.DataFrame, resolution: int) -> tuple[np.ndarray, np.ndarray]:
    """Bitrate-sorted curve of one resolution; repeated bitrates are averaged."""
    subset = points[points[RESOLUTION_COLUMN] == resolution]
    grouped = subset.groupby(BITRATE_COLUMN, sort=True)[CliConstants.SCORE_COLUMN].mean()
    return grouped.index.to_numpy(dtype=np.float64), grouped.to_numpy(dtype=np.float64)


def find_crossovers(points: pd.DataFrame) -> pd.DataFrame:
    """Bitrates where two resolutions' linearly interpolated curves intersect.

    Only the overlap of both bitrate ranges is searched; a crossing on a
    shared sample bitrate is reported once.
    """
    resolutions = sorted(int(r) for r in points[RESOLUTION_COLUMN].unique())
    rows = []
    for low, high in combinations(resolutions, 2):
        x_low, y_low = _curve(points, low)
        x_high, y_high = _curve(points, high)
        if x_low.size < 2 or x_high.size < 2:
            continue
        start, stop = max(x_low[0], x_high[0]), min(x_low[-1], x_high[-1])
        if start >= stop:
            continue
        grid = np.union1d(x_low, x_high)
        grid = grid[(grid >= start) & (grid <= stop)]
        diff = np.interp(grid, x_high, y_high) - np.interp(grid, x_low, y_low)

        found: list[float] = []
        for i in range(grid.size - 1):
            d0, d1 = diff[i], diff[i + 1]
            if d0 == 0.0:
                crossing = grid[i]
            elif d0 * d1 < 0:
                crossing = grid[i] + (grid[i + 1] - grid[i]) * d0 / (d0 - d1)
            else:
                continue
            if not found or crossing != found[-1]:
                found.append(float(crossing))
        if diff[-1] == 0.0 and (not found or grid[-1] != found[-1]):
            found.append(float(grid[-1]))
        rows.extend(
            {LOWER_RESOLUTION_COLUMN: low, HIGHER_RESOLUTION_COLUMN: high, BITRATE_COLUMN: bitrate}
            for bitrate in found
        )

    logger.info("Found %d R-Q crossover(s) across %d resolutions", len(rows), len(resolutions))
    return pd.DataFrame(rows, columns=[LOWER_RESOLUTION_COLUMN, HIGHER_RESOLUTION_COLUMN, BITRATE_COLUMN])
