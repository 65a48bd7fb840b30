"""
Subjective dataset fusion service

Maps each source study onto the target MOS scale with an ordinary least
squares line fitted on anchor videos rated in both studies.
"""
import logging
from typing import Sequence

import numpy as np
from scipy import stats

from ..constants import FusionConstants
from ..core.custom_exceptions import DegenerateAnchorsError, DuplicateVideoIdError, TooFewAnchorsError
from ..schemas.dataset import LabeledDataset, LabeledRow
from ..schemas.fusion import AnchorSet, LinearMap


logger = logging.getLogger(__name__)


def fit_linear_anchor_map(anchors: AnchorSet) -> LinearMap:
    """OLS fit of target_mos on source_mos over the anchor pairs."""
    if len(anchors.pairs) < FusionConstants.MIN_ANCHORS:
        raise TooFewAnchorsError(
            f"{len(anchors.pairs)} anchor(s) given, at least {FusionConstants.MIN_ANCHORS} required"
        )
    source = np.array([pair.source_mos for pair in anchors.pairs], dtype=np.float64)
    target = np.array([pair.target_mos for pair in anchors.pairs], dtype=np.float64)
    if np.all(source == source[0]):
        raise DegenerateAnchorsError("All anchor source scores are identical; the gain is undetermined")

    fit = stats.linregress(source, target)
    a, b = float(fit.slope), float(fit.intercept)

    residual_ss = float(np.sum((target - (a * source + b)) ** 2))
    total_ss = float(np.sum((target - target.mean()) ** 2))
    r2 = 1.0 - residual_ss / total_ss if total_ss > 0 else 1.0
    r2 = min(r2, 1.0)

    # two anchors leave no degrees of freedom for the standard errors
    stderr_a = float(fit.stderr) if np.isfinite(fit.stderr) else 0.0
    stderr_b = float(fit.intercept_stderr) if np.isfinite(fit.intercept_stderr) else 0.0
    linear_map = LinearMap(
        a=a,
        b=b,
        r2=r2,
        n_anchors=len(anchors.pairs),
        stderr_a=stderr_a,
        stderr_b=stderr_b,
    )
    if r2 < FusionConstants.LOW_R2_WARNING:
        logger.warning("Anchor fit r2 %.3f is below %.2f; the studies may not map linearly", r2, FusionConstants.LOW_R2_WARNING)
    if not linear_map.is_increasing:
        logger.warning("Anchor fit gain %.4f is not positive; source rank order will not be preserved", a)
    return linear_map


def fuse_datasets(
    target: LabeledDataset,
    sources: Sequence[tuple[LabeledDataset, AnchorSet]],
) -> tuple[LabeledDataset, list[LinearMap]]:
    """Concatenate the target with every source mapped onto the target scale.

    An anchor video already present keeps its existing (target-study) row;
    any other repeated video id is an error.

    Returns:
        The fused dataset and the per-source maps in source order
    """
    rows: list[LabeledRow] = list(target.rows)
    seen = set(target.video_ids)
    maps: list[LinearMap] = []

    for index, (source, anchors) in enumerate(sources):
        linear_map = fit_linear_anchor_map(anchors)
        maps.append(linear_map)
        anchor_ids = anchors.video_ids
        added = 0
        for row in source.rows:
            if row.video_id in seen:
                if row.video_id in anchor_ids:
                    continue
                raise DuplicateVideoIdError(row.video_id)
            mapped = linear_map.apply(row.mos)
            if not FusionConstants.MOS_MIN <= mapped <= FusionConstants.MOS_MAX:
                logger.warning("Fused mos %.3f of '%s' lies outside the target scale", mapped, row.video_id)
            rows.append(row.model_copy(update={"mos": mapped}))
            seen.add(row.video_id)
            added += 1
        logger.info(
            "Source %d mapped with a=%.6g b=%.6g (r2 %.4f, %d anchors); %d row(s) added",
            index, linear_map.a, linear_map.b, linear_map.r2, linear_map.n_anchors, added,
        )

    return LabeledDataset(rows=rows), maps
