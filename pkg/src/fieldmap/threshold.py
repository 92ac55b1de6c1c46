"""
Score thresholding: gradual thresholding, the basins mask, hard
binarization and the argmax baseline.
"""
from __future__ import annotations

from typing import Sequence

import numpy as np

from fieldmap.errors import BadClassIndex, ThresholdOutOfRange
from fieldmap.raster import BinaryMask, ProbabilityRaster

__all__ = ["gradual_threshold", "basins_mask", "argmax_mask", "binarize"]


def _check_threshold(t: float) -> None:
    if not 0.0 <= t <= 1.0:
        raise ThresholdOutOfRange(f"threshold {t} outside [0, 1]")


def gradual_threshold(r: ProbabilityRaster, t: float) -> ProbabilityRaster:
    """Zero every score below ``t``; scores at or above ``t`` are kept unchanged.

    Unlike a hard threshold the surviving pixels keep their confidence, which
    the watershed later uses as depth. Nodata pixels are left untouched.
    The comparison is made at the raster's float32 precision, so a score
    stored from the same decimal as ``t`` counts as equal to it.
    """
    _check_threshold(t)
    v = r.values
    keep = (v >= np.float32(t)) | r.nodata
    return r.with_values(np.where(keep, v, np.float32(0.0)))


def basins_mask(gradual_fields: ProbabilityRaster, gradual_boundaries: ProbabilityRaster) -> ProbabilityRaster:
    """``fields * (1 - boundaries)``, with nodata wherever either input is nodata."""
    gradual_fields.check_grid(gradual_boundaries, "basins_mask")
    nodata = gradual_fields.nodata | gradual_boundaries.nodata
    out = gradual_fields.values * (np.float32(1.0) - gradual_boundaries.values)
    out = np.where(nodata, np.float32(0.0), out)
    return gradual_fields.with_values(out, nodata)


def binarize(r: ProbabilityRaster, t: float) -> BinaryMask:
    """Hard threshold, inclusive: true where ``value >= t``. Nodata pixels are false and invalid."""
    _check_threshold(t)
    bits = (r.values >= np.float32(t)) & ~r.nodata
    return BinaryMask(bits, r.geotransform, r.crs, ~r.nodata)


def argmax_mask(class_scores: Sequence[ProbabilityRaster], target_class: int) -> BinaryMask:
    """True where ``target_class`` holds the strictly largest score.

    Ties go to the lowest class index, so a tie never selects a target that
    has a lower-indexed competitor at the same score.
    """
    if len(class_scores) < 2:
        raise BadClassIndex(f"argmax needs at least 2 classes, got {len(class_scores)}")
    if not 0 <= target_class < len(class_scores):
        raise BadClassIndex(f"target_class {target_class} not in [0, {len(class_scores)})")
    first = class_scores[0]
    for i, r in enumerate(class_scores[1:], start=1):
        first.check_grid(r, f"argmax_mask class {i}")
    stack = np.stack([r.values for r in class_scores])
    nodata = np.logical_or.reduce([r.nodata for r in class_scores])
    # np.argmax returns the first maximum, which is the lowest-index tie rule.
    bits = (np.argmax(stack, axis=0) == target_class) & ~nodata
    return BinaryMask(bits, first.geotransform, first.crs, ~nodata)
