"""
End-to-end delineation and crop labelling.

``delineate`` runs gradual thresholding of both score maps, builds the
basins mask, seeds and floods the watershed, drops small parcels and
vectorizes the result. ``run_pipeline`` adds the crop branch: a binary crop
mask fused onto the delineated fields. ``argmax_delineate`` is the
hard-decision baseline used for comparisons.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from fieldmap.config import PipelineConfig
from fieldmap.errors import FieldmapError
from fieldmap.fusion import FusionReport, annotate, fuse, wheat_field_mask
from fieldmap.raster import BinaryMask, LabelRaster, ProbabilityRaster
from fieldmap.threshold import argmax_mask, basins_mask, binarize, gradual_threshold
from fieldmap.vectorize import FieldPolygon, polygonize, simplify_rdp
from fieldmap.watershed import connected_components, extract_seeds, filter_small_labels, watershed

__all__ = [
    "StageError",
    "Delineation",
    "PipelineResult",
    "delineate",
    "argmax_delineate",
    "run_pipeline",
    "vectorize_labels",
    "background_scores",
]

WHEAT_SCORE_THRESHOLD = 0.5


class StageError(FieldmapError):
    """A pipeline failure tagged with the stage that raised it."""

    def __init__(self, stage: str, error: Exception):
        self.stage = stage
        self.error = error
        super().__init__(f"stage {stage!r} failed: {type(error).__name__}: {error}")


class _Timer:
    def __init__(self):
        self.timings: dict[str, float] = {}

    def run(self, stage: str, fn, *args, **kwargs):
        t0 = time.perf_counter()
        try:
            out = fn(*args, **kwargs)
        except FieldmapError as e:
            if isinstance(e, StageError):
                raise
            raise StageError(stage, e) from e
        self.timings[stage] = self.timings.get(stage, 0.0) + time.perf_counter() - t0
        return out


@dataclass
class Delineation:
    labels: LabelRaster
    polygons: list[FieldPolygon]
    seed_count: int
    timings: dict = field(default_factory=dict)


@dataclass
class PipelineResult:
    delineation: Delineation
    wheat_mask: BinaryMask
    report: FusionReport
    polygons: list[FieldPolygon]
    timings: dict = field(default_factory=dict)

    @property
    def labels(self) -> LabelRaster:
        return self.delineation.labels

    def predicted_wheat(self) -> BinaryMask:
        """Pixels of every field labelled wheat."""
        return wheat_field_mask(self.labels, self.report)


def vectorize_labels(labels: LabelRaster, epsilon: float) -> list[FieldPolygon]:
    return [simplify_rdp(p, epsilon) for p in polygonize(labels)]


def delineate(field_scores: ProbabilityRaster, boundary_scores: ProbabilityRaster,
              config: PipelineConfig = PipelineConfig(), vectorize: bool = True) -> Delineation:
    timer = _Timer()
    timer.run("check_inputs", field_scores.check_grid, boundary_scores, "field vs boundary scores")
    g_fields = timer.run("gradual_threshold_field", gradual_threshold, field_scores, config.t_field)
    g_bounds = timer.run("gradual_threshold_boundary", gradual_threshold, boundary_scores, config.t_boundary)
    basins = timer.run("basins_mask", basins_mask, g_fields, g_bounds)
    seeds = timer.run("extract_seeds", extract_seeds, basins, config.connectivity)
    flood = BinaryMask(g_fields.values > 0, g_fields.geotransform, g_fields.crs, ~g_fields.nodata)
    labels = timer.run("watershed", watershed, g_fields, seeds, flood, config.connectivity)
    labels = timer.run("filter_small_labels", filter_small_labels, labels, config.min_field_area)
    polygons = timer.run("vectorize", vectorize_labels, labels, config.rdp_epsilon) if vectorize else []
    return Delineation(labels, polygons, seeds.seed_count, timer.timings)


def background_scores(field_scores: ProbabilityRaster, boundary_scores: ProbabilityRaster) -> ProbabilityRaster:
    """Implicit third class for the argmax baseline: ``clip(1 - field - boundary, 0, 1)``."""
    bg = np.clip(np.float32(1.0) - field_scores.values - boundary_scores.values, 0.0, 1.0)
    return field_scores.with_values(bg, field_scores.nodata | boundary_scores.nodata)


def argmax_delineate(field_scores: ProbabilityRaster, boundary_scores: ProbabilityRaster,
                     config: PipelineConfig = PipelineConfig(), vectorize: bool = True) -> Delineation:
    """Baseline: connected components of the pixels where field is the argmax class.

    Classes are (background, field, boundary) with background derived by
    :func:`background_scores`.
    """
    timer = _Timer()
    timer.run("check_inputs", field_scores.check_grid, boundary_scores, "field vs boundary scores")
    classes = [background_scores(field_scores, boundary_scores), field_scores, boundary_scores]
    mask = timer.run("argmax_mask", argmax_mask, classes, 1)
    labels = timer.run("connected_components", connected_components, mask, config.connectivity)
    seed_count = labels.label_count
    labels = timer.run("filter_small_labels", filter_small_labels, labels, config.min_field_area)
    polygons = timer.run("vectorize", vectorize_labels, labels, config.rdp_epsilon) if vectorize else []
    return Delineation(labels, polygons, seed_count, timer.timings)


def run_pipeline(field_scores: ProbabilityRaster, boundary_scores: ProbabilityRaster,
                 wheat: ProbabilityRaster | BinaryMask, config: PipelineConfig = PipelineConfig(),
                 method: str = "gradual", vectorize: bool = True) -> PipelineResult:
    """Delineate fields and label each as wheat by the overlap rule.

    ``wheat`` is either a score raster, binarized at 0.5, or a ready mask.
    """
    if method == "gradual":
        d = delineate(field_scores, boundary_scores, config, vectorize)
    elif method == "argmax":
        d = argmax_delineate(field_scores, boundary_scores, config, vectorize)
    else:
        raise ValueError(f"unknown method {method!r}")
    timer = _Timer()
    timer.timings.update(d.timings)
    if isinstance(wheat, ProbabilityRaster):
        wheat_mask = timer.run("binarize_wheat", binarize, wheat, WHEAT_SCORE_THRESHOLD)
    else:
        wheat_mask = wheat
    report = timer.run("fuse", fuse, d.labels, wheat_mask, config.wheat_overlap_threshold)
    polygons = timer.run("annotate", annotate, d.polygons, report)
    return PipelineResult(d, wheat_mask, report, polygons, timer.timings)
