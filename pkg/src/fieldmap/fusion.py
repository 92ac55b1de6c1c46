"""Crop labelling of delineated fields by pixel overlap with a crop mask."""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from fieldmap.errors import IoFailure, UnknownLabel
from fieldmap.raster import BinaryMask, LabelRaster

__all__ = ["FusionReport", "fuse", "annotate", "wheat_field_mask", "write_report_csv", "read_report_csv"]


@dataclass(frozen=True, eq=False)
class FusionReport:
    """Per-label overlap counts, one entry per label present in the raster (ascending)."""

    label: np.ndarray
    pixel_count: np.ndarray
    wheat_pixel_count: np.ndarray
    threshold: float

    @property
    def wheat_fraction(self) -> np.ndarray:
        return self.wheat_pixel_count / self.pixel_count

    @property
    def is_wheat(self) -> np.ndarray:
        return self.wheat_fraction > self.threshold

    def __len__(self) -> int:
        return int(self.label.size)

    def entry(self, label: int) -> dict:
        idx = np.searchsorted(self.label, label)
        if idx >= self.label.size or self.label[idx] != label:
            raise UnknownLabel(f"label {label} not in fusion report")
        return {
            "label": int(self.label[idx]),
            "pixel_count": int(self.pixel_count[idx]),
            "wheat_pixel_count": int(self.wheat_pixel_count[idx]),
            "wheat_fraction": float(self.wheat_fraction[idx]),
            "is_wheat": bool(self.is_wheat[idx]),
        }

    def wheat_labels(self) -> np.ndarray:
        return self.label[self.is_wheat]


def fuse(labels: LabelRaster, wheat_mask: BinaryMask, threshold: float = 0.5) -> FusionReport:
    """Count wheat pixels under each label.

    A field is wheat when strictly more than ``threshold`` of its pixels are
    wheat. Counting happens on the raster, never on simplified geometry;
    invalid (nodata) wheat pixels count as non-wheat.
    """
    labels.check_grid(wheat_mask, "fuse")
    if not 0.0 < threshold < 1.0:
        raise ValueError(f"threshold must lie in (0, 1), got {threshold}")
    lab = labels.labels.ravel()
    counts = np.bincount(lab)
    wheat = np.bincount(lab, weights=wheat_mask.bits.ravel().astype(np.float64), minlength=counts.size)
    present = np.flatnonzero(counts)
    present = present[present > 0]
    return FusionReport(
        label=present.astype(np.int64),
        pixel_count=counts[present].astype(np.int64),
        wheat_pixel_count=np.rint(wheat[present]).astype(np.int64),
        threshold=float(threshold),
    )


def annotate(polygons, report: FusionReport) -> list:
    """Attach ``wheat_fraction`` and ``is_wheat`` to each polygon; geometry is unchanged."""
    out = []
    for poly in polygons:
        e = report.entry(poly.id)
        out.append(poly.with_properties(wheat_fraction=e["wheat_fraction"], is_wheat=e["is_wheat"]))
    return out


def wheat_field_mask(labels: LabelRaster, report: FusionReport) -> BinaryMask:
    """Pixels belonging to fields the report marks as wheat."""
    bits = np.isin(labels.labels, report.wheat_labels())
    return BinaryMask(bits, labels.geotransform, labels.crs)


_COLUMNS = ["label", "pixel_count", "wheat_pixel_count", "wheat_fraction", "is_wheat"]


def write_report_csv(report: FusionReport, path) -> None:
    try:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(_COLUMNS)
            for lab, n, nw, frac, flag in zip(report.label, report.pixel_count, report.wheat_pixel_count,
                                              report.wheat_fraction, report.is_wheat):
                writer.writerow([int(lab), int(n), int(nw), repr(float(frac)), str(bool(flag)).lower()])
    except OSError as e:
        raise IoFailure(f"cannot write {path}: {e}") from None


def read_report_csv(path, threshold: float = 0.5) -> FusionReport:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return FusionReport(
        label=np.array([int(r["label"]) for r in rows], dtype=np.int64),
        pixel_count=np.array([int(r["pixel_count"]) for r in rows], dtype=np.int64),
        wheat_pixel_count=np.array([int(r["wheat_pixel_count"]) for r in rows], dtype=np.int64),
        threshold=threshold,
    )
