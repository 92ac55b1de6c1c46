"""
Pixel-level binary segmentation metrics.

Accuracy is the standard ``(tp + tn) / total``. Published tables sometimes
print a column labelled accuracy that equals IoU; this module does not
reproduce that, and always reports IoU separately.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np

from fieldmap.errors import EmptyInput, IoFailure
from fieldmap.raster import BinaryMask

__all__ = ["ConfusionCounts", "MetricsReport", "confusion", "report", "write_reports_csv",
           "write_reports_json", "METRIC_COLUMNS"]

METRIC_NAMES = ("iou", "precision", "recall", "f1", "accuracy")
METRIC_COLUMNS = ["method", "scene", *METRIC_NAMES, "tp", "fp", "fn", "tn"]


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    fn: int
    tn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    def __add__(self, other: ConfusionCounts) -> ConfusionCounts:
        return ConfusionCounts(self.tp + other.tp, self.fp + other.fp,
                               self.fn + other.fn, self.tn + other.tn)


@dataclass(frozen=True)
class MetricsReport:
    iou: float
    precision: float
    recall: float
    f1: float
    accuracy: float
    counts: ConfusionCounts
    undefined: frozenset = frozenset()

    def as_row(self, method: str = "", scene: str = "") -> dict:
        c = self.counts
        row = {"method": method, "scene": scene}
        row.update({m: getattr(self, m) for m in METRIC_NAMES})
        row.update(tp=c.tp, fp=c.fp, fn=c.fn, tn=c.tn)
        return row


def confusion(pred: BinaryMask, truth: BinaryMask) -> ConfusionCounts:
    """Confusion counts over pixels valid in both masks."""
    pred.check_grid(truth, "confusion")
    valid = pred.valid & truth.valid
    p = pred.bits[valid]
    t = truth.bits[valid]
    tp = int(np.count_nonzero(p & t))
    fp = int(np.count_nonzero(p & ~t))
    fn = int(np.count_nonzero(~p & t))
    tn = int(p.size - tp - fp - fn)
    return ConfusionCounts(tp, fp, fn, tn)


def _ratio(num: int, den: int, name: str, undefined: set) -> float:
    if den == 0:
        undefined.add(name)
        return 0.0
    return num / den


def report(c: ConfusionCounts) -> MetricsReport:
    """IoU, precision, recall, F1 and accuracy from confusion counts.

    A metric whose denominator is zero is reported as 0.0 and its name is
    added to ``undefined``.
    """
    if min(c.tp, c.fp, c.fn, c.tn) < 0:
        raise ValueError(f"negative confusion counts: {c}")
    if c.total == 0:
        raise EmptyInput("no valid pixels to evaluate")
    undefined: set = set()
    iou = _ratio(c.tp, c.tp + c.fp + c.fn, "iou", undefined)
    precision = _ratio(c.tp, c.tp + c.fp, "precision", undefined)
    recall = _ratio(c.tp, c.tp + c.fn, "recall", undefined)
    # Dice form equals the harmonic mean of precision and recall whenever both exist.
    f1 = _ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn, "f1", undefined)
    accuracy = (c.tp + c.tn) / c.total
    return MetricsReport(iou, precision, recall, f1, accuracy, c, frozenset(undefined))


def write_reports_csv(rows, path) -> None:
    """``rows`` are ``(method, scene, MetricsReport)`` triples."""
    try:
        with open(path, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=METRIC_COLUMNS + ["undefined"])
            writer.writeheader()
            for method, scene, rep in rows:
                row = rep.as_row(method, scene)
                row["undefined"] = ";".join(sorted(rep.undefined))
                writer.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})
    except OSError as e:
        raise IoFailure(f"cannot write {path}: {e}") from None


def write_reports_json(rows, path) -> None:
    out = []
    for method, scene, rep in rows:
        row = rep.as_row(method, scene)
        row["undefined"] = sorted(rep.undefined)
        out.append(row)
    try:
        with open(path, "w") as fh:
            json.dump(out, fh, indent=2)
            fh.write("\n")
    except OSError as e:
        raise IoFailure(f"cannot write {path}: {e}") from None
