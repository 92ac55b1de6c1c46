"""
Multi-year crop accounting: per-year area and field counts, and
gained / persisted / lost flows between year pairs.

All accounting is done on pixel counts over a shared grid, so the
conservation identities hold exactly; areas are converted to map units
squared only when reported, and to km² only on serialization.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from fieldmap.errors import GridMismatch, InsufficientYears, IoFailure, YearOrder
from fieldmap.raster import BinaryMask
from fieldmap.watershed import connected_components

__all__ = [
    "YearMask",
    "YearSummary",
    "TransitionFlow",
    "year_summary",
    "transition",
    "flow_table",
    "write_flows_csv",
    "write_summaries_csv",
]

KM2_PER_M2 = 1e-6


@dataclass(frozen=True)
class YearMask:
    year: int
    mask: BinaryMask
    field_count: int | None = None  # from fused polygons when known


@dataclass(frozen=True)
class YearSummary:
    year: int
    pixel_count: int
    area: float
    field_count: int


@dataclass(frozen=True)
class TransitionFlow:
    year_from: int
    year_to: int
    gained_pixels: int
    persisted_pixels: int
    lost_pixels: int
    pixel_area: float

    @property
    def gap(self) -> int:
        return self.year_to - self.year_from

    @property
    def gained_area(self) -> float:
        return self.gained_pixels * self.pixel_area

    @property
    def persisted_area(self) -> float:
        return self.persisted_pixels * self.pixel_area

    @property
    def lost_area(self) -> float:
        return self.lost_pixels * self.pixel_area


def year_summary(m: YearMask, connectivity: int = 4) -> YearSummary:
    """Area and field count of one year's wheat mask.

    The field count comes from ``m.field_count`` when it was supplied
    (polygon count of the fused output), otherwise from connected components.
    """
    n = int(np.count_nonzero(m.mask.bits))
    if m.field_count is not None:
        fields = int(m.field_count)
    else:
        fields = connected_components(m.mask, connectivity).label_count
    return YearSummary(m.year, n, n * m.mask.pixel_area, fields)


def transition(a: YearMask, b: YearMask) -> TransitionFlow:
    if not a.mask.same_grid(b.mask):
        raise GridMismatch(f"year masks {a.year} and {b.year} are on different grids")
    if not a.year < b.year:
        raise YearOrder(f"transition needs year_from < year_to, got {a.year} -> {b.year}")
    x = a.mask.bits
    y = b.mask.bits
    return TransitionFlow(
        year_from=a.year,
        year_to=b.year,
        gained_pixels=int(np.count_nonzero(~x & y)),
        persisted_pixels=int(np.count_nonzero(x & y)),
        lost_pixels=int(np.count_nonzero(x & ~y)),
        pixel_area=a.mask.pixel_area,
    )


def flow_table(masks, gaps) -> list[TransitionFlow]:
    """Flows for every year pair whose difference is in ``gaps``, sorted by (gap, year_from)."""
    masks = sorted(masks, key=lambda m: m.year)
    if len(masks) < 2:
        raise InsufficientYears(f"need at least 2 years, got {len(masks)}")
    years = [m.year for m in masks]
    if len(set(years)) != len(years):
        raise YearOrder(f"duplicate years in {years}")
    by_year = {m.year: m for m in masks}
    for m in masks[1:]:
        if not masks[0].mask.same_grid(m.mask):
            raise GridMismatch(f"year {m.year} is on a different grid from year {masks[0].year}")
    flows = []
    for gap in sorted(set(gaps)):
        if gap <= 0:
            raise ValueError(f"gaps must be positive, got {gap}")
        for y in years:
            if y + gap in by_year:
                flows.append(transition(by_year[y], by_year[y + gap]))
    return flows


def write_flows_csv(flows, path) -> None:
    try:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["year_from", "year_to", "gap", "gained_km2", "persisted_km2", "lost_km2"])
            for f in flows:
                w.writerow([f.year_from, f.year_to, f.gap,
                            repr(f.gained_area * KM2_PER_M2),
                            repr(f.persisted_area * KM2_PER_M2),
                            repr(f.lost_area * KM2_PER_M2)])
    except OSError as e:
        raise IoFailure(f"cannot write {path}: {e}") from None


def write_summaries_csv(summaries, path) -> None:
    try:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["year", "area_km2", "field_count"])
            for s in summaries:
                w.writerow([s.year, repr(s.area * KM2_PER_M2), s.field_count])
    except OSError as e:
        raise IoFailure(f"cannot write {path}: {e}") from None
