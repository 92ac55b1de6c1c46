"""
Seeded watershed segmentation of field score maps.

Depth is the negated field score, so the most confident field pixels flood
first. Flooding is a priority flood keyed on ``(depth, insertion order)``:
among equal depths the earliest-queued pixel wins, which makes plateaus
deterministic. A pixel takes the label of the neighbour that queued it,
i.e. of its earliest-finalized labelled neighbour.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit
from scipy import ndimage

from fieldmap.raster import BinaryMask, LabelRaster, ProbabilityRaster

__all__ = [
    "SeedSet",
    "connected_components",
    "extract_seeds",
    "watershed",
    "filter_small_labels",
    "neighbour_offsets",
]


def neighbour_offsets(connectivity: int) -> np.ndarray:
    """(drow, dcol) offsets in the fixed visiting order used by the flood."""
    if connectivity == 4:
        return np.array([(-1, 0), (0, -1), (0, 1), (1, 0)], dtype=np.int64)
    if connectivity == 8:
        return np.array([(-1, 0), (0, -1), (0, 1), (1, 0),
                         (-1, -1), (-1, 1), (1, -1), (1, 1)], dtype=np.int64)
    raise ValueError(f"connectivity must be 4 or 8, got {connectivity}")


def _structure(connectivity: int) -> np.ndarray:
    if connectivity == 4:
        return ndimage.generate_binary_structure(2, 1)
    if connectivity == 8:
        return ndimage.generate_binary_structure(2, 2)
    raise ValueError(f"connectivity must be 4 or 8, got {connectivity}")


def connected_components(mask: BinaryMask, connectivity: int = 4) -> LabelRaster:
    """Label maximal connected true regions 1..k in raster-scan order of their first pixel."""
    labels, _ = ndimage.label(mask.bits, structure=_structure(connectivity))
    return LabelRaster(labels.astype(np.uint32), mask.geotransform, mask.crs)


@dataclass(frozen=True)
class SeedSet:
    labels: LabelRaster
    seed_count: int


def extract_seeds(basins: ProbabilityRaster, connectivity: int = 4) -> SeedSet:
    """Seeds are the connected components of the strictly positive basins pixels."""
    positive = BinaryMask(basins.values > 0, basins.geotransform, basins.crs, ~basins.nodata)
    labels = connected_components(positive, connectivity)
    return SeedSet(labels, labels.label_count)


# ---------------------------------------------------------------------------
# priority flood kernel
# ---------------------------------------------------------------------------

@njit(cache=True, nogil=True)
def _less(hk, hs, i, j):
    return hk[i] < hk[j] or (hk[i] == hk[j] and hs[i] < hs[j])


@njit(cache=True, nogil=True)
def _swap(hk, hs, hv, i, j):
    hk[i], hk[j] = hk[j], hk[i]
    hs[i], hs[j] = hs[j], hs[i]
    hv[i], hv[j] = hv[j], hv[i]


@njit(cache=True, nogil=True)
def _push(hk, hs, hv, size, key, seq, val):
    i = size
    hk[i] = key
    hs[i] = seq
    hv[i] = val
    while i > 0:
        parent = (i - 1) >> 1
        if _less(hk, hs, i, parent):
            _swap(hk, hs, hv, i, parent)
            i = parent
        else:
            break
    return size + 1


@njit(cache=True, nogil=True)
def _pop(hk, hs, hv, size):
    top = hv[0]
    size -= 1
    if size > 0:
        hk[0] = hk[size]
        hs[0] = hs[size]
        hv[0] = hv[size]
        i = 0
        while True:
            left = 2 * i + 1
            if left >= size:
                break
            best = left
            right = left + 1
            if right < size and _less(hk, hs, right, left):
                best = right
            if _less(hk, hs, best, i):
                _swap(hk, hs, hv, best, i)
                i = best
            else:
                break
    return top, size


@njit(cache=True, nogil=True)
def _flood(fdepth, flat, fmask, h, w, offsets, order):
    """Flood ``flat`` (raveled seed labels, modified in place) over ``fmask``.

    Returns the number of non-seed pixels finalized; their flat indices are
    written to ``order`` in finalization order.
    """
    n = h * w
    is_seed = flat != 0
    queued = is_seed.copy()
    hk = np.empty(n, dtype=np.float64)
    hs = np.empty(n, dtype=np.int64)
    hv = np.empty(n, dtype=np.int64)
    size = 0
    seq = 0
    nnb = offsets.shape[0]

    for p in range(n):
        if not is_seed[p]:
            continue
        r = p // w
        c = p - r * w
        for k in range(nnb):
            rr = r + offsets[k, 0]
            cc = c + offsets[k, 1]
            if rr < 0 or rr >= h or cc < 0 or cc >= w:
                continue
            q = rr * w + cc
            if queued[q] or not fmask[q]:
                continue
            queued[q] = True
            flat[q] = flat[p]
            size = _push(hk, hs, hv, size, fdepth[q], seq, q)
            seq += 1

    count = 0
    while size > 0:
        p, size = _pop(hk, hs, hv, size)
        order[count] = p
        count += 1
        r = p // w
        c = p - r * w
        for k in range(nnb):
            rr = r + offsets[k, 0]
            cc = c + offsets[k, 1]
            if rr < 0 or rr >= h or cc < 0 or cc >= w:
                continue
            q = rr * w + cc
            if queued[q] or not fmask[q]:
                continue
            queued[q] = True
            flat[q] = flat[p]
            size = _push(hk, hs, hv, size, fdepth[q], seq, q)
            seq += 1
    return count


def _watershed_with_order(field_scores, seeds, flood_mask, connectivity):
    field_scores.check_grid(seeds.labels, "watershed seeds")
    field_scores.check_grid(flood_mask, "watershed flood_mask")
    depth = -field_scores.values.astype(np.float64)
    out = np.array(seeds.labels.labels, dtype=np.uint32, copy=True)
    mask = np.ascontiguousarray(flood_mask.bits & ~field_scores.nodata)
    order = np.empty(out.size, dtype=np.int64)
    h, w = out.shape
    count = _flood(depth.reshape(-1), out.reshape(-1), mask.reshape(-1), h, w,
                   neighbour_offsets(connectivity), order)
    return LabelRaster(out, field_scores.geotransform, field_scores.crs), order[:count]


def watershed(field_scores: ProbabilityRaster, seeds: SeedSet, flood_mask: BinaryMask,
              connectivity: int = 4) -> LabelRaster:
    """Grow ``seeds`` over ``flood_mask`` in order of decreasing field score.

    Parameters
    ----------
    field_scores : ProbabilityRaster
        Field confidence; its negation is the flooding depth.
    seeds : SeedSet
        Marker regions. Seed pixels keep their labels.
    flood_mask : BinaryMask
        Pixels that may be flooded. Mask pixels not reachable from any seed
        stay 0, as does everything outside the mask.
    connectivity : {4, 8}

    Returns
    -------
    LabelRaster
    """
    labels, _ = _watershed_with_order(field_scores, seeds, flood_mask, connectivity)
    return labels


def filter_small_labels(labels: LabelRaster, min_area: float) -> LabelRaster:
    """Drop labels covering less than ``min_area`` and renumber the rest densely.

    Labels whose area equals ``min_area`` are kept. Survivors are renumbered
    1..k in ascending order of their original value.
    """
    lab = labels.labels
    if lab.size == 0:
        return labels
    counts = np.bincount(lab.ravel(), minlength=1)
    area = counts * labels.pixel_area
    keep = (area >= min_area) & (counts > 0)
    keep[0] = False
    lut = np.zeros(counts.size, dtype=np.uint32)
    lut[keep] = np.arange(1, int(keep.sum()) + 1, dtype=np.uint32)
    return labels.with_labels(lut[lab])
