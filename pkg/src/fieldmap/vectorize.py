"""
Label raster to polygon conversion and Ramer-Douglas-Peucker regularization.

Polygons trace pixel edges on the corner lattice, so a polygon's area is
exactly its pixel count times the pixel area and burning it back onto the
grid reproduces the region. Regions are 4-connected. Where a region
touches itself diagonally at a lattice vertex the tracer joins the two
pixels, which keeps every ring simple: an enclosed hole then touches its
shell at a single point, as OGC allows.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from numba import njit

from fieldmap.errors import IoFailure, OpenRing, RotatedGridUnsupported
from fieldmap.raster import LabelRaster

__all__ = [
    "FieldPolygon",
    "polygonize",
    "simplify_rdp",
    "area_of",
    "signed_area",
    "rasterize",
    "to_feature_collection",
    "write_geojson",
    "read_geojson",
]


@dataclass(frozen=True, eq=False)
class FieldPolygon:
    """A delineated parcel in map coordinates.

    Rings are ``(n, 2)`` float64 arrays whose last point repeats the first.
    The exterior winds counter-clockwise and holes clockwise.
    """

    id: int
    exterior: np.ndarray
    interiors: tuple = ()
    area: float = 0.0
    properties: dict = field(default_factory=dict)

    def with_properties(self, **props) -> FieldPolygon:
        return replace(self, properties={**self.properties, **props})

    @property
    def rings(self) -> list[np.ndarray]:
        return [self.exterior, *self.interiors]


def signed_area(ring) -> float:
    """Shoelace area, positive for counter-clockwise rings."""
    ring = np.asarray(ring, dtype=np.float64)
    x = ring[:, 0]
    y = ring[:, 1]
    # Centre on the first vertex to limit cancellation with large map coordinates.
    x = x - x[0]
    y = y - y[0]
    return 0.5 * float(np.dot(x[:-1], y[1:]) - np.dot(x[1:], y[:-1]))


def area_of(ring) -> float:
    """Absolute shoelace area of a closed ring."""
    ring = np.asarray(ring, dtype=np.float64)
    if ring.ndim != 2 or ring.shape[0] < 2 or not np.array_equal(ring[0], ring[-1]):
        raise OpenRing("ring is not closed (first point must equal last point)")
    return abs(signed_area(ring))


def _polygon_area(exterior, interiors) -> float:
    return area_of(exterior) - sum(area_of(r) for r in interiors)


# ---------------------------------------------------------------------------
# polygonize
# ---------------------------------------------------------------------------

@njit(cache=True, nogil=True)
def _region_components(labels):
    """4-connected components of equal non-zero labels, numbered in raster order."""
    h, w = labels.shape
    comp = np.zeros((h, w), dtype=np.int64)
    stack = np.empty(h * w, dtype=np.int64)
    comp_label = [np.uint32(0)]
    ncomp = 0
    for r0 in range(h):
        for c0 in range(w):
            lab = labels[r0, c0]
            if lab == 0 or comp[r0, c0] != 0:
                continue
            ncomp += 1
            comp_label.append(lab)
            comp[r0, c0] = ncomp
            top = 0
            stack[top] = r0 * w + c0
            top += 1
            while top > 0:
                top -= 1
                p = stack[top]
                r = p // w
                c = p - r * w
                if r > 0 and comp[r - 1, c] == 0 and labels[r - 1, c] == lab:
                    comp[r - 1, c] = ncomp
                    stack[top] = p - w
                    top += 1
                if r < h - 1 and comp[r + 1, c] == 0 and labels[r + 1, c] == lab:
                    comp[r + 1, c] = ncomp
                    stack[top] = p + w
                    top += 1
                if c > 0 and comp[r, c - 1] == 0 and labels[r, c - 1] == lab:
                    comp[r, c - 1] = ncomp
                    stack[top] = p - 1
                    top += 1
                if c < w - 1 and comp[r, c + 1] == 0 and labels[r, c + 1] == lab:
                    comp[r, c + 1] = ncomp
                    stack[top] = p + 1
                    top += 1
    out = np.empty(len(comp_label), dtype=np.uint32)
    for i in range(len(comp_label)):
        out[i] = comp_label[i]
    return comp, out


@njit(cache=True, nogil=True)
def _inside(comp, r, c, k):
    h, w = comp.shape
    return 0 <= r < h and 0 <= c < w and comp[r, c] == k


@njit(cache=True, nogil=True)
def _trace_rings(comp):
    """Trace every boundary ring of every component.

    Directions: 0 down, 1 right, 2 up, 3 left (in row/col lattice space);
    each boundary edge is owned by the pixel on its region side, and side
    ``d`` of a pixel is the edge traversed with direction ``d``.

    Returns (ring_comp, ring_offsets, vertex_rows, vertex_cols) where ring
    ``i`` owns corner vertices ``ring_offsets[i]:ring_offsets[i+1]``
    (not closed).
    """
    h, w = comp.shape
    dr = np.array([1, 0, -1, 0])
    dc = np.array([0, 1, 0, -1])
    # start vertex of side d of pixel (r, c), as offsets from (r, c)
    sr = np.array([0, 1, 1, 0])
    sc = np.array([0, 0, 1, 1])
    visited = np.zeros((h, w, 4), dtype=np.bool_)

    n_edges = 0
    for r in range(h):
        for c in range(w):
            k = comp[r, c]
            if k == 0:
                continue
            if not _inside(comp, r, c - 1, k):
                n_edges += 1
            if not _inside(comp, r + 1, c, k):
                n_edges += 1
            if not _inside(comp, r, c + 1, k):
                n_edges += 1
            if not _inside(comp, r - 1, c, k):
                n_edges += 1

    vr = np.empty(n_edges, dtype=np.int64)
    vc = np.empty(n_edges, dtype=np.int64)
    ring_comp = []
    ring_off = [0]
    nv = 0
    # pixel across side d: left, below, right, above
    ar = np.array([0, 1, 0, -1])
    ac = np.array([-1, 0, 1, 0])

    for r in range(h):
        for c in range(w):
            k = comp[r, c]
            if k == 0:
                continue
            for side in range(4):
                if visited[r, c, side] or _inside(comp, r + ar[side], c + ac[side], k):
                    continue
                i0 = r + sr[side]
                j0 = c + sc[side]
                d0 = side
                i = i0
                j = j0
                d = d0
                while True:
                    # mark the edge leaving (i, j) in direction d
                    if d == 0:
                        visited[i, j, 0] = True
                    elif d == 1:
                        visited[i - 1, j, 1] = True
                    elif d == 2:
                        visited[i - 1, j - 1, 2] = True
                    else:
                        visited[i, j - 1, 3] = True
                    i += dr[d]
                    j += dc[d]
                    # B: pixel ahead on the region side, C: ahead on the far side
                    if d == 0:
                        b_in = _inside(comp, i, j, k)
                        c_in = _inside(comp, i, j - 1, k)
                    elif d == 1:
                        b_in = _inside(comp, i - 1, j, k)
                        c_in = _inside(comp, i, j, k)
                    elif d == 2:
                        b_in = _inside(comp, i - 1, j - 1, k)
                        c_in = _inside(comp, i - 1, j, k)
                    else:
                        b_in = _inside(comp, i, j - 1, k)
                        c_in = _inside(comp, i - 1, j - 1, k)
                    if c_in:
                        nd = (d + 3) % 4
                    elif b_in:
                        nd = d
                    else:
                        nd = (d + 1) % 4
                    if nd != d:
                        vr[nv] = i
                        vc[nv] = j
                        nv += 1
                    d = nd
                    if i == i0 and j == j0 and d == d0:
                        break
                ring_comp.append(k)
                ring_off.append(nv)

    rc = np.empty(len(ring_comp), dtype=np.int64)
    for t in range(len(ring_comp)):
        rc[t] = ring_comp[t]
    ro = np.empty(len(ring_off), dtype=np.int64)
    for t in range(len(ring_off)):
        ro[t] = ring_off[t]
    return rc, ro, vr[:nv], vc[:nv]


def polygonize(labels: LabelRaster) -> list[FieldPolygon]:
    """One polygon per 4-connected region of each non-zero label.

    Polygons are ordered by label, then by the raster-scan position of each
    region's first pixel; ``properties["part"]`` numbers the regions of a
    label from 0. Ring vertices are pixel corners in map coordinates, with
    collinear intermediate corners dropped.
    """
    gt = labels.geotransform
    if gt.is_rotated:
        raise RotatedGridUnsupported("polygonize requires a north-up (unrotated) geotransform")
    if labels.labels.size == 0 or not labels.labels.any():
        return []
    pix_area = labels.pixel_area
    comp, comp_label = _region_components(np.ascontiguousarray(labels.labels))
    ring_comp, ring_off, vrows, vcols = _trace_rings(comp)
    xs, ys = gt.to_map(vcols.astype(np.float64), vrows.astype(np.float64))
    flip = gt.pixel_width * gt.pixel_height > 0  # south-up grids mirror the winding

    ncomp = comp_label.size - 1
    exteriors: list = [None] * (ncomp + 1)
    holes: list[list] = [[] for _ in range(ncomp + 1)]
    for t in range(ring_comp.size):
        a, b = ring_off[t], ring_off[t + 1]
        ring = np.empty((b - a + 1, 2), dtype=np.float64)
        ring[:-1, 0] = xs[a:b]
        ring[:-1, 1] = ys[a:b]
        ring[-1] = ring[0]
        s = signed_area(ring)
        k = ring_comp[t]
        is_outer = (s > 0) != flip
        if is_outer:
            exteriors[k] = ring if s > 0 else ring[::-1].copy()
        else:
            holes[k].append(ring if s < 0 else ring[::-1].copy())

    counts = np.bincount(comp.ravel(), minlength=ncomp + 1)
    order = sorted(range(1, ncomp + 1), key=lambda k: (int(comp_label[k]), k))
    polys = []
    part = {}
    for k in order:
        lab = int(comp_label[k])
        idx = part.get(lab, 0)
        part[lab] = idx + 1
        polys.append(FieldPolygon(
            id=lab,
            exterior=exteriors[k],
            interiors=tuple(holes[k]),
            area=float(counts[k]) * pix_area,
            properties={"part": idx},
        ))
    return polys


# ---------------------------------------------------------------------------
# Ramer-Douglas-Peucker
# ---------------------------------------------------------------------------

@njit(cache=True, nogil=True)
def _farthest_pair(pts):
    n = pts.shape[0]
    best = -1.0
    bi = 0
    bj = 0
    for i in range(n):
        for j in range(i + 1, n):
            dx = pts[i, 0] - pts[j, 0]
            dy = pts[i, 1] - pts[j, 1]
            d = dx * dx + dy * dy
            if d > best:
                best = d
                bi = i
                bj = j
    return bi, bj


@njit(cache=True, nogil=True)
def _seg_dist(px, py, ax, ay, bx, by):
    vx = bx - ax
    vy = by - ay
    wx = px - ax
    wy = py - ay
    vv = vx * vx + vy * vy
    if vv == 0.0:
        return np.sqrt(wx * wx + wy * wy)
    t = (wx * vx + wy * vy) / vv
    if t < 0.0:
        t = 0.0
    elif t > 1.0:
        t = 1.0
    dx = wx - t * vx
    dy = wy - t * vy
    return np.sqrt(dx * dx + dy * dy)


@njit(cache=True, nogil=True)
def _rdp_keep(pts, eps):
    """Keep-flags for an open chain; endpoints are always kept."""
    n = pts.shape[0]
    keep = np.zeros(n, dtype=np.bool_)
    keep[0] = True
    keep[n - 1] = True
    stack = np.empty((n, 2), dtype=np.int64)
    top = 0
    stack[0, 0] = 0
    stack[0, 1] = n - 1
    top = 1
    while top > 0:
        top -= 1
        a = stack[top, 0]
        b = stack[top, 1]
        if b - a < 2:
            continue
        dmax = -1.0
        imax = a
        for i in range(a + 1, b):
            d = _seg_dist(pts[i, 0], pts[i, 1], pts[a, 0], pts[a, 1], pts[b, 0], pts[b, 1])
            if d > dmax:
                dmax = d
                imax = i
        if dmax > eps:
            keep[imax] = True
            stack[top, 0] = a
            stack[top, 1] = imax
            top += 1
            stack[top, 0] = imax
            stack[top, 1] = b
            top += 1
    return keep


def _simplify_ring(ring: np.ndarray, epsilon: float) -> np.ndarray | None:
    """Simplify one closed ring; None when the result would be degenerate."""
    pts = np.ascontiguousarray(ring[:-1], dtype=np.float64)
    n = pts.shape[0]
    if n < 3:
        return None
    i, j = _farthest_pair(pts)
    first = pts[i:j + 1]
    second = np.concatenate([pts[j:], pts[:i + 1]])
    k1 = _rdp_keep(first, epsilon)
    k2 = _rdp_keep(second, epsilon)
    out = np.concatenate([first[k1], second[k2][1:]])
    if out.shape[0] < 4:
        return None
    return out


def simplify_rdp(poly: FieldPolygon, epsilon: float) -> FieldPolygon:
    """Ramer-Douglas-Peucker simplification applied to each ring independently.

    A closed ring is split at its two mutually farthest vertices (lowest
    index pair on ties) and each half is simplified as an open chain, so
    every dropped vertex stays within ``epsilon`` of the result. The output
    ring starts at the first anchor, which makes re-simplification with the
    same ``epsilon`` a no-op.

    A ring that would collapse below four points or flip its winding is
    kept unsimplified and ``properties["rdp_degenerate"]`` is set.
    """
    if epsilon < 0:
        raise ValueError(f"epsilon must be >= 0, got {epsilon}")
    if epsilon == 0:
        return poly
    rings = []
    degenerate = False
    for idx, ring in enumerate(poly.rings):
        s = _simplify_ring(ring, float(epsilon))
        if s is None or signed_area(s) == 0 or (signed_area(s) > 0) != (idx == 0):
            degenerate = True
            s = ring
        rings.append(s)
    area = _polygon_area(rings[0], rings[1:])
    if not area > 0:
        return poly.with_properties(rdp_degenerate=True)
    out = replace(poly, exterior=rings[0], interiors=tuple(rings[1:]), area=area)
    return out.with_properties(rdp_degenerate=True) if degenerate else out


# ---------------------------------------------------------------------------
# rasterize
# ---------------------------------------------------------------------------

def rasterize(polygons, like: LabelRaster) -> LabelRaster:
    """Burn polygons onto the grid of ``like`` by pixel-centre inclusion (even-odd rule).

    Later polygons overwrite earlier ones where they overlap.
    """
    gt = like.geotransform
    h, w = like.shape
    out = np.zeros((h, w), dtype=np.uint32)
    for poly in polygons:
        segs = []
        for ring in poly.rings:
            col, row = gt.to_pixel(ring[:, 0], ring[:, 1])
            segs.append(np.column_stack([col[:-1], row[:-1], col[1:], row[1:]]))
        e = np.concatenate(segs)
        x0, y0, x1, y1 = e.T
        rmin = max(int(np.floor(min(y0.min(), y1.min()))), 0)
        rmax = min(int(np.ceil(max(y0.max(), y1.max()))), h)
        for r in range(rmin, rmax):
            yc = r + 0.5
            hit = ((y0 <= yc) & (yc < y1)) | ((y1 <= yc) & (yc < y0))
            if not hit.any():
                continue
            xs = x0[hit] + (yc - y0[hit]) * (x1[hit] - x0[hit]) / (y1[hit] - y0[hit])
            xs.sort()
            centres = np.arange(w) + 0.5
            inside = (np.searchsorted(xs, centres, side="right") % 2) == 1
            out[r, inside] = poly.id
    return like.with_labels(out)


# ---------------------------------------------------------------------------
# GeoJSON
# ---------------------------------------------------------------------------

_FEATURE_KEYS = ("id", "part", "area_m2", "wheat_fraction", "is_wheat")


def _feature(poly: FieldPolygon) -> dict:
    props = {
        "id": int(poly.id),
        "part": int(poly.properties.get("part", 0)),
        "area_m2": float(poly.area),
        "wheat_fraction": poly.properties.get("wheat_fraction"),
        "is_wheat": poly.properties.get("is_wheat"),
    }
    if props["wheat_fraction"] is not None:
        props["wheat_fraction"] = float(props["wheat_fraction"])
    if props["is_wheat"] is not None:
        props["is_wheat"] = bool(props["is_wheat"])
    for key, value in poly.properties.items():
        if key not in props:
            props[key] = value.item() if isinstance(value, np.generic) else value
    return {
        "type": "Feature",
        "geometry": {
            "type": "Polygon",
            "coordinates": [ring.tolist() for ring in poly.rings],
        },
        "properties": props,
    }


def to_feature_collection(polygons, crs: str = "") -> dict:
    fc = {"type": "FeatureCollection", "features": [_feature(p) for p in polygons]}
    if crs:
        fc["crs"] = {"type": "name", "properties": {"name": crs}}
    return fc


def write_geojson(polygons, path, crs: str = "") -> None:
    """Write polygons as a FeatureCollection; coordinates keep full double precision."""
    try:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w") as fh:
            json.dump(to_feature_collection(polygons, crs), fh)
            fh.write("\n")
    except OSError as e:
        raise IoFailure(f"cannot write {path}: {e}") from None


def read_geojson(path) -> list[FieldPolygon]:
    try:
        with open(path) as fh:
            fc = json.load(fh)
    except (OSError, json.JSONDecodeError) as e:
        raise IoFailure(f"cannot read {path}: {e}") from None
    polys = []
    for feat in fc.get("features", []):
        coords = feat["geometry"]["coordinates"]
        props = dict(feat.get("properties") or {})
        rings = [np.asarray(r, dtype=np.float64) for r in coords]
        polys.append(FieldPolygon(
            id=int(props.pop("id")),
            exterior=rings[0],
            interiors=tuple(rings[1:]),
            area=float(props.pop("area_m2")),
            properties={k: v for k, v in props.items() if v is not None},
        ))
    return polys
