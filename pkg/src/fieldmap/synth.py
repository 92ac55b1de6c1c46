"""
Deterministic synthetic scenes with known parcels.

Parcels are the Voronoi cells of uniformly drawn sites. A pixel's distance
``d`` to its cell edge (the nearest perpendicular bisector, or the image
border) drives a boundary proximity

    prox = clip((1.5 * boundary_width - d) / boundary_width, 0, 1)

so pixels within ``boundary_width / 2`` of an edge are fully boundary and
pixels beyond ``1.5 * boundary_width`` fully interior. The simulated model
outputs are::

    field    = clamp(1 - prox + sigma * n1)
    boundary = clamp(prox + sigma * n2)
    wheat    = clamp(0.8 or 0.2 + sigma * n3)

with independent standard normals ``n1, n2, n3`` per pixel.

Random numbers
--------------
Everything is drawn from one SplitMix64 stream. With ``GAMMA =
0x9E3779B97F4A7C15`` the k-th output (k = 1, 2, ...) is
``mix(seed + k * GAMMA mod 2**64)`` where::

    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB
    z =  z ^ (z >> 31)

A uniform is ``(x >> 11) * 2**-53`` and a normal is the Box-Muller cosine
branch ``sqrt(-2 ln(1 - u1)) * cos(2 pi u2)`` of two consecutive uniforms.
Draw order: site x/y pairs (2 per parcel), wheat flags (1 per parcel),
field noise, boundary noise, wheat noise (2 uniforms per pixel each,
row-major).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from fieldmap.errors import SpecInvalid
from fieldmap.raster import BinaryMask, GeoTransform, LabelRaster, ProbabilityRaster

__all__ = ["SplitMix64", "SceneSpec", "Scene", "generate", "WHEAT_SCORE", "OTHER_SCORE"]

GAMMA = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)

WHEAT_SCORE = 0.8
OTHER_SCORE = 0.2


class SplitMix64:
    """Counter-based SplitMix64 stream; see the module docstring for the exact recurrence."""

    def __init__(self, seed: int):
        self.seed = np.uint64(seed % 2**64)
        self.count = 0

    def next_uint64(self, n: int) -> np.ndarray:
        k = np.arange(self.count + 1, self.count + n + 1, dtype=np.uint64)
        self.count += n
        with np.errstate(over="ignore"):
            z = self.seed + k * GAMMA
            z = (z ^ (z >> np.uint64(30))) * _M1
            z = (z ^ (z >> np.uint64(27))) * _M2
        return z ^ (z >> np.uint64(31))

    def uniform(self, n: int) -> np.ndarray:
        return (self.next_uint64(n) >> np.uint64(11)).astype(np.float64) * 2.0**-53

    def normal(self, n: int) -> np.ndarray:
        u = self.uniform(2 * n)
        u1 = u[0::2]
        u2 = u[1::2]
        return np.sqrt(-2.0 * np.log1p(-u1)) * np.cos(2.0 * np.pi * u2)


@dataclass(frozen=True)
class SceneSpec:
    rng_seed: int = 0
    width: int = 256
    height: int = 256
    n_parcels: int = 40
    boundary_width: float = 2.0
    noise_sigma: float = 0.15
    wheat_fraction: float = 0.5
    pixel_size: float = 10.0
    crs: str = "EPSG:32636"

    def validate(self) -> None:
        if self.n_parcels < 1:
            raise SpecInvalid(f"n_parcels must be >= 1, got {self.n_parcels}")
        if self.width < 1 or self.height < 1:
            raise SpecInvalid(f"scene must be at least 1x1, got {self.width}x{self.height}")
        if not 0.0 <= self.noise_sigma <= 0.5:
            raise SpecInvalid(f"noise_sigma must lie in [0, 0.5], got {self.noise_sigma}")
        if not 0.0 <= self.wheat_fraction <= 1.0:
            raise SpecInvalid(f"wheat_fraction must lie in [0, 1], got {self.wheat_fraction}")
        if not self.boundary_width > 0:
            raise SpecInvalid(f"boundary_width must be > 0, got {self.boundary_width}")
        if not self.pixel_size > 0:
            raise SpecInvalid(f"pixel_size must be > 0, got {self.pixel_size}")


@dataclass(frozen=True)
class Scene:
    truth_labels: LabelRaster
    truth_wheat: BinaryMask
    field_scores: ProbabilityRaster
    boundary_scores: ProbabilityRaster
    wheat_scores: ProbabilityRaster
    sites: np.ndarray
    wheat_parcels: np.ndarray

    def __iter__(self):
        yield from (self.truth_labels, self.truth_wheat, self.field_scores,
                    self.boundary_scores, self.wheat_scores)


@njit(cache=True, nogil=True)
def _voronoi(sx, sy, h, w):
    """Nearest-site index (lowest on ties) and distance to the cell edge, per pixel centre."""
    n = sx.size
    sep = np.empty((n, n), dtype=np.float64)
    for i in range(n):
        for k in range(n):
            sep[i, k] = np.sqrt((sx[k] - sx[i]) ** 2 + (sy[k] - sy[i]) ** 2)
    owner = np.empty((h, w), dtype=np.int64)
    dist = np.empty((h, w), dtype=np.float64)
    for r in range(h):
        y = r + 0.5
        for c in range(w):
            x = c + 0.5
            best = 0
            bd = (x - sx[0]) ** 2 + (y - sy[0]) ** 2
            for k in range(1, n):
                d = (x - sx[k]) ** 2 + (y - sy[k]) ** 2
                if d < bd:
                    bd = d
                    best = k
            edge = min(min(x, w - x), min(y, h - y))
            for k in range(n):
                if k == best:
                    continue
                s = sep[best, k]
                if s == 0.0:
                    edge = 0.0
                    continue
                d = (x - sx[k]) ** 2 + (y - sy[k]) ** 2
                b = (d - bd) / (2.0 * s)
                if b < edge:
                    edge = b
            owner[r, c] = best
            dist[r, c] = edge
    return owner, dist


def generate(spec: SceneSpec) -> Scene:
    """Build a synthetic scene; identical specs give bit-identical outputs."""
    spec.validate()
    h, w, n = spec.height, spec.width, spec.n_parcels
    rng = SplitMix64(spec.rng_seed)
    u = rng.uniform(2 * n)
    sx = u[0::2] * w
    sy = u[1::2] * h
    wheat_parcels = rng.uniform(n) < spec.wheat_fraction

    owner, dist = _voronoi(sx, sy, h, w)
    bw = float(spec.boundary_width)
    prox = np.clip((1.5 * bw - dist) / bw, 0.0, 1.0)

    sigma = spec.noise_sigma
    npx = h * w
    n_field = rng.normal(npx).reshape(h, w)
    n_bound = rng.normal(npx).reshape(h, w)
    n_wheat = rng.normal(npx).reshape(h, w)
    wheat_px = wheat_parcels[owner]
    field = np.clip(1.0 - prox + sigma * n_field, 0.0, 1.0)
    boundary = np.clip(prox + sigma * n_bound, 0.0, 1.0)
    wheat = np.clip(np.where(wheat_px, WHEAT_SCORE, OTHER_SCORE) + sigma * n_wheat, 0.0, 1.0)

    gt = GeoTransform(origin_x=0.0, origin_y=h * spec.pixel_size,
                      pixel_width=spec.pixel_size, pixel_height=-spec.pixel_size)
    crs = spec.crs
    return Scene(
        truth_labels=LabelRaster((owner + 1).astype(np.uint32), gt, crs),
        truth_wheat=BinaryMask(wheat_px, gt, crs),
        field_scores=ProbabilityRaster(field.astype(np.float32), gt, crs),
        boundary_scores=ProbabilityRaster(boundary.astype(np.float32), gt, crs),
        wheat_scores=ProbabilityRaster(wheat.astype(np.float32), gt, crs),
        sites=np.column_stack([sx, sy]),
        wheat_parcels=wheat_parcels,
    )
