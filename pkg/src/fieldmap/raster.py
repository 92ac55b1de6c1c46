"""
Georeferenced grid types and the raster container format.

A container is a pair of files sharing a stem: ``<name>.json`` holds the
header and ``<name>.bin`` the payload. The payload is the row-major pixel
block (little-endian float32 for score rasters, uint32 for label rasters)
followed by a packed nodata bitmask, one bit per pixel, LSB-first, where a
set bit marks nodata.
"""
from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from fieldmap.errors import (
    DimensionMismatch,
    GeographicCRSError,
    GridMismatch,
    InvalidGeoTransform,
    IoFailure,
    MalformedHeader,
    ValueOutOfRange,
)

__all__ = [
    "GeoTransform",
    "ProbabilityRaster",
    "LabelRaster",
    "BinaryMask",
    "pixel_area",
    "is_geographic",
    "read_raster",
    "write_raster",
    "read_labels",
    "write_labels",
    "read_mask",
    "write_mask",
    "read_header",
]

DTYPES = {"f32le": np.dtype("<f4"), "u32le": np.dtype("<u4")}

# CRS identifiers whose units are degrees. Anything else is trusted to be projected.
_GEOGRAPHIC_CRS = {"EPSG:4326", "EPSG:4269", "EPSG:4258", "EPSG:4230", "OGC:CRS84", "CRS:84", "WGS84"}


def is_geographic(crs: str) -> bool:
    """Return True when ``crs`` names a latitude/longitude system."""
    key = crs.strip().upper()
    return key in _GEOGRAPHIC_CRS or key.startswith("GEOGCS") or key.startswith("GEOG:")


@dataclass(frozen=True)
class GeoTransform:
    """Six-parameter affine map from (col, row) pixel corners to map coordinates.

    ``x = origin_x + col * pixel_width + row * row_rotation``
    ``y = origin_y + col * col_rotation + row * pixel_height``
    """

    origin_x: float = 0.0
    origin_y: float = 0.0
    pixel_width: float = 1.0
    pixel_height: float = -1.0
    row_rotation: float = 0.0
    col_rotation: float = 0.0

    def __post_init__(self):
        vals = self.to_list()
        if not all(math.isfinite(v) for v in vals):
            raise InvalidGeoTransform(f"non-finite geotransform {vals}")
        if self.pixel_width == 0 or self.pixel_height == 0:
            raise InvalidGeoTransform("pixel_width and pixel_height must be non-zero")
        if self.determinant == 0:
            raise InvalidGeoTransform("geotransform is singular")

    @property
    def determinant(self) -> float:
        return self.pixel_width * self.pixel_height - self.row_rotation * self.col_rotation

    @property
    def is_rotated(self) -> bool:
        return self.row_rotation != 0 or self.col_rotation != 0

    def to_list(self) -> list[float]:
        """Header order: origin_x, pixel_width, row_rotation, origin_y, col_rotation, pixel_height."""
        return [
            self.origin_x,
            self.pixel_width,
            self.row_rotation,
            self.origin_y,
            self.col_rotation,
            self.pixel_height,
        ]

    @classmethod
    def from_list(cls, vals) -> GeoTransform:
        if len(vals) != 6:
            raise MalformedHeader(f"geotransform needs 6 numbers, got {len(vals)}")
        ox, pw, rr, oy, cr, ph = (float(v) for v in vals)
        return cls(origin_x=ox, origin_y=oy, pixel_width=pw, pixel_height=ph,
                   row_rotation=rr, col_rotation=cr)

    def to_map(self, col, row):
        """Map pixel-corner coordinates (possibly arrays) to map coordinates."""
        x = self.origin_x + col * self.pixel_width + row * self.row_rotation
        y = self.origin_y + col * self.col_rotation + row * self.pixel_height
        return x, y

    def to_pixel(self, x, y):
        """Inverse of :meth:`to_map`."""
        dx = np.asarray(x, dtype=np.float64) - self.origin_x
        dy = np.asarray(y, dtype=np.float64) - self.origin_y
        det = self.determinant
        col = (dx * self.pixel_height - dy * self.row_rotation) / det
        row = (dy * self.pixel_width - dx * self.col_rotation) / det
        return col, row


def pixel_area(gt: GeoTransform) -> float:
    """Area of one pixel in map units squared."""
    return abs(gt.pixel_width * gt.pixel_height - gt.row_rotation * gt.col_rotation)


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    if a.flags.writeable:
        a = a.copy()
        a.flags.writeable = False
    return a


class _Grid:
    """Shared georeferencing behaviour; subclasses define ``geotransform`` and ``crs``."""

    @property
    def shape(self) -> tuple[int, int]:
        raise NotImplementedError

    @property
    def height(self) -> int:
        return self.shape[0]

    @property
    def width(self) -> int:
        return self.shape[1]

    @property
    def pixel_area(self) -> float:
        """Pixel area, refusing geographic grids where it would be in square degrees."""
        if is_geographic(self.crs):
            raise GeographicCRSError(f"cannot compute areas on geographic CRS {self.crs!r}")
        return pixel_area(self.geotransform)

    def same_grid(self, other: _Grid) -> bool:
        return (
            self.shape == other.shape
            and self.geotransform == other.geotransform
            and self.crs == other.crs
        )

    def check_grid(self, other: _Grid, what: str = "inputs") -> None:
        if not self.same_grid(other):
            raise GridMismatch(
                f"{what}: grids differ ({self.shape}, {self.geotransform}, {self.crs!r}) vs "
                f"({other.shape}, {other.geotransform}, {other.crs!r})"
            )


@dataclass(frozen=True, eq=False)
class ProbabilityRaster(_Grid):
    """Per-pixel scores in [0, 1] with an explicit nodata mask."""

    values: np.ndarray
    geotransform: GeoTransform = field(default_factory=GeoTransform)
    crs: str = ""
    nodata: np.ndarray | None = None

    def __post_init__(self):
        values = np.asarray(self.values)
        if values.ndim != 2:
            raise DimensionMismatch(f"values must be 2-D, got shape {values.shape}")
        values = values.astype(np.float32, copy=False)
        if self.nodata is None:
            nodata = np.zeros(values.shape, dtype=bool)
        else:
            nodata = np.asarray(self.nodata, dtype=bool)
        if nodata.shape != values.shape:
            raise DimensionMismatch(f"nodata shape {nodata.shape} != values shape {values.shape}")
        valid = values[~nodata]
        if valid.size and not (np.all(valid >= 0.0) and np.all(valid <= 1.0)):
            bad = valid[~((valid >= 0.0) & (valid <= 1.0))][0]
            raise ValueOutOfRange(f"score {bad!r} outside [0, 1] at a valid pixel")
        object.__setattr__(self, "values", _frozen(values))
        object.__setattr__(self, "nodata", _frozen(nodata))

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def with_values(self, values, nodata=None) -> ProbabilityRaster:
        return ProbabilityRaster(values, self.geotransform, self.crs,
                                 self.nodata if nodata is None else nodata)

    def equals(self, other: ProbabilityRaster) -> bool:
        """Bit-exact comparison, including nodata and georeferencing."""
        return (
            isinstance(other, ProbabilityRaster)
            and self.same_grid(other)
            and self.values.tobytes() == other.values.tobytes()
            and np.array_equal(self.nodata, other.nodata)
        )


@dataclass(frozen=True, eq=False)
class LabelRaster(_Grid):
    """Non-negative instance labels; 0 is background."""

    labels: np.ndarray
    geotransform: GeoTransform = field(default_factory=GeoTransform)
    crs: str = ""

    def __post_init__(self):
        labels = np.asarray(self.labels)
        if labels.ndim != 2:
            raise DimensionMismatch(f"labels must be 2-D, got shape {labels.shape}")
        if labels.dtype.kind == "i" and labels.size and labels.min() < 0:
            raise ValueOutOfRange("labels must be non-negative")
        if labels.dtype.kind not in "uib":
            raise ValueOutOfRange(f"labels must be integers, got {labels.dtype}")
        object.__setattr__(self, "labels", _frozen(labels.astype(np.uint32, copy=False)))

    @property
    def shape(self) -> tuple[int, int]:
        return self.labels.shape

    @property
    def label_count(self) -> int:
        return int(self.labels.max()) if self.labels.size else 0

    def with_labels(self, labels) -> LabelRaster:
        return LabelRaster(labels, self.geotransform, self.crs)

    def equals(self, other: LabelRaster) -> bool:
        return (
            isinstance(other, LabelRaster)
            and self.same_grid(other)
            and np.array_equal(self.labels, other.labels)
        )


@dataclass(frozen=True, eq=False)
class BinaryMask(_Grid):
    """Boolean grid. ``valid`` marks pixels carrying an observation; invalid pixels are always false."""

    bits: np.ndarray
    geotransform: GeoTransform = field(default_factory=GeoTransform)
    crs: str = ""
    valid: np.ndarray | None = None

    def __post_init__(self):
        bits = np.asarray(self.bits, dtype=bool)
        if bits.ndim != 2:
            raise DimensionMismatch(f"bits must be 2-D, got shape {bits.shape}")
        valid = np.ones(bits.shape, dtype=bool) if self.valid is None else np.asarray(self.valid, dtype=bool)
        if valid.shape != bits.shape:
            raise DimensionMismatch(f"valid shape {valid.shape} != bits shape {bits.shape}")
        object.__setattr__(self, "bits", _frozen(bits & valid))
        object.__setattr__(self, "valid", _frozen(valid))

    @property
    def shape(self) -> tuple[int, int]:
        return self.bits.shape

    def equals(self, other: BinaryMask) -> bool:
        return (
            isinstance(other, BinaryMask)
            and self.same_grid(other)
            and np.array_equal(self.bits, other.bits)
            and np.array_equal(self.valid, other.valid)
        )


# ---------------------------------------------------------------------------
# container I/O
# ---------------------------------------------------------------------------

def _paths(path) -> tuple[Path, Path]:
    p = Path(path)
    stem = p.with_suffix("") if p.suffix in (".json", ".bin") else p
    return stem.with_name(stem.name + ".json"), stem.with_name(stem.name + ".bin")


def read_header(path) -> dict:
    """Load and validate a container header."""
    hdr_path, _ = _paths(path)
    try:
        with open(hdr_path) as fh:
            hdr = json.load(fh)
    except FileNotFoundError:
        raise IoFailure(f"no such raster header: {hdr_path}") from None
    except json.JSONDecodeError as e:
        raise MalformedHeader(f"{hdr_path}: invalid JSON ({e})") from None
    except OSError as e:
        raise IoFailure(f"{hdr_path}: {e}") from None

    if not isinstance(hdr, dict):
        raise MalformedHeader(f"{hdr_path}: header must be a JSON object")
    for key in ("width", "height", "dtype", "geotransform", "crs", "nodata_count"):
        if key not in hdr:
            raise MalformedHeader(f"{hdr_path}: missing field {key!r}")
    for key in ("width", "height", "nodata_count"):
        v = hdr[key]
        if not isinstance(v, int) or isinstance(v, bool) or v < 0:
            raise MalformedHeader(f"{hdr_path}: {key} must be a non-negative integer")
    if hdr["dtype"] not in DTYPES:
        raise MalformedHeader(f"{hdr_path}: unsupported dtype {hdr['dtype']!r}")
    if not isinstance(hdr["crs"], str):
        raise MalformedHeader(f"{hdr_path}: crs must be a string")
    gt = hdr["geotransform"]
    if not isinstance(gt, list) or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in gt):
        raise MalformedHeader(f"{hdr_path}: geotransform must be an array of numbers")
    try:
        hdr["geotransform"] = GeoTransform.from_list(gt)
    except InvalidGeoTransform as e:
        raise MalformedHeader(f"{hdr_path}: {e}") from None
    return hdr


def _read_payload(path, expected_dtype=None):
    hdr = read_header(path)
    if expected_dtype is not None and hdr["dtype"] != expected_dtype:
        raise MalformedHeader(f"expected dtype {expected_dtype!r}, header says {hdr['dtype']!r}")
    _, bin_path = _paths(path)
    w, h = hdr["width"], hdr["height"]
    n = w * h
    dtype = DTYPES[hdr["dtype"]]
    try:
        raw = bin_path.read_bytes()
    except OSError as e:
        raise IoFailure(f"{bin_path}: {e}") from None
    nbytes = n * dtype.itemsize
    nmask = (n + 7) // 8
    if len(raw) != nbytes + nmask:
        raise DimensionMismatch(
            f"{bin_path}: payload has {len(raw)} bytes, header {w}x{h} {hdr['dtype']} "
            f"needs {nbytes} + {nmask} mask bytes"
        )
    data = np.frombuffer(raw, dtype=dtype, count=n).reshape(h, w)
    bits = np.unpackbits(np.frombuffer(raw, dtype=np.uint8, offset=nbytes), bitorder="little", count=n)
    nodata = bits.astype(bool).reshape(h, w)
    if int(nodata.sum()) != hdr["nodata_count"]:
        raise MalformedHeader(
            f"{path}: nodata_count {hdr['nodata_count']} disagrees with bitmask ({int(nodata.sum())})"
        )
    return hdr, data, nodata


def _write_payload(path, dtype_name: str, data: np.ndarray, nodata: np.ndarray,
                   gt: GeoTransform, crs: str) -> None:
    hdr_path, bin_path = _paths(path)
    h, w = data.shape
    header = {
        "width": int(w),
        "height": int(h),
        "dtype": dtype_name,
        "geotransform": gt.to_list(),
        "crs": crs,
        "nodata_count": int(nodata.sum()),
    }
    payload = np.ascontiguousarray(data, dtype=DTYPES[dtype_name]).tobytes()
    payload += np.packbits(nodata.ravel(), bitorder="little").tobytes()
    try:
        os.makedirs(hdr_path.parent, exist_ok=True)
        bin_path.write_bytes(payload)
        with open(hdr_path, "w") as fh:
            json.dump(header, fh, indent=2)
            fh.write("\n")
    except OSError as e:
        raise IoFailure(f"cannot write raster {hdr_path}: {e}") from None


def read_raster(path) -> ProbabilityRaster:
    """Read a float32 score raster; values outside [0, 1] at valid pixels are rejected."""
    hdr, data, nodata = _read_payload(path, "f32le")
    return ProbabilityRaster(data, hdr["geotransform"], hdr["crs"], nodata)


def write_raster(raster: ProbabilityRaster, path) -> None:
    _write_payload(path, "f32le", raster.values, raster.nodata, raster.geotransform, raster.crs)


def read_labels(path) -> LabelRaster:
    hdr, data, _ = _read_payload(path, "u32le")
    return LabelRaster(data, hdr["geotransform"], hdr["crs"])


def write_labels(labels: LabelRaster, path) -> None:
    _write_payload(path, "u32le", labels.labels, np.zeros(labels.shape, dtype=bool),
                   labels.geotransform, labels.crs)


def read_mask(path, threshold: float = 0.5) -> BinaryMask:
    """Read a mask from either container dtype.

    ``u32le`` containers are true where non-zero; ``f32le`` containers are true
    where the score is ``>= threshold``. Nodata pixels become invalid.
    """
    hdr, data, nodata = _read_payload(path)
    if hdr["dtype"] == "f32le":
        raster = ProbabilityRaster(data, hdr["geotransform"], hdr["crs"], nodata)
        bits = (raster.values >= threshold) & ~nodata
    else:
        bits = data != 0
    return BinaryMask(bits, hdr["geotransform"], hdr["crs"], ~nodata)


def write_mask(mask: BinaryMask, path) -> None:
    _write_payload(path, "u32le", mask.bits.astype(np.uint32), ~mask.valid,
                   mask.geotransform, mask.crs)
