import numpy as np
import pytest

from fieldmap.raster import BinaryMask, GeoTransform, LabelRaster, ProbabilityRaster

GT10 = GeoTransform(origin_x=500000.0, origin_y=3700000.0, pixel_width=10.0, pixel_height=-10.0)
CRS = "EPSG:32636"


def prob(values, nodata=None, gt=GT10, crs=CRS):
    return ProbabilityRaster(np.asarray(values, dtype=np.float32), gt, crs, nodata)


def labels(arr, gt=GT10, crs=CRS):
    return LabelRaster(np.asarray(arr, dtype=np.uint32), gt, crs)


def mask(bits, gt=GT10, crs=CRS, valid=None):
    return BinaryMask(np.asarray(bits, dtype=bool), gt, crs, valid)


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)


# -- acceptance summary ---------------------------------------------------------

_ACCEPTANCE: dict[int, str] = {}


@pytest.fixture
def criterion():
    """Record one pass/fail line for an acceptance criterion, then assert it."""

    def record(number: int, title: str, ok: bool, detail: str = ""):
        line = f"criterion {number:2d} {'PASS' if ok else 'FAIL'}  {title}"
        if detail:
            line += f"  [{detail}]"
        _ACCEPTANCE[number] = line
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_ACCEPTANCE):
        terminalreporter.write_line(_ACCEPTANCE[n])
