import json

import numpy as np
import pytest
import shapely
from shapely.geometry import Point, Polygon

from conftest import CRS, GT10, labels
from oracles import distance_to_ring
from fieldmap.errors import OpenRing, RotatedGridUnsupported
from fieldmap.raster import GeoTransform
from fieldmap.vectorize import (
    FieldPolygon,
    area_of,
    polygonize,
    rasterize,
    read_geojson,
    signed_area,
    simplify_rdp,
    to_feature_collection,
    write_geojson,
)


def _shape(p):
    return Polygon(p.exterior, [tuple(map(tuple, h)) for h in p.interiors])


def _random_labels(rng, h, w, k):
    # blocky labels with ragged edges, holes and islands
    coarse = rng.integers(0, k + 1, size=(h // 2 + 1, w // 2 + 1))
    lab = np.kron(coarse, np.ones((2, 2), int))[:h, :w]
    flip = rng.random((h, w)) < 0.15
    lab[flip] = rng.integers(0, k + 1, size=int(flip.sum()))
    return lab


# -- ring areas ---------------------------------------------------------------

def test_square_area():
    assert area_of([(0, 0), (10, 0), (10, 10), (0, 10), (0, 0)]) == 100.0


def test_l_hexomino_area():
    ring = [(0, 0), (30, 0), (30, 10), (10, 10), (10, 40), (0, 40), (0, 0)]
    assert area_of(ring) == 600.0
    assert signed_area(ring) == 600.0
    assert signed_area(ring[::-1]) == -600.0
    assert area_of(ring[::-1]) == 600.0


def test_open_ring_rejected():
    with pytest.raises(OpenRing):
        area_of([(0, 0), (10, 0), (10, 10), (0, 10)])


# -- polygonize ---------------------------------------------------------------

def test_single_pixel():
    (p,) = polygonize(labels([[7]]))
    assert p.id == 7 and p.area == 100.0
    assert area_of(p.exterior) == 100.0
    assert signed_area(p.exterior) > 0
    assert p.exterior[0, 0] == 500000.0 and p.exterior[0, 1] in (3700000.0, 3699990.0)


def test_two_by_two_block():
    (p,) = polygonize(labels(np.ones((2, 2), int)))
    assert p.area == 400.0
    assert len(p.exterior) == 5  # four corners, closed


def test_ring_with_hole():
    arr = np.ones((3, 3), int)
    arr[1, 1] = 0
    (p,) = polygonize(labels(arr))
    assert p.area == 800.0
    assert len(p.interiors) == 1
    assert signed_area(p.interiors[0]) < 0
    assert _shape(p).area == 800.0
    assert _shape(p).is_valid


def test_islands_are_separate_parts():
    arr = np.array([[3, 0, 3], [0, 0, 0], [0, 0, 3]])
    polys = polygonize(labels(arr))
    assert [p.id for p in polys] == [3, 3, 3]
    assert [p.properties["part"] for p in polys] == [0, 1, 2]


def test_diagonal_touch_gives_valid_shapes():
    arr = np.array([[1, 0, 1], [0, 1, 0], [1, 0, 1]])
    polys = polygonize(labels(arr))
    assert len(polys) == 5
    for p in polys:
        assert _shape(p).is_valid


def test_all_zero_gives_nothing():
    assert polygonize(labels(np.zeros((4, 4), int))) == []


def test_rotated_grid_rejected():
    gt = GeoTransform(0, 0, 10, -10, row_rotation=1.0)
    with pytest.raises(RotatedGridUnsupported):
        polygonize(labels([[1]], gt=gt))


def test_south_up_grid_keeps_orientation():
    gt = GeoTransform(0, 0, 10, 10)
    arr = np.ones((3, 3), int)
    arr[1, 1] = 0
    (p,) = polygonize(labels(arr, gt=gt))
    assert signed_area(p.exterior) > 0 and signed_area(p.interiors[0]) < 0
    assert np.array_equal(rasterize([p], labels(arr, gt=gt)).labels, arr)


def test_conservation_validity_and_round_trip(rng):
    for _ in range(30):
        lab = _random_labels(rng, int(rng.integers(3, 25)), int(rng.integers(3, 25)), 4)
        r = labels(lab)
        polys = polygonize(r)
        total = sum(area_of(p.exterior) - sum(area_of(h) for h in p.interiors) for p in polys)
        assert total == pytest.approx(np.count_nonzero(lab) * 100.0, rel=1e-9)
        assert sum(p.area for p in polys) == np.count_nonzero(lab) * 100.0
        for p in polys:
            assert _shape(p).is_valid
        assert np.array_equal(rasterize(polys, r).labels, lab)


# -- RDP ------------------------------------------------------------------------

def _poly(ring, interiors=()):
    ring = np.asarray(ring, dtype=float)
    return FieldPolygon(1, ring, tuple(np.asarray(h, float) for h in interiors), area_of(ring))


def test_rdp_zero_epsilon_is_identity():
    p = polygonize(labels(_random_labels(np.random.default_rng(1), 12, 12, 1)))[0]
    q = simplify_rdp(p, 0.0)
    assert all(np.array_equal(a, b) for a, b in zip(p.rings, q.rings))


def test_rdp_drops_collinear_points():
    ring = [(0, 0), (5, 0), (10, 0), (10, 5), (10, 10), (5, 10), (0, 10), (0, 5), (0, 0)]
    q = simplify_rdp(_poly(ring), 0.5)
    assert len(q.exterior) == 5
    assert q.area == 100.0


def test_rdp_small_square_unchanged():
    ring = [(0, 0), (10, 0), (10, 10), (0, 10), (0, 0)]
    q = simplify_rdp(_poly(ring), 1.0)
    assert len(q.exterior) == 5
    assert Polygon(q.exterior).equals(Polygon(ring))
    assert "rdp_degenerate" not in q.properties


def test_rdp_collapse_keeps_original_and_flags():
    ring = [(0, 0), (100, 0), (100, 1), (0, 1), (0, 0)]
    q = simplify_rdp(_poly(ring), 5.0)
    assert q.properties.get("rdp_degenerate") is True
    assert np.array_equal(q.exterior, np.asarray(ring, float))


def test_rdp_negative_epsilon():
    with pytest.raises(ValueError):
        simplify_rdp(_poly([(0, 0), (1, 0), (1, 1), (0, 0)]), -1)


@pytest.mark.parametrize("eps", [1.0, 10.0, 25.0])
def test_rdp_bound_and_idempotence(rng, eps):
    for _ in range(15):
        for p in polygonize(labels(_random_labels(rng, 30, 30, 3))):
            q = simplify_rdp(p, eps)
            for orig, simp in zip(p.rings, q.rings):
                assert max(distance_to_ring(v, simp) for v in orig) <= eps + 1e-9
            again = simplify_rdp(q, eps)
            assert all(np.array_equal(a, b) for a, b in zip(q.rings, again.rings))


# -- rasterize / GeoJSON ------------------------------------------------------

def test_rasterize_simplified_square():
    ring = [(500000, 3699900), (500100, 3699900), (500100, 3700000), (500000, 3700000), (500000, 3699900)]
    out = rasterize([_poly(ring)], labels(np.zeros((12, 12), int))).labels
    assert out[:10, :10].all() and not out[10:, :].any() and not out[:, 10:].any()


def test_geojson_round_trip_full_precision(tmp_path):
    gt = GeoTransform(123456.789012345, 3700000.123456789, 0.1, -0.1)
    polys = polygonize(labels(np.array([[1, 1], [0, 2]]), gt=gt))
    polys = [p.with_properties(wheat_fraction=0.5, is_wheat=False) for p in polys]
    path = tmp_path / "f.geojson"
    write_geojson(polys, path, CRS)
    fc = json.loads(path.read_text())
    assert fc["type"] == "FeatureCollection"
    assert fc["crs"]["properties"]["name"] == CRS
    assert fc["features"][0]["properties"]["id"] == 1
    back = read_geojson(path)
    for a, b in zip(polys, back):
        assert a.id == b.id and a.area == b.area
        assert np.array_equal(a.exterior, b.exterior)
        assert b.properties["is_wheat"] is False


def test_feature_is_shapely_readable():
    polys = polygonize(labels(np.array([[1, 1, 1], [1, 0, 1], [1, 1, 1]])))
    geom = shapely.geometry.shape(to_feature_collection(polys)["features"][0]["geometry"])
    assert geom.is_valid and geom.area == 800.0
    assert not geom.contains(Point(500015, 3699985))
