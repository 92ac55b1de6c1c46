import numpy as np
import pytest

from conftest import labels, mask
from fieldmap.errors import GridMismatch, UnknownLabel
from fieldmap.fusion import annotate, fuse, read_report_csv, wheat_field_mask, write_report_csv
from fieldmap.vectorize import polygonize


def _field(n_wheat, size=10):
    lab = np.ones((1, size), int)
    bits = np.zeros((1, size), bool)
    bits[0, :n_wheat] = True
    return labels(lab), mask(bits)


def test_six_of_ten_is_wheat():
    e = fuse(*_field(6)).entry(1)
    assert e["wheat_fraction"] == 0.6 and e["is_wheat"] is True


def test_exactly_half_is_not_wheat():
    e = fuse(*_field(5)).entry(1)
    assert e["wheat_fraction"] == 0.5 and e["is_wheat"] is False


def test_fully_inside_mask():
    e = fuse(*_field(10)).entry(1)
    assert e["wheat_fraction"] == 1.0 and e["is_wheat"] is True


def test_report_lists_present_labels_only():
    r = fuse(labels([[0, 2, 2, 9]]), mask([[1, 1, 0, 1]]))
    assert r.label.tolist() == [2, 9]
    assert r.pixel_count.tolist() == [2, 1]
    assert r.wheat_pixel_count.tolist() == [1, 1]
    assert r.wheat_labels().tolist() == [9]


def test_invalid_wheat_pixels_count_as_non_wheat():
    r = fuse(labels([[1, 1]]), mask([[1, 1]], valid=[[True, False]]))
    assert r.entry(1)["wheat_pixel_count"] == 1


def test_unknown_label():
    with pytest.raises(UnknownLabel):
        fuse(*_field(3)).entry(4)


def test_grid_mismatch():
    with pytest.raises(GridMismatch):
        fuse(labels(np.ones((2, 2), int)), mask(np.ones((2, 3))))


def test_annotate():
    lab, m = _field(6)
    report = fuse(lab, m)
    assert annotate([], report) == []
    (p,) = annotate(polygonize(lab), report)
    assert p.properties["is_wheat"] is True
    assert p.properties["wheat_fraction"] == 0.6
    lab2 = labels(np.full((1, 10), 3))
    with pytest.raises(UnknownLabel):
        annotate(polygonize(lab2), report)


def test_wheat_field_mask():
    r = fuse(labels([[1, 1, 2, 2]]), mask([[1, 1, 1, 0]]))
    assert wheat_field_mask(labels([[1, 1, 2, 2]]), r).bits.tolist() == [[True, True, False, False]]


def test_properties(rng):
    for _ in range(50):
        lab = rng.integers(0, 8, size=(20, 20))
        bits = rng.random((20, 20)) < rng.random()
        r = fuse(labels(lab), mask(bits))
        # wheat fields never exceed the wheat pixels available
        assert r.pixel_count[r.is_wheat].sum() <= 2 * bits.sum()
        assert r.wheat_pixel_count.sum() == np.count_nonzero(bits & (lab > 0))
        # relabelling does not change the decisions
        perm = np.concatenate([[0], rng.permutation(np.arange(1, 8))])
        r2 = fuse(labels(perm[lab]), mask(bits))
        d1 = dict(zip(perm[r.label].tolist(), r.is_wheat.tolist()))
        d2 = dict(zip(r2.label.tolist(), r2.is_wheat.tolist()))
        assert d1 == d2
        # a higher threshold never adds wheat fields
        prev = None
        for t in (0.1, 0.3, 0.5, 0.7, 0.9):
            cur = set(fuse(labels(lab), mask(bits), t).wheat_labels().tolist())
            assert prev is None or cur <= prev
            prev = cur


def test_csv_round_trip(tmp_path):
    r = fuse(labels([[1, 1, 1, 2]]), mask([[1, 0, 1, 1]]))
    write_report_csv(r, tmp_path / "f.csv")
    text = (tmp_path / "f.csv").read_text().splitlines()
    assert text[0] == "label,pixel_count,wheat_pixel_count,wheat_fraction,is_wheat"
    assert text[1].startswith("1,3,2,0.666") and text[1].endswith(",true")
    back = read_report_csv(tmp_path / "f.csv")
    assert back.label.tolist() == [1, 2] and back.is_wheat.tolist() == [True, True]
