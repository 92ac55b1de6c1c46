import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from conftest import GT10, CRS, labels, mask, prob
from fieldmap.cli import main
from fieldmap.raster import read_labels, read_mask, write_labels, write_mask, write_raster


@pytest.fixture
def scene(tmp_path):
    assert main(["synth", "--seed", "3", "--width", "64", "--height", "64", "--parcels", "6",
                 "--out-dir", str(tmp_path / "scene")]) == 0
    return tmp_path / "scene"


def _pipeline(scene, out, *extra):
    return main(["pipeline", "--field", str(scene / "field_scores"), "--boundary", str(scene / "boundary_scores"),
                 "--wheat", str(scene / "wheat_scores"), "--out-dir", str(out), *extra])


def test_synth_outputs(scene):
    for name in ("truth_labels.json", "truth_labels.bin", "field_scores.bin", "truth.geojson", "scene.json"):
        assert (scene / name).exists()


def test_pipeline_outputs_and_manifest(scene, tmp_path, capsys):
    out = tmp_path / "run"
    assert _pipeline(scene, out, "--t-field", "0.3") == 0
    man = json.loads((out / "manifest.json").read_text())
    assert man["config"]["t_field"] == 0.3
    assert man["config"]["t_boundary"] == 0.8
    assert "watershed" in man["timing_seconds"]
    fc = json.loads((out / "wheat_fields.geojson").read_text())
    rows = list(csv.DictReader(open(out / "fusion.csv")))
    assert len(rows) == len({f["properties"]["id"] for f in fc["features"]})
    lab = read_labels(out / "labels")
    wheat = read_mask(out / "wheat_fields")
    assert lab.shape == wheat.shape == (64, 64)
    assert "labelled wheat" in capsys.readouterr().out


def test_config_file_then_flags(scene, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"t_field": 0.25, "min_field_area": 500}))
    out = tmp_path / "run"
    assert _pipeline(scene, out, "--config", str(cfg), "--min-area", "700") == 0
    c = json.loads((out / "manifest.json").read_text())["config"]
    assert c["t_field"] == 0.25 and c["min_field_area"] == 700


def test_all_zero_field_succeeds(tmp_path):
    write_raster(prob(np.zeros((8, 8))), tmp_path / "f")
    write_raster(prob(np.zeros((8, 8))), tmp_path / "b")
    assert main(["delineate", "--field", str(tmp_path / "f"), "--boundary", str(tmp_path / "b"),
                 "--out-dir", str(tmp_path / "o")]) == 0
    assert json.loads((tmp_path / "o" / "fields.geojson").read_text())["features"] == []


def test_mismatched_grids_exit_one(tmp_path, capsys):
    write_raster(prob(np.zeros((8, 8))), tmp_path / "f")
    write_raster(prob(np.zeros((8, 9))), tmp_path / "b")
    rc = main(["delineate", "--field", str(tmp_path / "f"), "--boundary", str(tmp_path / "b"),
               "--out-dir", str(tmp_path / "o")])
    assert rc == 1
    err = capsys.readouterr().err
    assert "stage check_inputs" in err and "GridMismatch" in err


def test_missing_input_exit_one(tmp_path, capsys):
    rc = main(["delineate", "--field", str(tmp_path / "nope"), "--boundary", str(tmp_path / "nope"),
               "--out-dir", str(tmp_path / "o")])
    assert rc == 1
    assert "read_inputs" in capsys.readouterr().err


def test_bad_threshold_rejected(scene, tmp_path, capsys):
    assert _pipeline(scene, tmp_path / "o", "--t-field", "1.5") == 1
    assert "ConfigError" in capsys.readouterr().err


def test_multi_scene_jobs(scene, tmp_path):
    args = ["pipeline", "--field", *[str(scene / "field_scores")] * 2,
            "--boundary", *[str(scene / "boundary_scores")] * 2,
            "--wheat", *[str(scene / "wheat_scores")] * 2, "--jobs", "2", "--out-dir", str(tmp_path / "o")]
    assert main(args) == 0
    a = (tmp_path / "o" / "scene000" / "labels.bin").read_bytes()
    assert a == (tmp_path / "o" / "scene001" / "labels.bin").read_bytes()


def test_fuse_command(tmp_path):
    write_labels(labels(np.ones((1, 10), int)), tmp_path / "l")
    bits = np.zeros((1, 10), bool)
    bits[0, :6] = True
    write_mask(mask(bits), tmp_path / "w")
    assert main(["fuse", "--labels", str(tmp_path / "l"), "--wheat-mask", str(tmp_path / "w"),
                 "--out", str(tmp_path / "f.csv")]) == 0
    (row,) = csv.DictReader(open(tmp_path / "f.csv"))
    assert row["is_wheat"] == "true" and row["wheat_fraction"] == "0.6"


def test_metrics_command(tmp_path):
    write_mask(mask([[1, 1], [1, 0]]), tmp_path / "p")
    write_mask(mask([[1, 1], [0, 1]]), tmp_path / "t")
    write_mask(mask([[1, 1], [0, 1]]), tmp_path / "p2")
    assert main(["metrics", "--pred", str(tmp_path / "p"), str(tmp_path / "p2"),
                 "--truth", str(tmp_path / "t"), str(tmp_path / "t"), "--out-dir", str(tmp_path / "m")]) == 0
    rows = list(csv.DictReader(open(tmp_path / "m" / "metrics.csv")))
    assert [r["scene"] for r in rows] == ["p", "p2", "pooled"]
    assert float(rows[0]["iou"]) == 0.5 and float(rows[1]["iou"]) == 1.0
    assert float(rows[2]["iou"]) == 5 / 7
    assert json.loads((tmp_path / "m" / "metrics_mean.json").read_text())["iou"] == 0.75


def test_transitions_command(tmp_path):
    for year, bits in ((2019, [[1, 1, 0]]), (2020, [[0, 1, 1]]), (2021, [[1, 1, 1]])):
        write_mask(mask(bits), tmp_path / str(year))
    args = ["transitions", "--out-dir", str(tmp_path / "o"), "--mask",
            *[f"{y}={tmp_path / str(y)}" for y in (2019, 2020, 2021)]]
    assert main(args) == 0
    flows = list(csv.DictReader(open(tmp_path / "o" / "flows.csv")))
    assert [(f["year_from"], f["year_to"]) for f in flows] == [("2019", "2020"), ("2020", "2021"), ("2019", "2021")]
    assert flows[0]["gained_km2"] == repr(100 * 1e-6)
    years = list(csv.DictReader(open(tmp_path / "o" / "years.csv")))
    assert years[2]["area_km2"] == repr(300 * 1e-6)


def test_transitions_bad_pair(tmp_path, capsys):
    assert main(["transitions", "--mask", "abc", "--out-dir", str(tmp_path)]) == 1
    assert "YEAR=PATH" in capsys.readouterr().err


def test_inspect(scene, capsys):
    assert main(["inspect", str(scene / "field_scores")]) == 0
    out = capsys.readouterr().out
    assert "64 x 64" in out and "EPSG:32636" in out


def test_module_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "fieldmap", "--version"], capture_output=True, text=True)
    assert r.returncode == 0 and "fieldmap" in r.stdout
