"""Command-line interface: ``fieldmap <subcommand> ...``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from fieldmap import __version__
from fieldmap.change import YearMask, flow_table, write_flows_csv, write_summaries_csv, year_summary
from fieldmap.config import PipelineConfig
from fieldmap.errors import ConfigError, FieldmapError
from fieldmap.fusion import fuse, write_report_csv
from fieldmap.metrics import confusion, report, write_reports_csv, write_reports_json
from fieldmap.pipeline import StageError, delineate, run_pipeline
from fieldmap.raster import (
    BinaryMask,
    read_header,
    read_labels,
    read_mask,
    read_raster,
    write_labels,
    write_mask,
    write_raster,
)
from fieldmap.synth import SceneSpec, generate
from fieldmap.threshold import binarize
from fieldmap.vectorize import polygonize, read_geojson, write_geojson

log = logging.getLogger("fieldmap")


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------

def _load_config(args) -> PipelineConfig:
    cfg = PipelineConfig()
    if getattr(args, "config", None):
        try:
            with open(args.config) as fh:
                d = json.load(fh)
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"cannot read config {args.config}: {e}") from None
        # A run manifest can be replayed: take its effective config.
        if isinstance(d, dict) and "config" in d and "tool" in d:
            d = d["config"]
        if not isinstance(d, dict):
            raise ConfigError(f"config {args.config} must be a JSON object")
        cfg = PipelineConfig.from_dict(d)
    return cfg.override(
        t_boundary=getattr(args, "t_boundary", None),
        t_field=getattr(args, "t_field", None),
        min_field_area=getattr(args, "min_area", None),
        rdp_epsilon=getattr(args, "rdp_epsilon", None),
        wheat_overlap_threshold=getattr(args, "overlap", None),
        connectivity=getattr(args, "connectivity", None),
    )


def _read(stage: str, fn, path):
    try:
        return fn(path)
    except FieldmapError as e:
        raise StageError(stage, type(e)(f"{path}: {e}")) from e


def _write_manifest(path: Path, command: str, config, inputs: dict, outputs: dict,
                    timings: dict, jobs: int) -> None:
    manifest = {
        "tool": "fieldmap",
        "version": __version__,
        "command": command,
        "config": config.to_dict() if config is not None else None,
        "jobs": jobs,
        "inputs": {k: str(v) for k, v in inputs.items()},
        "outputs": {k: str(v) for k, v in outputs.items()},
        "timing_seconds": timings,
    }
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")


def _scene_dirs(out_dir: Path, n: int) -> list[Path]:
    if n == 1:
        return [out_dir]
    return [out_dir / f"scene{i:03d}" for i in range(n)]


def _map(jobs: int, fn, items):
    if jobs <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(fn, items))


def _paired(name_a, a, name_b, b):
    if b is not None and len(a) != len(b):
        raise ConfigError(f"{name_a} and {name_b} need the same number of paths ({len(a)} vs {len(b)})")


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_delineate(args) -> int:
    cfg = _load_config(args)
    _paired("--field", args.field, "--boundary", args.boundary)
    out_dir = Path(args.out_dir)
    dirs = _scene_dirs(out_dir, len(args.field))

    def one(i):
        t0 = time.perf_counter()
        field = _read("read_inputs", read_raster, args.field[i])
        bound = _read("read_inputs", read_raster, args.boundary[i])
        d = delineate(field, bound, cfg)
        dest = dirs[i]
        labels_path = dest / "labels"
        geojson_path = dest / "fields.geojson"
        write_labels(d.labels, labels_path)
        write_geojson(d.polygons, geojson_path, d.labels.crs)
        timings = dict(d.timings, total=time.perf_counter() - t0)
        _write_manifest(dest / "manifest.json", "delineate", cfg,
                        {"field": args.field[i], "boundary": args.boundary[i]},
                        {"labels": labels_path.with_suffix(".json"), "polygons": geojson_path},
                        timings, args.jobs)
        return dest, len(d.polygons)

    for dest, n in _map(args.jobs, one, list(range(len(args.field)))):
        print(f"{dest}: {n} fields")
    return 0


def cmd_pipeline(args) -> int:
    cfg = _load_config(args)
    wheat_paths = args.wheat if args.wheat else args.wheat_mask
    _paired("--field", args.field, "--boundary", args.boundary)
    _paired("--field", args.field, "--wheat/--wheat-mask", wheat_paths)
    out_dir = Path(args.out_dir)
    dirs = _scene_dirs(out_dir, len(args.field))

    def one(i):
        t0 = time.perf_counter()
        field = _read("read_inputs", read_raster, args.field[i])
        bound = _read("read_inputs", read_raster, args.boundary[i])
        if args.wheat:
            wheat = _read("read_inputs", read_raster, args.wheat[i])
        else:
            wheat = _read("read_inputs", read_mask, args.wheat_mask[i])
        res = run_pipeline(field, bound, wheat, cfg, method=args.method)
        dest = dirs[i]
        labels_path = dest / "labels"
        wheat_path = dest / "wheat_fields"
        geojson_path = dest / "wheat_fields.geojson"
        fusion_path = dest / "fusion.csv"
        write_labels(res.labels, labels_path)
        write_mask(res.predicted_wheat(), wheat_path)
        write_geojson(res.polygons, geojson_path, res.labels.crs)
        write_report_csv(res.report, fusion_path)
        timings = dict(res.timings, total=time.perf_counter() - t0)
        inputs = {"field": args.field[i], "boundary": args.boundary[i],
                  ("wheat" if args.wheat else "wheat_mask"): wheat_paths[i]}
        _write_manifest(dest / "manifest.json", "pipeline", cfg, inputs,
                        {"labels": labels_path.with_suffix(".json"),
                         "wheat_fields": wheat_path.with_suffix(".json"),
                         "polygons": geojson_path, "fusion": fusion_path},
                        timings, args.jobs)
        n_wheat = int(res.report.is_wheat.sum())
        return dest, len(res.polygons), n_wheat

    for dest, n, nw in _map(args.jobs, one, list(range(len(args.field)))):
        print(f"{dest}: {n} fields, {nw} labelled wheat")
    return 0


def cmd_fuse(args) -> int:
    cfg = _load_config(args)
    labels = _read("read_inputs", read_labels, args.labels)
    if args.wheat:
        wheat = binarize(_read("read_inputs", read_raster, args.wheat), 0.5)
    else:
        wheat = _read("read_inputs", read_mask, args.wheat_mask)
    try:
        rep = fuse(labels, wheat, cfg.wheat_overlap_threshold)
    except FieldmapError as e:
        raise StageError("fuse", e) from e
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_report_csv(rep, out)
    print(f"{out}: {len(rep)} fields, {int(rep.is_wheat.sum())} labelled wheat")
    return 0


def cmd_metrics(args) -> int:
    _paired("--pred", args.pred, "--truth", args.truth)
    rows = []
    pooled = None
    per_scene = []
    for i, (p, t) in enumerate(zip(args.pred, args.truth)):
        pred = _read("read_inputs", read_mask, p)
        truth = _read("read_inputs", read_mask, t)
        try:
            c = confusion(pred, truth)
            rep = report(c)
        except FieldmapError as e:
            raise StageError("metrics", e) from e
        scene = args.scene[i] if args.scene and i < len(args.scene) else Path(p).stem
        rows.append((args.method, scene, rep))
        per_scene.append(rep)
        pooled = c if pooled is None else pooled + c
    if len(rows) > 1:
        rows.append((args.method, "pooled", report(pooled)))
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_reports_csv(rows, out_dir / "metrics.csv")
    write_reports_json(rows, out_dir / "metrics.json")
    if len(per_scene) > 1:
        mean = {m: float(np.mean([getattr(r, m) for r in per_scene]))
                for m in ("iou", "precision", "recall", "f1", "accuracy")}
        with open(out_dir / "metrics_mean.json", "w") as fh:
            json.dump({"method": args.method, "scenes": len(per_scene), **mean}, fh, indent=2)
            fh.write("\n")
    for method, scene, rep in rows:
        flags = f" undefined={','.join(sorted(rep.undefined))}" if rep.undefined else ""
        print(f"{method} {scene}: iou={rep.iou:.4f} precision={rep.precision:.4f} "
              f"recall={rep.recall:.4f} f1={rep.f1:.4f} accuracy={rep.accuracy:.4f}{flags}")
    return 0


def _year_pairs(items, flag) -> dict[int, str]:
    out = {}
    for item in items or []:
        year, sep, path = item.partition("=")
        if not sep or not year.strip().lstrip("-").isdigit():
            raise ConfigError(f"{flag} expects YEAR=PATH, got {item!r}")
        out[int(year)] = path
    return out


def cmd_transitions(args) -> int:
    cfg = _load_config(args)
    masks = _year_pairs(args.mask, "--mask")
    field_files = _year_pairs(args.fields, "--fields")
    year_masks = []
    for year in sorted(masks):
        m = _read("read_inputs", read_mask, masks[year])
        count = len(_read("read_inputs", read_geojson, field_files[year])) if year in field_files else None
        year_masks.append(YearMask(year, m, count))
    try:
        flows = flow_table(year_masks, args.gaps)
        summaries = [year_summary(m, cfg.connectivity) for m in year_masks]
    except FieldmapError as e:
        raise StageError("transitions", e) from e
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_flows_csv(flows, out_dir / "flows.csv")
    write_summaries_csv(summaries, out_dir / "years.csv")
    print(f"{out_dir}: {len(summaries)} years, {len(flows)} flows")
    return 0


def cmd_synth(args) -> int:
    spec = SceneSpec(rng_seed=args.seed, width=args.width, height=args.height, n_parcels=args.parcels,
                     boundary_width=args.boundary_width, noise_sigma=args.noise,
                     wheat_fraction=args.wheat_fraction, pixel_size=args.pixel_size, crs=args.crs)
    try:
        scene = generate(spec)
    except FieldmapError as e:
        raise StageError("synth", e) from e
    out = Path(args.out_dir)
    write_labels(scene.truth_labels, out / "truth_labels")
    write_mask(scene.truth_wheat, out / "truth_wheat")
    write_raster(scene.field_scores, out / "field_scores")
    write_raster(scene.boundary_scores, out / "boundary_scores")
    write_raster(scene.wheat_scores, out / "wheat_scores")
    polys = polygonize(scene.truth_labels)
    polys = [p.with_properties(is_wheat=bool(scene.wheat_parcels[p.id - 1]),
                               wheat_fraction=float(scene.wheat_parcels[p.id - 1])) for p in polys]
    write_geojson(polys, out / "truth.geojson", spec.crs)
    with open(out / "scene.json", "w") as fh:
        json.dump(spec.__dict__, fh, indent=2)
        fh.write("\n")
    print(f"{out}: {spec.width}x{spec.height}, {spec.n_parcels} parcels, "
          f"{int(scene.wheat_parcels.sum())} wheat")
    return 0


def cmd_inspect(args) -> int:
    hdr = _read("read_inputs", read_header, args.path)
    gt = hdr["geotransform"]
    print(f"path:         {args.path}")
    print(f"size:         {hdr['width']} x {hdr['height']}")
    print(f"dtype:        {hdr['dtype']}")
    print(f"crs:          {hdr['crs']}")
    print(f"geotransform: {gt.to_list()}")
    print(f"nodata:       {hdr['nodata_count']}")
    if hdr["dtype"] == "f32le":
        r = _read("read_inputs", read_raster, args.path)
        v = r.values[~r.nodata]
        if v.size:
            print(f"min/mean/max: {v.min():.6g} / {v.mean():.6g} / {v.max():.6g}")
    else:
        lab = _read("read_inputs", read_labels, args.path).labels
        nz = lab[lab > 0]
        print(f"labelled px:  {nz.size}")
        print(f"labels:       {np.unique(nz).size} distinct, max {int(lab.max()) if lab.size else 0}")
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def _add_config_flags(p, overlap_only=False):
    g = p.add_argument_group("pipeline configuration (defaults < --config < flags)")
    g.add_argument("--config", help="JSON file with PipelineConfig keys, or a run manifest")
    if not overlap_only:
        g.add_argument("--t-boundary", type=float, help="boundary score threshold (default 0.8)")
        g.add_argument("--t-field", type=float, help="field score threshold (default 0.2)")
        g.add_argument("--min-area", type=float, help="minimum field area, map units^2 (default 1000)")
        g.add_argument("--rdp-epsilon", type=float, help="simplification tolerance, map units (default 10)")
        g.add_argument("--connectivity", type=int, choices=(4, 8), help="pixel connectivity (default 4)")
    g.add_argument("--overlap", type=float, help="wheat overlap fraction, strict (default 0.5)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fieldmap", description=__doc__)
    parser.add_argument("--version", action="version", version=f"fieldmap {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("delineate", help="score rasters -> field labels and polygons")
    p.add_argument("--field", nargs="+", required=True, help="field score raster(s)")
    p.add_argument("--boundary", nargs="+", required=True, help="boundary score raster(s)")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--jobs", type=int, default=1, help="scenes processed concurrently")
    _add_config_flags(p)
    p.set_defaults(func=cmd_delineate)

    p = sub.add_parser("pipeline", help="delineate, then label fields as wheat")
    p.add_argument("--field", nargs="+", required=True)
    p.add_argument("--boundary", nargs="+", required=True)
    w = p.add_mutually_exclusive_group(required=True)
    w.add_argument("--wheat", nargs="+", help="wheat score raster(s), binarized at 0.5")
    w.add_argument("--wheat-mask", nargs="+", help="pre-binarized wheat mask(s)")
    p.add_argument("--method", choices=("gradual", "argmax"), default="gradual")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--jobs", type=int, default=1)
    _add_config_flags(p)
    p.set_defaults(func=cmd_pipeline)

    p = sub.add_parser("fuse", help="per-field wheat overlap report")
    p.add_argument("--labels", required=True)
    w = p.add_mutually_exclusive_group(required=True)
    w.add_argument("--wheat")
    w.add_argument("--wheat-mask")
    p.add_argument("--out", required=True, help="output CSV")
    p.add_argument("--jobs", type=int, default=1)
    _add_config_flags(p, overlap_only=True)
    p.set_defaults(func=cmd_fuse)

    p = sub.add_parser("metrics", help="IoU / precision / recall / F1 / accuracy")
    p.add_argument("--pred", nargs="+", required=True)
    p.add_argument("--truth", nargs="+", required=True)
    p.add_argument("--method", default="prediction")
    p.add_argument("--scene", nargs="+")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("transitions", help="per-year areas and gained/persisted/lost flows")
    p.add_argument("--mask", nargs="+", required=True, metavar="YEAR=PATH")
    p.add_argument("--fields", nargs="+", metavar="YEAR=GEOJSON",
                   help="fused polygons per year; their count replaces connected components")
    p.add_argument("--gaps", nargs="+", type=int, default=[1, 2])
    p.add_argument("--out-dir", required=True)
    p.add_argument("--jobs", type=int, default=1)
    _add_config_flags(p)
    p.set_defaults(func=cmd_transitions)

    p = sub.add_parser("synth", help="write a synthetic scene with ground truth")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--width", type=int, default=256)
    p.add_argument("--height", type=int, default=256)
    p.add_argument("--parcels", type=int, default=40)
    p.add_argument("--boundary-width", type=float, default=2.0)
    p.add_argument("--noise", type=float, default=0.15)
    p.add_argument("--wheat-fraction", type=float, default=0.5)
    p.add_argument("--pixel-size", type=float, default=10.0)
    p.add_argument("--crs", default="EPSG:32636")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("inspect", help="print a raster header and value statistics")
    p.add_argument("path")
    p.set_defaults(func=cmd_inspect)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "jobs", 1) < 1:
        parser.error("--jobs must be >= 1")
    try:
        return args.func(args)
    except StageError as e:
        print(f"fieldmap {args.command}: error in stage {e.stage}: "
              f"{type(e.error).__name__}: {e.error}", file=sys.stderr)
        return 1
    except FieldmapError as e:
        print(f"fieldmap {args.command}: error: {type(e).__name__}: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
