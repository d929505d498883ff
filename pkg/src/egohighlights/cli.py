"""Command line interface.

Subcommands: score, album, geo (nodes/score), baseline, eval-crops, inspect.
Exit codes: 0 success, 1 pipeline failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Optional

from . import geo as geomod
from .crop_eval import crop_improvement, lambda_sweep, load_crop_dataset, sweep_to_csv
from .ingest import filter_by_intervals, load_corpus, load_manifest
from .pipeline import (
    PipelineConfig,
    PipelineError,
    RunOptions,
    geo_intervals,
    config_to_dict,
    load_pipeline_config,
    run_pipeline,
    write_report,
)
from .ranking import baseline_chrono_uniform, baseline_geo_uniform, export_album
from .aesthetics import (
    ThirdsGeometry,
    composition_details,
    default_bin_table,
    symmetry_overlay,
)
from .segmentation import segment, write_label_png

logger = logging.getLogger("egohighlights")


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--manifest", required=True, help="corpus manifest JSON")
    p.add_argument("--config", help="pipeline config JSON")
    p.add_argument("--out", default="out", help="output directory")
    p.add_argument("--cache-dir", help="stage cache directory")
    p.add_argument("--poi-cache", help="POI cache directory for geo scoring")
    p.add_argument("--parallelism", type=int, default=1)
    p.add_argument("--no-cache", action="store_true", help="disable the stage cache")
    p.add_argument("--window", type=int, help="appearance window size")
    p.add_argument("--beta", type=float, help="shot threshold")


def _load_cfg(args) -> PipelineConfig:
    cfg = load_pipeline_config(args.config) if args.config else PipelineConfig()
    if getattr(args, "k", None):
        cfg.rank.album_size = args.k
    if getattr(args, "window", None):
        cfg.shots.window = args.window
    if getattr(args, "beta", None) is not None:
        cfg.shots.beta = args.beta
    return cfg


def _run_opts(args) -> RunOptions:
    return RunOptions(
        cache_dir=Path(args.cache_dir) if args.cache_dir else None,
        output_dir=Path(args.out),
        parallelism=args.parallelism,
        poi_cache_dir=Path(args.poi_cache) if args.poi_cache else None,
        use_cache=not args.no_cache,
    )


def _pipeline_result(args):
    manifest = load_manifest(args.manifest)
    cfg = _load_cfg(args)
    return run_pipeline(manifest, cfg, _run_opts(args)), cfg


def cmd_score(args) -> int:
    result, _cfg = _pipeline_result(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    report_path = out / "report.json"
    write_report(result.report, report_path)
    print(report_path)
    return 0


def cmd_album(args) -> int:
    result, cfg = _pipeline_result(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_report(result.report, out / "report.json")
    manifest_path = export_album(result.album, out, config_to_dict(cfg))
    print(manifest_path)
    return 0


def cmd_geo(args) -> int:
    track = geomod.parse_track(args.track)
    gcfg = geomod.GeoConfig(
        d_max_km=args.d_max,
        d_min_km=args.d_min,
        node_score_threshold=getattr(args, "threshold", 0.0),
        threshold_is_percentile=getattr(args, "percentile", False),
    )
    nodes = geomod.aggregate_nodes(track, gcfg)
    if args.geo_cmd == "score":
        source = geomod.CachedPoiSource(Path(args.cache))
        geomod.score_nodes(nodes, source, gcfg.poi_radius_km)
        threshold = geomod.score_threshold(nodes, gcfg)
    else:
        threshold = 0.0
    intervals = geomod.importance_intervals(nodes, threshold)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    geojson_path = out / "nodes.geojson"
    with open(geojson_path, "w") as fh:
        json.dump(geomod.nodes_to_geojson(nodes), fh, indent=2, sort_keys=True)
    intervals_path = out / "intervals.json"
    with open(intervals_path, "w") as fh:
        json.dump([list(iv) for iv in intervals], fh)
    print(geojson_path)
    print(intervals_path)
    return 0


def cmd_baseline(args) -> int:
    manifest = load_manifest(args.manifest)
    frames = load_corpus(manifest)
    if args.mode == "geo":
        if manifest.gps_track is None:
            print("error: manifest has no GPS track; use --mode chrono", file=sys.stderr)
            return 1
        track = geomod.parse_track(manifest.gps_track)
        picks = baseline_geo_uniform(track, frames, args.x)
    else:
        # chrono sampling runs over the footage that survives the geo filter
        cfg = load_pipeline_config(args.config) if args.config else PipelineConfig()
        opts = RunOptions(poi_cache_dir=Path(args.poi_cache) if args.poi_cache else None)
        intervals, _reason, _nodes = geo_intervals(manifest, cfg, opts)
        if intervals is not None:
            frames = list(filter_by_intervals(frames, intervals))
            if not frames:
                print("error: geo filter removed every frame", file=sys.stderr)
                return 1
        picks = baseline_chrono_uniform(frames, args.x, intervals)
    doc = [
        {"source_id": f.source_id, "frame_index": f.index, "timestamp": f.timestamp}
        for f in picks
    ]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"baseline_{args.mode}.json"
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2)
    print(path)
    return 0


def cmd_eval_crops(args) -> int:
    cases = load_crop_dataset(args.dataset)
    if not cases:
        print("error: no usable cases in dataset", file=sys.stderr)
        return 1
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.sweep:
        reports = lambda_sweep(cases)
        sweep_to_csv(reports, out / "sweep.csv")
        doc = [
            {"lambda1": r.lambda1, "lambda2": r.lambda2, "percentages": r.percentages,
             "cases": r.case_count, "excluded": r.excluded}
            for r in reports
        ]
        path = out / "sweep.json"
    else:
        r = crop_improvement(cases, args.lambda1, round(1.0 - args.lambda1, 10))
        doc = {"lambda1": r.lambda1, "lambda2": r.lambda2, "percentages": r.percentages,
               "cases": r.case_count, "excluded": r.excluded}
        path = out / "crop_improvement.json"
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
    print(path)
    return 0


def cmd_inspect(args) -> int:
    result, cfg = _pipeline_result(args)
    target = args.frame
    if ":" in target:
        source_id, idx = target.rsplit(":", 1)
    else:
        source_id, idx = None, target
    idx = int(idx)
    pos = None
    for i, f in enumerate(result.frames):
        if f.index == idx and (source_id is None or f.source_id == source_id):
            pos = i
            break
    if pos is None:
        print(f"error: frame {target} not found in scored stream", file=sys.stderr)
        return 1
    f = result.frames[pos]
    s = result.scores[pos]
    table = default_bin_table()
    segmap = segment(f.raster, cfg.segmentation)
    _, best_point, per_point = composition_details(
        segmap, ThirdsGeometry(d_epsilon=cfg.thirds_d_epsilon), table,
        cfg.segmentation.simplicity_m0)
    print(f"frame {f.source_id}:{f.index} t={f.timestamp:.3f}s shot={s.shot_id}")
    for name, value in s.as_dict().items():
        print(f"  {name:6s} {value:.6f}")
    px, py = ThirdsGeometry().points[best_point]
    print(f"  thirds point: #{best_point} ({px:.4f}, {py:.4f})")
    print(f"  per-point composition: {[round(v, 6) for v in per_point]}")
    print(f"  segments: {segmap.segment_count}")
    if args.segments_out:
        write_label_png(segmap, args.segments_out)
        print(f"  label map: {args.segments_out}")
    if args.symmetry_overlay:
        from PIL import Image

        overlay = symmetry_overlay(f.raster, cfg.symmetry)
        Image.fromarray(overlay).save(args.symmetry_overlay)
        print(f"  symmetry overlay: {args.symmetry_overlay}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="egohighlights",
        description="Score long first-person footage for photographic quality "
                    "and build ranked highlight albums.",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("score", help="write the per-frame score report")
    _add_common(p)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("album", help="run the full pipeline and export an album")
    _add_common(p)
    p.add_argument("--k", type=int, help="album size")
    p.set_defaults(func=cmd_album)

    p = sub.add_parser("geo", help="GPS node aggregation and importance scoring")
    geo_sub = p.add_subparsers(dest="geo_cmd", required=True)
    for name in ("nodes", "score"):
        g = geo_sub.add_parser(name)
        g.add_argument("--track", required=True, help="CSV or GPX track file")
        g.add_argument("--d-max", type=float, default=10.0)
        g.add_argument("--d-min", type=float, default=0.5)
        g.add_argument("--out", default="out")
        if name == "score":
            g.add_argument("--cache", required=True, help="POI cache directory")
            g.add_argument("--threshold", type=float, default=0.0)
            g.add_argument("--percentile", action="store_true",
                           help="treat threshold as a percentile of node scores")
        g.set_defaults(func=cmd_geo)

    p = sub.add_parser("baseline", help="geographically or chronologically uniform baseline")
    p.add_argument("--mode", choices=("geo", "chrono"), required=True)
    p.add_argument("--x", type=int, required=True, help="number of frames to select")
    p.add_argument("--manifest", required=True)
    p.add_argument("--config", help="pipeline config JSON (geo settings)")
    p.add_argument("--poi-cache", help="POI cache directory for the geo filter")
    p.add_argument("--out", default="out")
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("eval-crops", help="crop-improvement experiment")
    p.add_argument("--dataset", required=True, help="directory of case directories")
    p.add_argument("--sweep", action="store_true", help="run the lambda1 sweep")
    p.add_argument("--lambda1", type=float, default=0.8)
    p.add_argument("--out", default="out")
    p.set_defaults(func=cmd_eval_crops)

    p = sub.add_parser("inspect", help="print every component score for one frame")
    _add_common(p)
    p.add_argument("--frame", required=True, help="frame id, either INDEX or SOURCE:INDEX")
    p.add_argument("--segments-out", help="write the frame's segment label map PNG here")
    p.add_argument("--symmetry-overlay", help="write the symmetry debug overlay PNG here")
    p.set_defaults(func=cmd_inspect)

    return parser


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.func(args)
    except PipelineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
