"""Command-line interface.

Subcommands:
  clean           remove artifacts from one cloud (or a directory of clouds)
  autocalib       recover per-frame origin offsets, with mean/dispersion
  eval            depthmap quality report against a reference
  synth           render a synthetic scene to cloud/labels/depthmaps
  analyze-widths  removed-artifact width percentiles along epipolar lines

Exit codes: 0 success, 1 bad input or processing failure, 2 empty result.
JSON outputs carry a ``schema_version`` field.  The ``REPLAY_THREADS``
environment variable overrides the frame-level worker count.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import multiprocessing
import os
import sys
from pathlib import Path

import numpy as np

from . import baselines, io_formats, metrics, synth
from .autocalib import auto_calibrate
from .densify import valid_mask
from .geometry import epipolar_direction_field, project, rasterize_px
from .occlusion import ReplayConfig, remove_artifacts

log = logging.getLogger("epidepth")

SCHEMA_VERSION = 1
EXIT_OK = 0
EXIT_ERROR = 1
EXIT_EMPTY = 2


def _replay_config(args) -> ReplayConfig:
    return ReplayConfig(
        lam=args.lam,
        dt=args.dt,
        fov_margin=args.fov_margin,
        d_min=args.dmin,
        autocalib=not args.no_autocalib,
        epsilon=args.epsilon,
    )


def _clean_frame(cloud_path, calib_path, args, out_depth, out_mask, out_diag):
    cloud, _ = io_formats.read_velodyne_bin(cloud_path)
    pose, intr = io_formats.read_calib(calib_path)
    if args.method == "raw":
        depth = baselines.raw_halfocc(cloud, pose, intr)
        result = None
    elif args.method == "mod-half-occ":
        result = baselines.modified_halfocc(cloud, pose, intr, _replay_config(args))
        depth = result.clean_depthmap
    else:
        result = remove_artifacts(
            cloud, pose, intr, _replay_config(args), diagnostics=bool(out_diag)
        )
        depth = result.clean_depthmap

    io_formats.write_depth_png(depth, out_depth)
    if out_mask:
        raw = baselines.raw_halfocc(cloud, pose, intr)
        io_formats.write_mask_png(valid_mask(raw) & ~valid_mask(depth), out_mask)
    if out_diag and result is not None:
        diag = {
            "schema_version": SCHEMA_VERSION,
            "n_points": len(cloud),
            "n_occluded": int(result.occluded.size),
            "n_kept": int(result.kept.size),
        }
        if result.diagnostics is not None:
            d = result.diagnostics
            finite_t = d["t"][np.isfinite(d["t"])]
            finite_g = d["min_g"][np.isfinite(d["min_g"])]
            diag["autocalib_offset"] = [float(x) for x in d["origin_offset"]]
            diag["t"] = [None if not math.isfinite(x) else float(x) for x in d["t"]]
            diag["min_g"] = [
                None if not math.isfinite(x) else float(x) for x in d["min_g"]
            ]
            diag["t_mean"] = float(finite_t.mean()) if finite_t.size else None
            diag["min_g_min"] = float(finite_g.min()) if finite_g.size else None
        with open(out_diag, "w", encoding="utf-8") as fh:
            json.dump(diag, fh)
    return int(np.count_nonzero(valid_mask(depth)))


def _worker_count(args) -> int:
    env = os.environ.get("REPLAY_THREADS")
    if env is not None:
        return max(1, int(env))
    return max(1, args.workers)


def _clean_one_star(job):
    return _clean_frame(*job)


def cmd_clean(args) -> int:
    cloud_path = Path(args.cloud)
    if cloud_path.is_dir():
        frames = sorted(cloud_path.glob("*.bin"))
        if not frames:
            log.error("no .bin clouds in %s", cloud_path)
            return EXIT_ERROR
        out_dir = Path(args.out_depth)
        out_dir.mkdir(parents=True, exist_ok=True)
        jobs = []
        for frame in frames:
            mask = (
                str(Path(args.out_mask) / f"{frame.stem}.png")
                if args.out_mask
                else None
            )
            if args.out_mask:
                Path(args.out_mask).mkdir(parents=True, exist_ok=True)
            jobs.append(
                (frame, args.calib, args, out_dir / f"{frame.stem}.png", mask, None)
            )
        workers = _worker_count(args)
        if workers > 1:
            with multiprocessing.get_context("spawn").Pool(workers) as pool:
                counts = pool.map(_clean_one_star, jobs)
        else:
            counts = [_clean_one_star(job) for job in jobs]
        return EXIT_OK if any(counts) else EXIT_EMPTY

    n_valid = _clean_frame(
        cloud_path, args.calib, args, args.out_depth, args.out_mask, args.out_diag
    )
    return EXIT_OK if n_valid else EXIT_EMPTY


def cmd_autocalib(args) -> int:
    path = Path(args.clouds)
    files = sorted(path.glob("*.bin")) if path.is_dir() else [path]
    if args.sample and len(files) > args.sample:
        stride = len(files) / args.sample
        files = [files[int(i * stride)] for i in range(args.sample)]
    frames = []
    offsets = []
    for f in files:
        try:
            cloud, _ = io_formats.read_velodyne_bin(f)
            res = auto_calibrate(cloud)
        except ValueError as exc:
            log.warning("skipping %s: %s", f, exc)
            continue
        frames.append({"file": str(f), **res.to_json()})
        offsets.append(res.origin_offset)
    if not frames:
        log.error("no parsable clouds")
        return EXIT_ERROR
    arr = np.asarray(offsets)
    doc = {
        "schema_version": SCHEMA_VERSION,
        "frames": frames,
        "mean_offset": [float(x) for x in arr.mean(axis=0)],
        "std_offset": [float(x) for x in arr.std(axis=0)],
    }
    with open(args.out, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2)
    return EXIT_OK


def cmd_eval(args) -> int:
    pred = io_formats.read_depth_png(args.pred)
    gt = io_formats.read_depth_png(args.gt)
    mask = None
    if args.mask:
        raw_mask = io_formats.read_mask_png(args.mask)
        mask = np.where(raw_mask, metrics.REGION_FOREGROUND,
                        metrics.REGION_BACKGROUND).astype(np.uint8)
    try:
        if args.removed_against:
            raw = io_formats.read_depth_png(args.removed_against)
            report = metrics.evaluate_removed(
                raw, pred, gt, mask=mask, region=args.region
            )
        else:
            report = metrics.evaluate(pred, gt, mask=mask, region=args.region)
    except ValueError as exc:
        log.error("%s", exc)
        return EXIT_ERROR
    print(report.format_table())
    if args.out:
        doc = {"schema_version": SCHEMA_VERSION, **report.to_dict()}
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=2)
    return EXIT_OK


def cmd_synth(args) -> int:
    try:
        scene, lidar_origin, pose, intr, beams = synth.load_scene(args.scene)
    except synth.SceneFormatError as exc:
        log.error("invalid scene: %s", exc)
        return EXIT_ERROR
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    cloud = synth.simulate_scan(scene, lidar_origin, beams)
    rgb_origin = lidar_origin - pose.rotation.T @ pose.translation
    labels = synth.visibility_oracle(
        cloud, scene, rgb_origin, lidar_origin=lidar_origin
    )
    io_formats.write_velodyne_bin(out / "cloud.bin", cloud)
    io_formats.write_calib(out / "calib.txt", pose, intr)
    with open(out / "labels.json", "w", encoding="utf-8") as fh:
        json.dump(
            {
                "schema_version": SCHEMA_VERSION,
                "occluded": [bool(x) for x in labels],
            },
            fh,
        )
    raw = baselines.raw_halfocc(cloud, pose, intr)
    result = remove_artifacts(cloud, pose, intr, ReplayConfig())
    io_formats.write_depth_png(raw, out / "raw.png")
    io_formats.write_depth_png(result.clean_depthmap, out / "clean.png")
    return EXIT_OK


def cmd_analyze_widths(args) -> int:
    raw = io_formats.read_depth_png(args.raw)
    clean = io_formats.read_depth_png(args.clean)
    pose, intr = io_formats.read_calib(args.calib)
    field = epipolar_direction_field(intr, pose.translation)
    curve = metrics.artifact_width_histogram(raw, clean, field)
    with open(args.out, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["percentile", "width_px"])
        for p, wdt in enumerate(curve.percentiles):
            writer.writerow([p, f"{wdt:.3f}"])
    if curve.empty:
        log.warning("no removed pixels; empty curve written")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="epidepth",
        description="Remove epipolar-occlusion artifacts from projected "
        "LiDAR depthmaps.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("clean", help="clean one cloud or a directory of clouds")
    p.add_argument("--cloud", required=True, help=".bin cloud file or directory")
    p.add_argument("--calib", required=True, help="calibration text file")
    p.add_argument(
        "--method",
        choices=["replay", "raw", "mod-half-occ"],
        default="replay",
    )
    p.add_argument("--no-autocalib", action="store_true")
    p.add_argument("--lambda", dest="lam", type=float, default=-math.inf,
                   help="occlusion threshold in pixels (default -inf)")
    p.add_argument("--dt", type=float, default=0.5, help="epipolar step, px")
    p.add_argument("--fov-margin", type=float, default=1.25)
    p.add_argument("--dmin", type=float, default=1.0,
                   help="minimum plausible scene depth, m")
    p.add_argument("--epsilon", type=float, default=0.0,
                   help="extra threshold slack, px")
    p.add_argument("--out-depth", required=True)
    p.add_argument("--out-mask", default=None)
    p.add_argument("--out-diag", default=None)
    p.add_argument("--workers", type=int, default=1,
                   help="frame-level workers in directory mode")
    p.set_defaults(func=cmd_clean)

    p = sub.add_parser("autocalib", help="recover origin offsets")
    p.add_argument("--clouds", required=True, help=".bin file or directory")
    p.add_argument("--sample", type=int, default=0,
                   help="evaluate at most N frames, evenly spaced")
    p.add_argument("--out", required=True, help="output JSON")
    p.set_defaults(func=cmd_autocalib)

    p = sub.add_parser("eval", help="depthmap quality report")
    p.add_argument("--pred", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--mask", default=None,
                   help="8-bit PNG, nonzero = foreground")
    p.add_argument("--region", choices=["all", "fg", "bg"], default="all")
    p.add_argument("--removed-against", default=None,
                   help="raw depth PNG; evaluate only removed pixels")
    p.add_argument("--out", default=None, help="output JSON")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("synth", help="render a synthetic scene")
    p.add_argument("--scene", required=True, help="scene JSON document")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("analyze-widths", help="removed-artifact width CSV")
    p.add_argument("--raw", required=True)
    p.add_argument("--clean", required=True)
    p.add_argument("--calib", required=True)
    p.add_argument("--out", required=True, help="output CSV")
    p.set_defaults(func=cmd_analyze_widths)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, IOError, io_formats.CalibFormatError) as exc:
        log.error("%s", exc)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
