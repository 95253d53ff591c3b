"""Batch pipeline CLI.

Subcommands mirror the two processing branches plus evaluation: ``synth``
materializes a synthetic dataset, ``align`` turns disparity into metric
depth, ``distances`` extracts per-animal distances, ``track`` links them
into depth-aware tracks, and ``eval-depth`` / ``eval-mot`` score results.

Every config field can come from a YAML file (``--config``) or be overridden
by a flag of the same dotted name (e.g. ``--aligner.kind``). Exit codes:
0 success, 1 processing failure, 2 usage/config error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import yaml

from . import evaluation, instances, io_formats, synth, tracking
from .alignment import (
    AffineDepthParams,
    GlobalCalibration,
    RansacConfig,
    Space,
    fit_global_calibration,
    load_params,
    metric_depth_from_disparity_fit,
    ransac_align_disparity,
    save_params,
)
from .geometry import (
    CameraIntrinsics,
    DepthKind,
    apply_affine_depth,
    disparity_to_approx_depth,
)

logger = logging.getLogger("trapdist")

EXIT_OK = 0
EXIT_PROCESSING = 1
EXIT_USAGE = 2


class UsageError(Exception):
    """Bad configuration or inputs; maps to exit code 2."""


class ProcessingError(Exception):
    """A frame or file failed to process; maps to exit code 1."""


@dataclass(frozen=True)
class Opt:
    name: str  # dotted config path
    type: type
    default: object = None
    help: str = ""
    choices: tuple | None = None


def _add_opts(parser: argparse.ArgumentParser, opts: list[Opt]) -> None:
    for o in opts:
        flag = "--" + o.name.replace("_", "-")
        parser.add_argument(
            flag,
            dest=o.name,
            type=o.type,
            choices=o.choices,
            default=None,
            help=o.help + (f" (default: {o.default})" if o.default is not None else ""),
        )


def _flatten(doc: dict, prefix: str = "") -> dict:
    out = {}
    for key, value in doc.items():
        path = f"{prefix}{key}"
        if isinstance(value, dict):
            out.update(_flatten(value, path + "."))
        else:
            out[path] = value
    return out


def _resolve(args: argparse.Namespace, opts: list[Opt]) -> dict:
    """Merge defaults < config file < command-line flags."""
    file_cfg = {}
    if getattr(args, "config", None):
        try:
            with open(args.config, encoding="utf-8") as f:
                doc = yaml.safe_load(f) or {}
        except (OSError, yaml.YAMLError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from exc
        file_cfg = _flatten(doc)
        known = {o.name for o in opts}
        unknown = set(file_cfg) - known
        if unknown:
            raise UsageError(f"unknown config fields: {sorted(unknown)}")
    merged = {}
    for o in opts:
        value = getattr(args, o.name)
        if value is None:
            value = file_cfg.get(o.name, o.default)
            if value is not None and o.type is not None and not isinstance(value, o.type):
                try:
                    value = o.type(value)
                except (TypeError, ValueError) as exc:
                    raise UsageError(f"config field {o.name}: {exc}") from exc
        merged[o.name] = value
    return merged


INTRINSICS_OPTS = [
    Opt("intrinsics.file", str, help="intrinsics JSON written by synth"),
    Opt("intrinsics.focal_px", float, help="explicit focal length in pixels"),
    Opt("intrinsics.hfov_deg", float, help="horizontal field of view in degrees"),
    Opt("intrinsics.width", int, help="image width in pixels"),
    Opt("intrinsics.height", int, help="image height in pixels"),
]


def _resolve_intrinsics(cfg: dict) -> CameraIntrinsics:
    file_path = cfg.get("intrinsics.file")
    explicit = any(
        cfg.get(k) is not None
        for k in ("intrinsics.focal_px", "intrinsics.hfov_deg")
    )
    if file_path and explicit:
        raise UsageError("give either intrinsics.file or explicit intrinsics, not both")
    if file_path:
        try:
            with open(file_path, encoding="utf-8") as f:
                return CameraIntrinsics.from_json_dict(json.load(f))
        except (OSError, ValueError, KeyError) as exc:
            raise UsageError(f"cannot read intrinsics {file_path}: {exc}") from exc
    width = cfg.get("intrinsics.width")
    height = cfg.get("intrinsics.height")
    if width is None or height is None:
        raise UsageError("intrinsics.width and intrinsics.height are required")
    focal = cfg.get("intrinsics.focal_px")
    hfov = cfg.get("intrinsics.hfov_deg")
    if (focal is None) == (hfov is None):
        raise UsageError("give exactly one of intrinsics.focal_px or intrinsics.hfov_deg")
    if focal is not None:
        return CameraIntrinsics(focal, width, height)
    return CameraIntrinsics.from_fov(width, height, hfov)


def _ransac_config(cfg: dict) -> RansacConfig:
    return RansacConfig(
        iterations=cfg["ransac.iterations"],
        inlier_threshold=cfg["ransac.inlier_threshold"],
        min_samples=cfg["ransac.min_samples"],
        seed=cfg["ransac.seed"],
        max_points=cfg["ransac.max_points"],
    )


RANSAC_OPTS = [
    Opt("ransac.iterations", int, 500),
    Opt("ransac.inlier_threshold", float, None, "absolute residual threshold (default: auto)"),
    Opt("ransac.min_samples", int, 2),
    Opt("ransac.seed", int, 0),
    Opt("ransac.max_points", int, 100_000),
]


def _require_dir(path_str: str | None, what: str) -> Path:
    if not path_str:
        raise UsageError(f"{what} is required")
    path = Path(path_str)
    if not path.is_dir():
        raise UsageError(f"{what} {path} is not a directory")
    return path


def _stems(directory: Path, suffix: str) -> list[str]:
    return sorted(p.stem for p in directory.glob(f"*{suffix}"))


# --------------------------------------------------------------------------
# align


ALIGN_OPTS = [
    Opt("input.disparity_dir", str, help="directory of PFM disparity rasters"),
    Opt("input.depth_gt_dir", str, help="directory of PNG16 ground-truth depth"),
    Opt("aligner.kind", str, "ransac", choices=("ransac", "fixed", "global")),
    Opt("aligner.scale", float, help="fixed aligner scale"),
    Opt("aligner.shift", float, help="fixed aligner shift"),
    Opt("aligner.space", str, "disparity", choices=("disparity", "depth")),
    Opt("aligner.calibration", str, help="global calibration JSON (scale/shift)"),
    Opt("output.dir", str),
]


def cmd_align(args: argparse.Namespace) -> int:
    cfg = _resolve(args, ALIGN_OPTS + RANSAC_OPTS)
    disp_dir = _require_dir(cfg["input.disparity_dir"], "input.disparity_dir")
    out_dir = cfg["output.dir"]
    if not out_dir:
        raise UsageError("output.dir is required")
    out = Path(out_dir)
    (out / "metric").mkdir(parents=True, exist_ok=True)
    stems = _stems(disp_dir, ".pfm")
    if not stems:
        raise UsageError(f"no .pfm files in {disp_dir}")

    kind = cfg["aligner.kind"]
    rcfg = _ransac_config(cfg)
    gt_dir: Path | None = None
    if kind == "ransac" or (kind == "global" and not cfg["aligner.calibration"]):
        gt_dir = _require_dir(cfg["input.depth_gt_dir"], "input.depth_gt_dir")
        missing = [s for s in stems if not (gt_dir / f"{s}.png").exists()]
        if missing:
            raise UsageError(f"ground truth missing for frames: {missing[:5]}")

    calibration: GlobalCalibration | None = None
    fixed_params: AffineDepthParams | None = None
    if kind == "fixed":
        if cfg["aligner.scale"] is None or cfg["aligner.shift"] is None:
            raise UsageError("fixed aligner needs aligner.scale and aligner.shift")
        fixed_params = AffineDepthParams(
            cfg["aligner.scale"], cfg["aligner.shift"], Space(cfg["aligner.space"])
        )
        if fixed_params.space is Space.DEPTH:
            if not cfg["aligner.calibration"]:
                raise UsageError(
                    "a depth-space fixed aligner needs aligner.calibration for "
                    "the disparity inversion stage"
                )
            calibration = _load_calibration(cfg["aligner.calibration"])
        save_params(out / "align_params.json", fixed_params)
    elif kind == "global":
        if cfg["aligner.calibration"]:
            calibration = _load_calibration(cfg["aligner.calibration"])
        else:
            logger.info("fitting global calibration over %d frames", len(stems))
            pairs = [
                (
                    io_formats.load_disparity(disp_dir / f"{s}.pfm"),
                    io_formats.load_depth_png16(
                        gt_dir / f"{s}.png", DepthKind.GROUND_TRUTH
                    ),
                )
                for s in stems
            ]
            calibration = fit_global_calibration(pairs, rcfg)
        save_params(out / "align_params.json", calibration)

    if kind == "ransac":
        (out / "params").mkdir(exist_ok=True)

    def process(stem: str) -> None:
        disparity = io_formats.load_disparity(disp_dir / f"{stem}.pfm")
        if kind == "ransac":
            gt = io_formats.load_depth_png16(
                gt_dir / f"{stem}.png", DepthKind.GROUND_TRUTH
            )
            params = ransac_align_disparity(disparity, gt, rcfg)
            metric = metric_depth_from_disparity_fit(disparity, params)
            save_params(out / "params" / f"{stem}.json", params)
        elif kind == "global":
            metric = metric_depth_from_disparity_fit(
                disparity,
                AffineDepthParams(
                    calibration.scale, calibration.shift, Space.DISPARITY
                ),
            )
        elif fixed_params.space is Space.DISPARITY:
            metric = metric_depth_from_disparity_fit(disparity, fixed_params)
        else:
            approx = disparity_to_approx_depth(disparity, calibration)
            metric = apply_affine_depth(approx, fixed_params)
        io_formats.save_depth_png16(out / "metric" / f"{stem}.png", metric)

    failures = _run_frames(process, stems, args.jobs, args.keep_going)
    if failures:
        raise ProcessingError(f"{len(failures)} frame(s) failed: {failures[:5]}")
    return EXIT_OK


def _load_calibration(path: str) -> GlobalCalibration:
    try:
        obj = load_params(path)
    except (OSError, ValueError, KeyError) as exc:
        raise UsageError(f"cannot read calibration {path}: {exc}") from exc
    if isinstance(obj, GlobalCalibration):
        return obj
    if obj.space is not Space.DISPARITY:
        raise UsageError(f"{path} does not hold disparity-space parameters")
    return GlobalCalibration(obj.scale, obj.shift, 1)


def _run_frames(process, stems: list[str], jobs: int, keep_going: bool) -> list[str]:
    """Run a per-frame stage, optionally in parallel; returns failed stems."""
    failures = []

    def guarded(stem: str) -> str | None:
        try:
            process(stem)
            return None
        except Exception as exc:  # noqa: BLE001 - reported per frame
            logger.error("frame %s failed: %s", stem, exc)
            if not keep_going:
                raise ProcessingError(f"frame {stem}: {exc}") from exc
            return stem

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(guarded, stems))
    else:
        results = [guarded(stem) for stem in stems]
    failures = [stem for stem in results if stem is not None]
    return failures


# --------------------------------------------------------------------------
# distances


DISTANCES_OPTS = [
    Opt("input.metric_dir", str, help="directory of PNG16 metric depth"),
    Opt("input.detections", str, help="MegaDetector-shaped detections JSON"),
    Opt("input.attention_dir", str, help="directory of <stem>_<index>.pfm attention maps"),
    Opt("detections.min_confidence", float, instances.DEFAULT_CONFIDENCE_FLOOR),
    Opt("output.csv", str),
]


def cmd_distances(args: argparse.Namespace) -> int:
    cfg = _resolve(args, DISTANCES_OPTS)
    metric_dir = _require_dir(cfg["input.metric_dir"], "input.metric_dir")
    if not cfg["input.detections"]:
        raise UsageError("input.detections is required")
    if not cfg["output.csv"]:
        raise UsageError("output.csv is required")
    attention_dir = (
        Path(cfg["input.attention_dir"]) if cfg["input.attention_dir"] else None
    )
    if attention_dir is not None and not attention_dir.is_dir():
        raise UsageError(f"input.attention_dir {attention_dir} is not a directory")

    try:
        detections = instances.ingest_detections(
            cfg["input.detections"], cfg["detections.min_confidence"]
        )
    except (OSError, instances.DetectionParseError) as exc:
        raise UsageError(str(exc)) from exc

    by_stem: dict[str, list[instances.Detection]] = {}
    for det in detections:
        by_stem.setdefault(det.source, []).append(det)
    missing = [s for s in by_stem if not (metric_dir / f"{s}.png").exists()]
    if missing:
        raise UsageError(f"metric depth missing for frames: {sorted(missing)[:5]}")

    def process(stem: str) -> list[tuple]:
        depth = io_formats.load_depth_png16(metric_dir / f"{stem}.png", DepthKind.METRIC)
        height, width = depth.shape
        frame_rows = []
        for det_index, det in enumerate(by_stem[stem]):
            try:
                if attention_dir is not None:
                    att_path = attention_dir / f"{stem}_{det_index}.pfm"
                    if not att_path.exists():
                        raise FileNotFoundError(f"missing attention map {att_path}")
                    ex, ey, ew, eh = instances.expand_bbox(det, (width, height))
                    att = instances.AttentionMap(
                        io_formats.read_pfm(att_path), (ex, ey), (ew, eh)
                    )
                    mask = instances.threshold_attention(att, det, (width, height))
                else:
                    mask = instances.InstanceMask(
                        np.empty((0, 2), dtype=np.int64), det
                    )
                dist = instances.instance_distance(mask, depth)
            except (ValueError, OSError) as exc:
                raise ProcessingError(f"detection {det_index}: {exc}") from exc
            frame_rows.append(
                (det.frame_id, det_index, det.category, det.confidence, dist)
            )
        return frame_rows

    stems = sorted(by_stem)
    rows_by_stem: dict[str, list[tuple]] = {}

    def collect(stem: str) -> None:
        rows_by_stem[stem] = process(stem)

    failures = _run_frames(collect, stems, args.jobs, args.keep_going)
    rows = [row for stem in stems for row in rows_by_stem.get(stem, [])]
    instances.write_distances_csv(cfg["output.csv"], rows)
    if failures:
        raise ProcessingError(f"{len(failures)} frame(s) failed: {failures[:5]}")
    return EXIT_OK


# --------------------------------------------------------------------------
# track


TRACK_OPTS = [
    Opt("input.distances", str, help="distances CSV from the distances stage"),
    Opt("input.detections", str, help="detections JSON (provides the boxes)"),
    Opt("detections.min_confidence", float, instances.DEFAULT_CONFIDENCE_FLOOR),
    Opt("assoc.alpha", float, 0.5),
    Opt("assoc.dist_max", float, 4.0),
    Opt("assoc.sim_threshold", float, 0.3),
    Opt("assoc.max_age", int, 3),
    Opt("assoc.min_hits", int, 2),
    Opt("assoc.depth_std", float, 0.5),
    Opt("assoc.use_depth", int, 1, "1 = depth channel on, 0 = classic 2D SORT"),
    Opt("output.tracks", str),
]


def cmd_track(args: argparse.Namespace) -> int:
    cfg = _resolve(args, TRACK_OPTS + INTRINSICS_OPTS)
    if not cfg["input.distances"] or not cfg["input.detections"]:
        raise UsageError("input.distances and input.detections are required")
    if not cfg["output.tracks"]:
        raise UsageError("output.tracks is required")
    intr = _resolve_intrinsics(cfg)
    try:
        dist_rows = instances.read_distances_csv(cfg["input.distances"])
        detections = instances.ingest_detections(
            cfg["input.detections"], cfg["detections.min_confidence"]
        )
    except (OSError, ValueError) as exc:
        raise UsageError(str(exc)) from exc

    distance_of = {(r["frame_id"], r["det_index"]): r["distance_m"] for r in dist_rows}
    by_frame: dict[int, list[instances.Detection]] = {}
    for det in detections:
        by_frame.setdefault(det.frame_id, []).append(det)

    assoc = tracking.AssociationConfig(
        alpha=cfg["assoc.alpha"],
        dist_max=cfg["assoc.dist_max"],
        sim_threshold=cfg["assoc.sim_threshold"],
        max_age=cfg["assoc.max_age"],
        min_hits=cfg["assoc.min_hits"],
        depth_std=cfg["assoc.depth_std"],
        use_depth=bool(cfg["assoc.use_depth"]),
    )
    tracker = tracking.Sort25DTracker(assoc)
    updates: list[tracking.TrackUpdate] = []
    for frame_id in sorted(by_frame):
        observations = []
        for det_index, det in enumerate(by_frame[frame_id]):
            key = (frame_id, det_index)
            if key not in distance_of:
                raise ProcessingError(
                    f"no distance row for frame {frame_id} detection {det_index}"
                )
            x, y, w, h = det.bbox
            observations.append(
                tracking.Observation3D(
                    bbox=(x * intr.width, y * intr.height, w * intr.width, h * intr.height),
                    z=distance_of[key],
                    frame_id=frame_id,
                    det_index=det_index,
                )
            )
        updates.extend(tracker.step(frame_id, observations))
    tracking.write_tracks_jsonl(cfg["output.tracks"], updates)
    return EXIT_OK


# --------------------------------------------------------------------------
# eval-depth


EVAL_DEPTH_OPTS = [
    Opt("input.pred_dir", str, help="PNG16 predicted metric depth"),
    Opt("input.gt_dir", str, help="PNG16 ground-truth depth"),
    Opt("input.pred_csv", str, help="predicted distances CSV (instance mode)"),
    Opt("input.gt_csv", str, help="ground-truth distances CSV (instance mode)"),
    Opt("eval.cap_m", float, evaluation.DEFAULT_DEPTH_CAP_M),
    Opt("scene.name", str, help="scene label for the CSV row (default: input dir name)"),
    Opt("output.report", str),
    Opt("output.csv", str),
]


def cmd_eval_depth(args: argparse.Namespace) -> int:
    cfg = _resolve(args, EVAL_DEPTH_OPTS)
    pixel_mode = bool(cfg["input.pred_dir"] or cfg["input.gt_dir"])
    instance_mode = bool(cfg["input.pred_csv"] or cfg["input.gt_csv"])
    if pixel_mode == instance_mode:
        raise UsageError(
            "give either input.pred_dir+input.gt_dir or input.pred_csv+input.gt_csv"
        )
    if not cfg["output.report"]:
        raise UsageError("output.report is required")

    errors = None
    if pixel_mode:
        pred_dir = _require_dir(cfg["input.pred_dir"], "input.pred_dir")
        gt_dir = _require_dir(cfg["input.gt_dir"], "input.gt_dir")
        scene = cfg["scene.name"] or pred_dir.name
        stems = _stems(pred_dir, ".png")
        if not stems:
            raise UsageError(f"no .png files in {pred_dir}")
        missing = [s for s in stems if not (gt_dir / f"{s}.png").exists()]
        if missing:
            raise UsageError(f"ground truth missing for frames: {missing[:5]}")
        ds, gs = [], []
        cap = cfg["eval.cap_m"]
        for stem in stems:
            d = io_formats.load_depth_png16(pred_dir / f"{stem}.png", DepthKind.METRIC)
            g = io_formats.load_depth_png16(
                gt_dir / f"{stem}.png", DepthKind.GROUND_TRUTH
            )
            if d.shape != g.shape:
                raise ProcessingError(f"frame {stem}: prediction/GT shape mismatch")
            joint = d.valid & g.valid & (g.values < cap)
            ds.append(d.values[joint])
            gs.append(g.values[joint])
        d_all = np.concatenate(ds)
        g_all = np.concatenate(gs)
        if d_all.size == 0:
            raise ProcessingError("no jointly valid pixels under the cap")
        report = evaluation.error_report(d_all, g_all)
    else:
        if not (cfg["input.pred_csv"] and cfg["input.gt_csv"]):
            raise UsageError("instance mode needs input.pred_csv and input.gt_csv")
        scene = cfg["scene.name"] or Path(cfg["input.pred_csv"]).stem
        try:
            pred_rows = instances.read_distances_csv(cfg["input.pred_csv"])
            gt_rows = instances.read_distances_csv(cfg["input.gt_csv"])
        except (OSError, ValueError) as exc:
            raise UsageError(str(exc)) from exc
        pred = [((r["frame_id"], r["det_index"]), r["distance_m"]) for r in pred_rows]
        gt = [((r["frame_id"], r["det_index"]), r["distance_m"]) for r in gt_rows]
        try:
            report = evaluation.instance_depth_metrics(pred, gt)
        except ValueError as exc:
            raise ProcessingError(str(exc)) from exc
        pred_map = dict(pred)
        errors = np.array([pred_map[k] - v for k, v in gt])  # signed errors

    doc = {"scene": scene, **report.to_json_dict()}
    with open(cfg["output.report"], "w", encoding="utf-8") as f:
        json.dump(doc, f, indent=2)
        f.write("\n")
    if cfg["output.csv"]:
        with open(cfg["output.csv"], "w", encoding="utf-8") as f:
            f.write("scene,rms,rel,mae,me,n_valid\n")
            f.write(
                f"{scene},{report.rms!r},{report.rel!r},{report.mae!r},"
                f"{report.me!r},{report.n_valid}\n"
            )
    if args.plot:
        if errors is None:
            raise UsageError("--plot requires instance mode (per-instance errors)")
        lo, q1, med, q3, hi = evaluation.quartile_stats(errors)
        plot_path = Path(cfg["output.report"]).with_suffix(".quartiles.csv")
        with open(plot_path, "w", encoding="utf-8") as f:
            f.write("scene,min,q1,median,q3,max\n")
            f.write(f"{scene},{lo!r},{q1!r},{med!r},{q3!r},{hi!r}\n")
    return EXIT_OK


# --------------------------------------------------------------------------
# eval-mot


EVAL_MOT_OPTS = [
    Opt("input.pred_tracks", str, help="predicted tracks JSONL"),
    Opt("input.gt_tracks", str, help="ground-truth tracks JSONL"),
    Opt("eval.tp_threshold_m", float, evaluation.DEFAULT_TP_THRESHOLD_M),
    Opt("scene.name", str),
    Opt("output.report", str),
    Opt("output.csv", str),
]


def cmd_eval_mot(args: argparse.Namespace) -> int:
    cfg = _resolve(args, EVAL_MOT_OPTS + INTRINSICS_OPTS)
    if not cfg["input.pred_tracks"] or not cfg["input.gt_tracks"]:
        raise UsageError("input.pred_tracks and input.gt_tracks are required")
    if not cfg["output.report"]:
        raise UsageError("output.report is required")
    intr = _resolve_intrinsics(cfg)
    try:
        pred = tracking.read_tracks_jsonl(cfg["input.pred_tracks"])
        gt = tracking.read_tracks_jsonl(cfg["input.gt_tracks"])
    except (OSError, ValueError, KeyError) as exc:
        raise UsageError(str(exc)) from exc
    scene = cfg["scene.name"] or Path(cfg["input.pred_tracks"]).stem
    try:
        report = evaluation.mot_metrics(
            evaluation.frame_tracks_from_updates(pred, intr),
            evaluation.frame_tracks_from_updates(gt, intr),
            cfg["eval.tp_threshold_m"],
        )
    except ValueError as exc:
        raise ProcessingError(str(exc)) from exc
    doc = {"scene": scene, **report.to_json_dict()}
    with open(cfg["output.report"], "w", encoding="utf-8") as f:
        json.dump(doc, f, indent=2)
        f.write("\n")
    if cfg["output.csv"]:
        motp = "" if report.motp_m != report.motp_m else repr(report.motp_m)
        with open(cfg["output.csv"], "w", encoding="utf-8") as f:
            f.write("scene,mota,motp_m,tp,fp,fn,ids,num_gt\n")
            f.write(
                f"{scene},{report.mota!r},{motp},{report.tp},{report.fp},"
                f"{report.fn},{report.ids},{report.num_gt}\n"
            )
    return EXIT_OK


# --------------------------------------------------------------------------
# synth


def cmd_synth(args: argparse.Namespace) -> int:
    try:
        spec, truth = synth.load_scene_spec(args.spec)
    except OSError as exc:
        raise UsageError(f"cannot read scene spec: {exc}") from exc
    except (synth.SceneSpecError, yaml.YAMLError) as exc:
        raise UsageError(str(exc)) from exc
    try:
        synth.write_dataset(spec, truth, args.out)
    except synth.FrustumError as exc:
        raise UsageError(str(exc)) from exc
    return EXIT_OK


# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="trapdist",
        description="Metric animal distances and depth-aware tracks from "
        "relative monocular depth.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", help="YAML config; flags override its fields")
        p.add_argument("--jobs", type=int, default=1, help="parallel frame workers")
        p.add_argument(
            "--keep-going",
            action="store_true",
            help="process remaining frames after a failure",
        )
        p.add_argument("--verbose", action="store_true")

    p_align = sub.add_parser("align", help="disparity -> metric depth PNGs")
    common(p_align)
    _add_opts(p_align, ALIGN_OPTS + RANSAC_OPTS)
    p_align.set_defaults(func=cmd_align)

    p_dist = sub.add_parser("distances", help="metric depth + detections -> distances CSV")
    common(p_dist)
    _add_opts(p_dist, DISTANCES_OPTS)
    p_dist.set_defaults(func=cmd_distances)

    p_track = sub.add_parser("track", help="distances -> depth-aware tracks JSONL")
    common(p_track)
    _add_opts(p_track, TRACK_OPTS + INTRINSICS_OPTS)
    p_track.set_defaults(func=cmd_track)

    p_ed = sub.add_parser("eval-depth", help="depth / instance-distance metrics")
    common(p_ed)
    p_ed.add_argument("--plot", action="store_true", help="emit per-scene quartile CSV")
    _add_opts(p_ed, EVAL_DEPTH_OPTS)
    p_ed.set_defaults(func=cmd_eval_depth)

    p_em = sub.add_parser("eval-mot", help="CLEAR-MOT tracking metrics")
    common(p_em)
    _add_opts(p_em, EVAL_MOT_OPTS + INTRINSICS_OPTS)
    p_em.set_defaults(func=cmd_eval_mot)

    p_synth = sub.add_parser("synth", help="materialize a synthetic dataset")
    p_synth.add_argument("spec", help="scene spec YAML")
    p_synth.add_argument("out", help="output directory")
    p_synth.add_argument("--verbose", action="store_true")
    p_synth.set_defaults(func=cmd_synth)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
        format="%(levelname)s %(message)s",
    )
    try:
        return args.func(args)
    except UsageError as exc:
        logger.error("%s", exc)
        return EXIT_USAGE
    except ProcessingError as exc:
        logger.error("%s", exc)
        return EXIT_PROCESSING


if __name__ == "__main__":
    sys.exit(main())
