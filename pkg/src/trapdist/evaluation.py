"""Depth-error metrics and CLEAR-MOT tracking evaluation.

Depth metrics (RMS, REL, MAE, ME) run over jointly valid pixels with ground
truth below a distance cap (default 25 m, the realistic camera-trap range).
Tracking metrics match predictions to ground truth per frame by optimal
assignment on 3D distance between track reference points, with the true-
positive threshold applied post hoc. MOTP is reported as the mean 3D
distance of true positives in meters; a 3D-box-overlap variant
(motp_iou3d) is exposed alongside when boxes are available.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .geometry import CameraIntrinsics, DepthMap
from .tracking import Rect, TrackUpdate

DEFAULT_DEPTH_CAP_M = 25.0
DEFAULT_TP_THRESHOLD_M = 2.2


class EmptyEvaluationError(ValueError):
    """No samples satisfy the evaluation preconditions."""


class MisalignedFramesError(ValueError):
    """Predicted tracks cover frames absent from the ground truth."""


class IdMismatchError(ValueError):
    """Instance lists do not carry the same identities."""


@dataclass(frozen=True)
class DepthReport:
    rms: float
    rel: float
    mae: float
    me: float
    n_valid: int

    def to_json_dict(self) -> dict:
        return {
            "rms": self.rms,
            "rel": self.rel,
            "mae": self.mae,
            "me": self.me,
            "n_valid": self.n_valid,
        }


@dataclass(frozen=True)
class MotReport:
    mota: float
    motp_m: float
    motp_iou3d: float | None
    tp: int
    fp: int
    fn: int
    ids: int
    num_gt: int

    def to_json_dict(self) -> dict:
        return {
            "mota": self.mota,
            "motp_m": None if math.isnan(self.motp_m) else self.motp_m,
            "motp_iou3d": self.motp_iou3d,
            "tp": self.tp,
            "fp": self.fp,
            "fn": self.fn,
            "ids": self.ids,
            "num_gt": self.num_gt,
        }


def error_report(d: np.ndarray, g: np.ndarray) -> DepthReport:
    """RMS / REL / MAE / ME over paired prediction/ground-truth arrays."""
    err = d - g
    return DepthReport(
        rms=float(np.sqrt(np.mean(err**2))),
        rel=float(np.mean(np.abs(err) / g)),
        mae=float(np.mean(np.abs(err))),
        me=float(np.mean(err)),
        n_valid=int(d.size),
    )


def depth_metrics(
    d: DepthMap, g: DepthMap, cap_m: float = DEFAULT_DEPTH_CAP_M
) -> DepthReport:
    """RMS / REL / MAE / ME over jointly valid pixels with g below the cap."""
    if d.values.shape != g.values.shape:
        raise ValueError(f"raster shapes differ: {d.shape} vs {g.shape}")
    joint = d.valid & g.valid & (g.values < cap_m)
    if not joint.any():
        raise EmptyEvaluationError(
            f"no jointly valid pixels under the {cap_m} m cap"
        )
    return error_report(d.values[joint], g.values[joint])


def instance_depth_metrics(
    pred: list[tuple], gt: list[tuple]
) -> DepthReport:
    """Same four metrics over per-instance (id, distance) pairs."""
    pred_map = dict(pred)
    gt_map = dict(gt)
    if len(pred_map) != len(pred) or len(gt_map) != len(gt):
        raise IdMismatchError("duplicate instance ids")
    if set(pred_map) != set(gt_map):
        missing = set(gt_map) ^ set(pred_map)
        raise IdMismatchError(f"instance id sets differ: {sorted(missing)[:5]}")
    if not gt_map:
        raise EmptyEvaluationError("no instances to evaluate")
    keys = sorted(gt_map)
    d = np.array([pred_map[k] for k in keys], dtype=np.float64)
    g = np.array([gt_map[k] for k in keys], dtype=np.float64)
    return error_report(d, g)


@dataclass(frozen=True)
class TrackPoint:
    """A track's per-frame 3D reference point (and optional 3D box)."""

    track_id: int
    point: tuple[float, float, float]
    box3d: tuple[tuple[float, float], tuple[float, float], tuple[float, float]] | None = None


FrameTracks = dict[int, list[TrackPoint]]


def reference_point(
    bbox: Rect, z: float, intr: CameraIntrinsics
) -> tuple[float, float, float]:
    """Bounding-box center unprojected at the track's estimated depth."""
    x, y, w, h = bbox
    cu = x + w / 2.0
    cv = y + h / 2.0
    return (
        (cu - intr.u0) / intr.focal_px * z,
        (cv - intr.v0) / intr.focal_px * z,
        z,
    )


def box3d_from_bbox(
    bbox: Rect, z: float, intr: CameraIntrinsics
) -> tuple[tuple[float, float], tuple[float, float], tuple[float, float]]:
    """Axis-aligned 3D box: unprojected pixel extents at depth z.

    The depth extent equals the box's metric height (animals are roughly as
    deep as they are tall), centered on z.
    """
    x, y, w, h = bbox
    x0 = (x - intr.u0) / intr.focal_px * z
    x1 = (x + w - intr.u0) / intr.focal_px * z
    y0 = (y - intr.v0) / intr.focal_px * z
    y1 = (y + h - intr.v0) / intr.focal_px * z
    depth_extent = h * z / intr.focal_px
    return (
        (min(x0, x1), max(x0, x1)),
        (min(y0, y1), max(y0, y1)),
        (z - depth_extent / 2.0, z + depth_extent / 2.0),
    )


def frame_tracks_from_updates(
    updates: list[TrackUpdate], intr: CameraIntrinsics, with_boxes: bool = True
) -> FrameTracks:
    """Group track updates by frame and unproject their reference points."""
    frames: FrameTracks = {}
    for u in updates:
        point = reference_point(u.bbox, u.z, intr)
        box = box3d_from_bbox(u.bbox, u.z, intr) if with_boxes else None
        frames.setdefault(u.frame_id, []).append(
            TrackPoint(u.track_id, point, box)
        )
    return frames


def iou_3d(box_a, box_b) -> float:
    """Intersection over union of two axis-aligned 3D boxes."""
    inter = 1.0
    vol_a = 1.0
    vol_b = 1.0
    for (a0, a1), (b0, b1) in zip(box_a, box_b):
        inter *= max(0.0, min(a1, b1) - max(a0, b0))
        vol_a *= a1 - a0
        vol_b *= b1 - b0
    union = vol_a + vol_b - inter
    return inter / union if union > 0 else 0.0


def mot_metrics(
    pred_tracks: FrameTracks,
    gt_tracks: FrameTracks,
    tp_threshold_m: float = DEFAULT_TP_THRESHOLD_M,
) -> MotReport:
    """CLEAR-MOT over frame-aligned track sets.

    Per frame, predictions are matched to ground truth by optimal assignment
    on 3D distance; matches closer than the threshold are true positives.
    An identity switch is counted whenever a ground-truth identity's matched
    prediction id differs from its previous matched frame.
    """
    extra_frames = set(pred_tracks) - set(gt_tracks)
    if extra_frames:
        raise MisalignedFramesError(
            f"predictions cover frames without ground truth: {sorted(extra_frames)[:5]}"
        )
    num_gt = sum(len(v) for v in gt_tracks.values())
    if num_gt == 0:
        raise EmptyEvaluationError("ground truth contains no track states")

    tp = fp = fn = ids = 0
    dist_sum = 0.0
    iou3d_sum = 0.0
    iou3d_count = 0
    last_matched: dict[int, int] = {}

    for frame in sorted(gt_tracks):
        gts = gt_tracks[frame]
        preds = pred_tracks.get(frame, [])
        frame_tp = 0
        if gts and preds:
            dist = np.zeros((len(preds), len(gts)))
            for pi, p in enumerate(preds):
                for gi, g in enumerate(gts):
                    dist[pi, gi] = math.dist(p.point, g.point)
            rows, cols = linear_sum_assignment(dist)
            for pi, gi in zip(rows, cols):
                d = float(dist[pi, gi])
                if d >= tp_threshold_m:
                    continue
                frame_tp += 1
                dist_sum += d
                p, g = preds[pi], gts[gi]
                if p.box3d is not None and g.box3d is not None:
                    iou3d_sum += iou_3d(p.box3d, g.box3d)
                    iou3d_count += 1
                if g.track_id in last_matched and last_matched[g.track_id] != p.track_id:
                    ids += 1
                last_matched[g.track_id] = p.track_id
        tp += frame_tp
        fp += len(preds) - frame_tp
        fn += len(gts) - frame_tp

    motp_m = dist_sum / tp if tp > 0 else math.nan
    motp_iou3d = iou3d_sum / iou3d_count if iou3d_count == tp and tp > 0 else None
    mota = 1.0 - (fn + fp + ids) / num_gt
    return MotReport(mota, motp_m, motp_iou3d, tp, fp, fn, ids, num_gt)


def quartile_stats(values: np.ndarray) -> tuple[float, float, float, float, float]:
    """(min, q1, median, q3, max) of a sample, linear interpolation."""
    values = np.asarray(values, dtype=np.float64)
    if values.size == 0:
        raise EmptyEvaluationError("no values for quartile statistics")
    q = np.percentile(values, [0, 25, 50, 75, 100])
    return tuple(float(v) for v in q)  # type: ignore[return-value]
