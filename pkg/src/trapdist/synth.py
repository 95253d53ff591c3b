"""Synthetic-scene oracle for end-to-end verification.

Scenes are an analytic tilted ground plane viewed by a pinhole camera, with
animals as fronto-parallel squares at known depth moving linearly across
frames. Every downstream quantity (ground-truth depth, detections, masks,
attention maps, disparity with planted affine parameters, 3D tracks) is
derived in closed form, so pipeline outputs can be checked exactly.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import yaml

from . import io_formats
from .alignment import AffineDepthParams, Space
from .geometry import CameraIntrinsics, DepthKind, DepthMap, DisparityMap
from .instances import (
    AttentionMap,
    Detection,
    InstanceDistance,
    InstanceMask,
    expand_bbox,
    write_distances_csv,
)
from .tracking import TrackUpdate, write_tracks_jsonl

MIN_ANIMAL_Z = 0.5
MAX_ANIMAL_Z = 65.0

FRAME_STEM = "frame_{:06d}"


class SceneSpecError(ValueError):
    """A scene description failed validation; message carries the field path."""


class FrustumError(ValueError):
    """An animal left the camera frustum during the scene."""


@dataclass(frozen=True)
class AnimalSpec:
    """A square animal of ``size_m`` at ``position`` moving by ``velocity``
    (meters per frame, camera coordinates: x right, y down, z forward)."""

    size_m: float
    position: tuple[float, float, float]
    velocity: tuple[float, float, float]

    def state_at(self, frame: int) -> tuple[float, float, float]:
        return (
            self.position[0] + self.velocity[0] * frame,
            self.position[1] + self.velocity[1] * frame,
            self.position[2] + self.velocity[2] * frame,
        )


@dataclass(frozen=True)
class SceneSpec:
    intrinsics: CameraIntrinsics
    ground_height_m: float
    ground_tilt_deg: float
    animals: tuple[AnimalSpec, ...]
    n_frames: int
    seed: int
    max_depth_m: float = MAX_ANIMAL_Z
    dropout_frac: float = 0.0


@dataclass(frozen=True)
class DisparityTruth:
    """Planted disparity-space parameters plus corruption settings."""

    params: AffineDepthParams
    noise_std: float = 0.0
    outlier_frac: float = 0.0


@dataclass(frozen=True)
class FrameTruth:
    depth_gt: DepthMap
    detections: list[Detection]
    masks: list[InstanceMask]
    attention: list[AttentionMap]
    animal_z: list[float]
    animal_rects: list[tuple[int, int, int, int]]


def _ground_plane_depth(spec: SceneSpec) -> tuple[np.ndarray, np.ndarray]:
    """Analytic depth of a plane ``ground_height_m`` below a camera pitched
    down by ``ground_tilt_deg``; pixels above the horizon or beyond the
    depth range are invalid."""
    intr = spec.intrinsics
    theta = math.radians(spec.ground_tilt_deg)
    v = np.arange(intr.height, dtype=np.float64)[:, None]
    den = math.cos(theta) * (v - intr.v0) / intr.focal_px + math.sin(theta)
    ok = den > 1e-12
    z = np.where(ok, spec.ground_height_m / np.where(ok, den, 1.0), 0.0)
    ok &= (z > 0) & (z <= spec.max_depth_m)
    z = np.broadcast_to(z, (intr.height, intr.width)).copy()
    ok = np.broadcast_to(ok, (intr.height, intr.width)).copy()
    return z, ok


def _animal_rect(
    animal: AnimalSpec, frame: int, intr: CameraIntrinsics
) -> tuple[tuple[int, int, int, int], float]:
    x, y, z = animal.state_at(frame)
    if not MIN_ANIMAL_Z < z <= MAX_ANIMAL_Z:
        raise FrustumError(
            f"animal depth {z:.3f} m outside ({MIN_ANIMAL_Z}, {MAX_ANIMAL_Z}] "
            f"at frame {frame}"
        )
    f = intr.focal_px
    half = animal.size_m / 2.0
    u_lo = f * (x - half) / z + intr.u0
    u_hi = f * (x + half) / z + intr.u0
    v_lo = f * (y - half) / z + intr.v0
    v_hi = f * (y + half) / z + intr.v0
    x0 = max(0, int(round(u_lo)))
    x1 = min(intr.width, int(round(u_hi)))
    y0 = max(0, int(round(v_lo)))
    y1 = min(intr.height, int(round(v_hi)))
    if x1 <= x0 or y1 <= y0:
        raise FrustumError(
            f"animal at ({x:.2f}, {y:.2f}, {z:.2f}) projects outside the "
            f"image at frame {frame}"
        )
    return (x0, y0, x1 - x0, y1 - y0), z


def render_frame(spec: SceneSpec, frame: int) -> FrameTruth:
    """Render ground-truth depth, detections, masks and attention maps."""
    intr = spec.intrinsics
    zbuf, ground_ok = _ground_plane_depth(spec)
    zbuf = np.where(ground_ok, zbuf, np.inf)

    rects = []
    zs = []
    for animal in spec.animals:
        rect, z = _animal_rect(animal, frame, intr)
        rects.append(rect)
        zs.append(z)
    # Animals always occlude the background; among themselves, nearer wins.
    for idx in sorted(range(len(zs)), key=lambda i: -zs[i]):
        x0, y0, w, h = rects[idx]
        zbuf[y0 : y0 + h, x0 : x0 + w] = zs[idx]

    valid = np.isfinite(zbuf)
    if spec.dropout_frac > 0:
        rng = np.random.default_rng((spec.seed, frame))
        drop = rng.random(zbuf.shape) < spec.dropout_frac
        valid &= ~drop
    depth_gt = DepthMap(np.where(valid, zbuf, 0.0), valid, DepthKind.GROUND_TRUTH)

    detections = []
    masks = []
    attention = []
    size = (intr.width, intr.height)
    for det_index, rect in enumerate(rects):
        x0, y0, w, h = rect
        det = Detection(
            bbox=(x0 / intr.width, y0 / intr.height, w / intr.width, h / intr.height),
            confidence=0.9,
            category="1",
            frame_id=frame,
            source=FRAME_STEM.format(frame),
        )
        detections.append(det)
        uu, vv = np.meshgrid(np.arange(x0, x0 + w), np.arange(y0, y0 + h))
        masks.append(
            InstanceMask(np.column_stack([uu.ravel(), vv.ravel()]), det)
        )
        ex, ey, ew, eh = expand_bbox(det, size)
        att = np.zeros((eh, ew))
        att[y0 - ey : y0 - ey + h, x0 - ex : x0 - ex + w] = 1.0
        attention.append(AttentionMap(att, (ex, ey), (ew, eh)))

    return FrameTruth(depth_gt, detections, masks, attention, zs, rects)


def render_scene(spec: SceneSpec) -> list[FrameTruth]:
    return [render_frame(spec, i) for i in range(spec.n_frames)]


def synth_disparity(
    g: DepthMap,
    params: AffineDepthParams,
    noise_std: float = 0.0,
    outlier_frac: float = 0.0,
    seed: int = 0,
) -> DisparityMap:
    """Invert ground truth into disparity consistent with planted parameters,
    optionally corrupted by Gaussian noise and uniform outliers (seeded)."""
    if params.scale == 0:
        raise ValueError("disparity scale must be nonzero")
    rng = np.random.default_rng(seed)
    valid = g.valid
    values = np.zeros(g.values.shape)
    clean = (1.0 / g.values[valid] - params.shift) / params.scale
    values[valid] = clean
    if noise_std > 0:
        values[valid] = clean + rng.normal(0.0, noise_std, clean.size)
    if outlier_frac > 0:
        n = clean.size
        n_out = int(math.floor(outlier_frac * n))
        if n_out > 0:
            lo, hi = float(clean.min()), float(clean.max())
            if hi <= lo:
                lo, hi = lo - 1.0, hi + 1.0
            picked = rng.choice(n, n_out, replace=False)
            flat_idx = np.flatnonzero(valid)[picked]
            values.ravel()[flat_idx] = rng.uniform(lo, hi, n_out)
    return DisparityMap(values, valid.copy())


def _require(condition: bool, path: str, message: str) -> None:
    if not condition:
        raise SceneSpecError(f"{path}: {message}")


def _as_float3(value, path: str) -> tuple[float, float, float]:
    _require(
        isinstance(value, (list, tuple)) and len(value) == 3,
        path,
        "expected a list of three numbers",
    )
    return tuple(float(v) for v in value)


def scene_from_dict(doc: dict) -> tuple[SceneSpec, DisparityTruth]:
    """Build a validated scene from a parsed YAML/JSON document."""
    _require(isinstance(doc, dict), "<root>", "expected a mapping")

    intr_doc = doc.get("intrinsics")
    _require(isinstance(intr_doc, dict), "intrinsics", "missing mapping")
    width = int(intr_doc.get("width", 0))
    height = int(intr_doc.get("height", 0))
    _require(width > 0, "intrinsics.width", "must be positive")
    _require(height > 0, "intrinsics.height", "must be positive")
    focal = intr_doc.get("focal_px")
    hfov = intr_doc.get("hfov_deg")
    _require(
        (focal is None) != (hfov is None),
        "intrinsics",
        "exactly one of focal_px or hfov_deg is required",
    )
    if focal is not None:
        intrinsics = CameraIntrinsics(float(focal), width, height)
    else:
        _require(0 < float(hfov) < 180, "intrinsics.hfov_deg", "must be in (0, 180)")
        intrinsics = CameraIntrinsics.from_fov(width, height, float(hfov))

    ground = doc.get("ground_plane")
    _require(isinstance(ground, dict), "ground_plane", "missing mapping")
    height_m = float(ground.get("height_m", 0.0))
    tilt_deg = float(ground.get("tilt_deg", 0.0))
    _require(height_m > 0, "ground_plane.height_m", "must be positive")
    _require(0 <= tilt_deg < 90, "ground_plane.tilt_deg", "must be in [0, 90)")

    n_frames = int(doc.get("n_frames", 0))
    _require(n_frames >= 1, "n_frames", "must be >= 1")
    seed = int(doc.get("seed", 0))
    max_depth = float(doc.get("max_depth_m", MAX_ANIMAL_Z))
    _require(max_depth > 0, "max_depth_m", "must be positive")
    dropout = float(doc.get("dropout_frac", 0.0))
    _require(0 <= dropout < 1, "dropout_frac", "must be in [0, 1)")

    animals = []
    animal_docs = doc.get("animals", [])
    _require(isinstance(animal_docs, list), "animals", "expected a list")
    for i, a in enumerate(animal_docs):
        path = f"animals[{i}]"
        _require(isinstance(a, dict), path, "expected a mapping")
        size = float(a.get("size_m", 0.0))
        _require(size > 0, f"{path}.size_m", "must be positive")
        position = _as_float3(a.get("position"), f"{path}.position")
        velocity = _as_float3(a.get("velocity", (0.0, 0.0, 0.0)), f"{path}.velocity")
        animal = AnimalSpec(size, position, velocity)
        for frame in (0, n_frames - 1):
            z = animal.state_at(frame)[2]
            _require(
                MIN_ANIMAL_Z < z <= MAX_ANIMAL_Z,
                f"{path}.position",
                f"depth {z:.3f} m at frame {frame} outside "
                f"({MIN_ANIMAL_Z}, {MAX_ANIMAL_Z}]",
            )
        animals.append(animal)

    disparity_doc = doc.get("disparity", {})
    _require(isinstance(disparity_doc, dict), "disparity", "expected a mapping")
    scale = float(disparity_doc.get("scale", 0.02))
    shift = float(disparity_doc.get("shift", 0.01))
    _require(scale != 0, "disparity.scale", "must be nonzero")
    noise_std = float(disparity_doc.get("noise_std", 0.0))
    outlier_frac = float(disparity_doc.get("outlier_frac", 0.0))
    _require(noise_std >= 0, "disparity.noise_std", "must be >= 0")
    _require(0 <= outlier_frac < 1, "disparity.outlier_frac", "must be in [0, 1)")

    spec = SceneSpec(
        intrinsics=intrinsics,
        ground_height_m=height_m,
        ground_tilt_deg=tilt_deg,
        animals=tuple(animals),
        n_frames=n_frames,
        seed=seed,
        max_depth_m=max_depth,
        dropout_frac=dropout,
    )
    truth = DisparityTruth(
        AffineDepthParams(scale, shift, Space.DISPARITY), noise_std, outlier_frac
    )
    return spec, truth


def load_scene_spec(path: str | os.PathLike) -> tuple[SceneSpec, DisparityTruth]:
    with open(path, encoding="utf-8") as f:
        doc = yaml.safe_load(f)
    return scene_from_dict(doc)


def write_dataset(
    spec: SceneSpec, truth: DisparityTruth, out_dir: str | os.PathLike
) -> None:
    """Materialize the on-disk dataset the batch pipeline consumes.

    Layout: disparity/*.pfm, depth_gt/*.png (16-bit mm), attention/*.pfm,
    detections.json (MegaDetector batch shape), gt_tracks.jsonl,
    gt_distances.csv, intrinsics.json, planted_params.json.

    Disparity is synthesized from the millimeter-quantized ground truth (the
    values actually stored on disk), so a noiseless dataset closes exactly
    through the file-based pipeline.
    """
    out = Path(out_dir)
    for sub in ("disparity", "depth_gt", "attention"):
        (out / sub).mkdir(parents=True, exist_ok=True)

    det_images = []
    gt_updates: list[TrackUpdate] = []
    gt_rows = []
    for frame in range(spec.n_frames):
        ft = render_frame(spec, frame)
        stem = FRAME_STEM.format(frame)
        io_formats.save_depth_png16(out / "depth_gt" / f"{stem}.png", ft.depth_gt)
        quantized = io_formats.load_depth_png16(
            out / "depth_gt" / f"{stem}.png", DepthKind.GROUND_TRUTH
        )
        disparity = synth_disparity(
            quantized,
            truth.params,
            truth.noise_std,
            truth.outlier_frac,
            seed=spec.seed + frame,
        )
        io_formats.save_disparity(out / "disparity" / f"{stem}.pfm", disparity)

        det_entries = []
        for det_index, det in enumerate(ft.detections):
            det_entries.append(
                {
                    "category": det.category,
                    "conf": det.confidence,
                    "bbox": list(det.bbox),
                }
            )
            io_formats.write_pfm(
                out / "attention" / f"{stem}_{det_index}.pfm",
                ft.attention[det_index].values,
            )
            rect = ft.animal_rects[det_index]
            gt_updates.append(
                TrackUpdate(
                    frame_id=frame,
                    track_id=det_index + 1,
                    bbox=tuple(float(v) for v in rect),
                    z=ft.animal_z[det_index],
                    matched=True,
                )
            )
            mask = ft.masks[det_index]
            vs, us = mask.pixels[:, 1], mask.pixels[:, 0]
            ok = quantized.valid[vs, us]
            gt_median = (
                float(np.median(quantized.values[vs[ok], us[ok]]))
                if ok.any()
                else ft.animal_z[det_index]
            )
            gt_rows.append(
                (
                    frame,
                    det_index,
                    det.category,
                    det.confidence,
                    InstanceDistance(gt_median, int(ok.sum()), False),
                )
            )
        det_images.append({"file": f"{stem}.png", "detections": det_entries})

    with open(out / "detections.json", "w", encoding="utf-8") as f:
        json.dump({"images": det_images}, f, indent=1)
        f.write("\n")
    write_tracks_jsonl(out / "gt_tracks.jsonl", gt_updates)
    write_distances_csv(out / "gt_distances.csv", gt_rows)
    with open(out / "intrinsics.json", "w", encoding="utf-8") as f:
        json.dump(spec.intrinsics.to_json_dict(), f, indent=2)
        f.write("\n")
    with open(out / "planted_params.json", "w", encoding="utf-8") as f:
        json.dump(
            {
                "scale": truth.params.scale,
                "shift": truth.params.shift,
                "space": truth.params.space.value,
                "noise_std": truth.noise_std,
                "outlier_frac": truth.outlier_frac,
            },
            f,
            indent=2,
        )
        f.write("\n")
