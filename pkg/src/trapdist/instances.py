"""Per-animal segmentation masks and metric distances.

Detections arrive in the MegaDetector batch-output JSON shape with bounding
boxes in normalized [0,1] image coordinates. Attention maps cover the
context-expanded box of a detection; thresholding them at 10% of their peak
and intersecting with the original box yields the instance mask, whose
median depth is the animal's camera distance.
"""

from __future__ import annotations

import csv
import json
import os
import re
from dataclasses import dataclass

import numpy as np

from .geometry import DepthMap

ATTENTION_THRESHOLD_FRAC = 0.10
DEFAULT_CONFIDENCE_FLOOR = 0.2


class DetectionParseError(ValueError):
    """A detections file could not be parsed."""


class NoValidDepthError(ValueError):
    """A detection's bounding box contains no valid depth pixel."""


@dataclass(frozen=True)
class Detection:
    """One animal detection with a normalized (x, y, w, h) bounding box."""

    bbox: tuple[float, float, float, float]
    confidence: float
    category: str
    frame_id: int
    source: str | None = None  # file stem the detection came from

    def __post_init__(self) -> None:
        x, y, w, h = self.bbox
        if not (0 <= x and 0 <= y and x + w <= 1 + 1e-9 and y + h <= 1 + 1e-9):
            raise ValueError(f"bbox {self.bbox} not within [0,1]")
        if w <= 0 or h <= 0:
            raise ValueError(f"bbox {self.bbox} has nonpositive extent")


@dataclass(frozen=True)
class AttentionMap:
    """Saliency raster covering an image crop at ``crop_origin``."""

    values: np.ndarray
    crop_origin: tuple[int, int]  # (x, y) pixels
    crop_size: tuple[int, int]  # (w, h) pixels

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=np.float64)
        w, h = self.crop_size
        if values.shape != (h, w):
            raise ValueError(
                f"attention raster {values.shape} does not match crop size {self.crop_size}"
            )
        if not (np.isfinite(values).all() and (values >= 0).all()):
            raise ValueError("attention values must be finite and nonnegative")
        object.__setattr__(self, "values", values)


@dataclass(frozen=True)
class InstanceMask:
    """Segmentation pixels (full-image (u, v) coordinates) of one detection."""

    pixels: np.ndarray  # (N, 2) int64
    detection: Detection

    def __post_init__(self) -> None:
        pixels = np.asarray(self.pixels, dtype=np.int64).reshape(-1, 2)
        object.__setattr__(self, "pixels", pixels)

    def __len__(self) -> int:
        return len(self.pixels)


@dataclass(frozen=True)
class InstanceDistance:
    """Median metric distance of one animal instance."""

    distance_m: float
    n_pixels: int
    fallback_used: bool


def detection_pixel_rect(
    det: Detection, image_size: tuple[int, int]
) -> tuple[int, int, int, int]:
    """The detection's integer pixel rect (x, y, w, h), edges rounded."""
    width, height = image_size
    x, y, w, h = det.bbox
    x0 = int(round(x * width))
    y0 = int(round(y * height))
    x1 = int(round((x + w) * width))
    y1 = int(round((y + h) * height))
    x1 = min(max(x1, x0 + 1), width)
    y1 = min(max(y1, y0 + 1), height)
    x0 = min(x0, x1 - 1)
    y0 = min(y0, y1 - 1)
    return x0, y0, x1 - x0, y1 - y0


def expand_bbox(
    det: Detection, image_size: tuple[int, int]
) -> tuple[int, int, int, int]:
    """Double the detection box about its center, clipped to the image.

    The enlarged crop gives the attention model scene context around the
    animal. Works on the integer pixel rect so the unclipped result is
    exactly 2w x 2h (odd extents are split floor-left/ceil-right). Returns
    an integer (x, y, w, h) pixel rect.
    """
    width, height = image_size
    x0, y0, w, h = detection_pixel_rect(det, image_size)
    ex0 = max(0, x0 - w // 2)
    ey0 = max(0, y0 - h // 2)
    ex1 = min(width, x0 + 2 * w - w // 2)
    ey1 = min(height, y0 + 2 * h - h // 2)
    return ex0, ey0, ex1 - ex0, ey1 - ey0


def threshold_attention(
    att: AttentionMap,
    det: Detection,
    image_size: tuple[int, int],
    threshold_frac: float = ATTENTION_THRESHOLD_FRAC,
) -> InstanceMask:
    """Mask = attention >= threshold_frac * peak, inside the original box.

    The attention crop must cover the detection's expanded box. An all-zero
    map yields an empty mask (10% of zero would select everything), which
    downstream falls back to the box median.
    """
    ex, ey, ew, eh = expand_bbox(det, image_size)
    ox, oy = att.crop_origin
    cw, ch = att.crop_size
    if ox > ex or oy > ey or ox + cw < ex + ew or oy + ch < ey + eh:
        raise ValueError(
            f"attention crop {att.crop_origin}+{att.crop_size} does not cover "
            f"the expanded box ({ex}, {ey}, {ew}, {eh})"
        )
    peak = float(att.values.max()) if att.values.size else 0.0
    if peak <= 0.0:
        return InstanceMask(np.empty((0, 2), dtype=np.int64), det)
    selected = att.values >= threshold_frac * peak
    rows, cols = np.nonzero(selected)
    us = cols + ox
    vs = rows + oy
    bx, by, bw, bh = detection_pixel_rect(det, image_size)
    inside = (us >= bx) & (us < bx + bw) & (vs >= by) & (vs < by + bh)
    return InstanceMask(np.column_stack([us[inside], vs[inside]]), det)


def instance_distance(mask: InstanceMask, depth: DepthMap) -> InstanceDistance:
    """Median metric depth over the mask's valid pixels.

    An empty (or fully invalid) mask falls back to the median over all valid
    pixels inside the original bounding box; a box with no valid depth at
    all raises.
    """
    height, width = depth.shape
    if len(mask) > 0:
        us = mask.pixels[:, 0]
        vs = mask.pixels[:, 1]
        ok = depth.valid[vs, us]
        if ok.any():
            picked = depth.values[vs[ok], us[ok]]
            return InstanceDistance(float(np.median(picked)), int(picked.size), False)
    bx, by, bw, bh = detection_pixel_rect(mask.detection, (width, height))
    window_valid = depth.valid[by : by + bh, bx : bx + bw]
    window_values = depth.values[by : by + bh, bx : bx + bw]
    picked = window_values[window_valid]
    if picked.size == 0:
        raise NoValidDepthError(
            f"no valid depth inside bbox ({bx}, {by}, {bw}, {bh})"
        )
    return InstanceDistance(float(np.median(picked)), int(picked.size), True)


def _frame_id_from_stem(stem: str, fallback: int) -> int:
    match = re.search(r"(\d+)(?!.*\d)", stem)
    return int(match.group(1)) if match else fallback


def ingest_detections(
    path: str | os.PathLike,
    min_confidence: float = DEFAULT_CONFIDENCE_FLOOR,
) -> list[Detection]:
    """Parse a MegaDetector-shaped batch JSON into detections.

    Boxes are clamped into [0,1]; detections under the confidence floor (or
    with a degenerate box after clamping) are dropped. Frame ids come from
    the trailing digits of each image's file stem, falling back to the image
    index.
    """
    try:
        with open(path, encoding="utf-8") as f:
            doc = json.load(f)
    except json.JSONDecodeError as exc:
        raise DetectionParseError(f"{path}: invalid JSON: {exc}") from exc
    if "images" not in doc or not isinstance(doc["images"], list):
        raise DetectionParseError(f"{path}: missing top-level 'images' list")

    detections: list[Detection] = []
    for index, image in enumerate(doc["images"]):
        try:
            stem = os.path.splitext(os.path.basename(image["file"]))[0]
            frame_id = _frame_id_from_stem(stem, index)
            for det in image.get("detections", []):
                conf = float(det["conf"])
                if conf < min_confidence:
                    continue
                x, y, w, h = (float(v) for v in det["bbox"])
                x = min(max(x, 0.0), 1.0)
                y = min(max(y, 0.0), 1.0)
                w = min(w, 1.0 - x)
                h = min(h, 1.0 - y)
                if w <= 0 or h <= 0:
                    continue
                detections.append(
                    Detection(
                        bbox=(x, y, w, h),
                        confidence=conf,
                        category=str(det["category"]),
                        frame_id=frame_id,
                        source=stem,
                    )
                )
        except (KeyError, TypeError, ValueError) as exc:
            raise DetectionParseError(
                f"{path}: images[{index}] ({image.get('file', '?')}): {exc}"
            ) from exc
    return detections


DISTANCES_CSV_HEADER = [
    "frame_id",
    "det_index",
    "category",
    "conf",
    "distance_m",
    "n_pixels",
    "fallback",
]


def write_distances_csv(
    path: str | os.PathLike,
    rows: list[tuple[int, int, str, float, InstanceDistance]],
) -> None:
    """Rows are (frame_id, det_index, category, confidence, distance)."""
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(DISTANCES_CSV_HEADER)
        for frame_id, det_index, category, conf, dist in rows:
            writer.writerow(
                [
                    frame_id,
                    det_index,
                    category,
                    repr(conf),
                    repr(dist.distance_m),
                    dist.n_pixels,
                    "true" if dist.fallback_used else "false",
                ]
            )


def read_distances_csv(path: str | os.PathLike) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.DictReader(f)
        if reader.fieldnames != DISTANCES_CSV_HEADER:
            raise ValueError(
                f"{path}: unexpected CSV header {reader.fieldnames}"
            )
        rows = []
        for row in reader:
            rows.append(
                {
                    "frame_id": int(row["frame_id"]),
                    "det_index": int(row["det_index"]),
                    "category": row["category"],
                    "conf": float(row["conf"]),
                    "distance_m": float(row["distance_m"]),
                    "n_pixels": int(row["n_pixels"]),
                    "fallback": row["fallback"] == "true",
                }
            )
    return rows
