"""Seeded depth-image augmentations with focal-length bookkeeping.

Each randomized operation is a deterministic function of (sample, seed) and
is built on a pure transform (mirror_sample, crop_sample, scale_sample) that
tests can drive directly. Depth resampling uses nearest-neighbor so no
depth value is ever interpolated across an object boundary.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import CameraIntrinsics, DepthMap

ASPECT_RATIOS = ((16, 9), (4, 3))
SCALE_RANGE = (0.75, 1.0)


class CropTooSmallError(ValueError):
    """The input raster cannot contain any target aspect ratio."""


@dataclass(frozen=True)
class AugSample:
    """An approximate/ground-truth depth pair with its camera model."""

    approx_depth: DepthMap
    gt_depth: DepthMap
    intrinsics: CameraIntrinsics

    def __post_init__(self) -> None:
        expected = (self.intrinsics.height, self.intrinsics.width)
        if self.approx_depth.shape != expected or self.gt_depth.shape != expected:
            raise ValueError(
                f"raster shapes {self.approx_depth.shape}/{self.gt_depth.shape} "
                f"do not match camera {expected}"
            )


def _mirror_depth(depth: DepthMap) -> DepthMap:
    return DepthMap(depth.values[:, ::-1].copy(), depth.valid[:, ::-1].copy(), depth.kind)


def mirror_sample(s: AugSample) -> AugSample:
    """Mirror both rasters about the vertical axis; u0 -> width-1-u0."""
    intr = s.intrinsics
    return AugSample(
        _mirror_depth(s.approx_depth),
        _mirror_depth(s.gt_depth),
        CameraIntrinsics(
            focal_px=intr.focal_px,
            width=intr.width,
            height=intr.height,
            principal_point=(intr.width - 1 - intr.u0, intr.v0),
            hfov_deg=intr.hfov_deg,
        ),
    )


def flip_horizontal(s: AugSample, rng_seed: int) -> AugSample:
    """Mirror the sample with probability 0.5 (seeded), else return it unchanged."""
    rng = np.random.default_rng(rng_seed)
    return mirror_sample(s) if rng.random() < 0.5 else s


def _crop_depth(depth: DepthMap, rect: tuple[int, int, int, int]) -> DepthMap:
    x, y, w, h = rect
    return DepthMap(
        depth.values[y : y + h, x : x + w].copy(),
        depth.valid[y : y + h, x : x + w].copy(),
        depth.kind,
    )


def crop_sample(s: AugSample, rect: tuple[int, int, int, int]) -> AugSample:
    """Crop both rasters to the pixel rect, translating the principal point."""
    x, y, w, h = rect
    intr = s.intrinsics
    if x < 0 or y < 0 or x + w > intr.width or y + h > intr.height or w < 1 or h < 1:
        raise ValueError(f"crop rect {rect} outside {intr.width}x{intr.height}")
    return AugSample(
        _crop_depth(s.approx_depth, rect),
        _crop_depth(s.gt_depth, rect),
        # hfov_deg dropped: a crop narrows the field of view.
        CameraIntrinsics(
            focal_px=intr.focal_px,
            width=w,
            height=h,
            principal_point=(intr.u0 - x, intr.v0 - y),
        ),
    )


def crop_aspect(s: AugSample, rng_seed: int) -> AugSample:
    """Maximal randomly placed crop with exact 16:9 or 4:3 aspect (seeded)."""
    rng = np.random.default_rng(rng_seed)
    width, height = s.intrinsics.width, s.intrinsics.height
    fits = []
    for aw, ah in ASPECT_RATIOS:
        k = min(width // aw, height // ah)
        if k >= 1:
            fits.append((aw * k, ah * k))
    if not fits:
        raise CropTooSmallError(
            f"{width}x{height} cannot contain a 16:9 or 4:3 crop"
        )
    choice = int(rng.integers(0, len(fits)))
    w, h = fits[choice]
    x = int(rng.integers(0, width - w + 1))
    y = int(rng.integers(0, height - h + 1))
    return crop_sample(s, (x, y, w, h))


def _resize_nearest(values: np.ndarray, out_shape: tuple[int, int]) -> np.ndarray:
    in_h, in_w = values.shape
    out_h, out_w = out_shape
    rows = np.minimum((np.arange(out_h) + 0.5) * in_h / out_h, in_h - 1).astype(int)
    cols = np.minimum((np.arange(out_w) + 0.5) * in_w / out_w, in_w - 1).astype(int)
    return values[np.ix_(rows, cols)]


def scale_sample(s: AugSample, factor: float) -> AugSample:
    """Zoom-consistent depth rescaling by ``factor``.

    Takes the centered factor-fraction crop, multiplies both depth rasters
    by the factor, resizes back to the original resolution (nearest
    neighbor), and divides the focal length by the factor.
    """
    if not 0 < factor <= 1:
        raise ValueError(f"scale factor must be in (0, 1], got {factor}")
    intr = s.intrinsics
    width, height = intr.width, intr.height
    cw = max(1, int(round(width * factor)))
    ch = max(1, int(round(height * factor)))
    x0 = (width - cw) // 2
    y0 = (height - ch) // 2

    def transform(depth: DepthMap) -> DepthMap:
        values = depth.values[y0 : y0 + ch, x0 : x0 + cw]
        valid = depth.valid[y0 : y0 + ch, x0 : x0 + cw]
        out_values = _resize_nearest(values, (height, width)) * factor
        out_valid = _resize_nearest(valid, (height, width))
        return DepthMap(np.where(out_valid, out_values, 0.0), out_valid, depth.kind)

    rx = width / cw
    ry = height / ch
    return AugSample(
        transform(s.approx_depth),
        transform(s.gt_depth),
        CameraIntrinsics(
            focal_px=intr.focal_px / factor,
            width=width,
            height=height,
            principal_point=((intr.u0 - x0) * rx, (intr.v0 - y0) * ry),
        ),
    )


def scale_depth(s: AugSample, rng_seed: int) -> AugSample:
    """Apply scale_sample with a seeded factor drawn uniformly from [0.75, 1]."""
    rng = np.random.default_rng(rng_seed)
    return scale_sample(s, float(rng.uniform(*SCALE_RANGE)))
