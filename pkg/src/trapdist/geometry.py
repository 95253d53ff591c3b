"""Pinhole camera model, depth/disparity rasters, and 3D unprojection.

Rasters are row-major with the origin at the top-left corner; a pixel
coordinate (u, v) means (column, row). All functions here are pure and safe
to call concurrently.
"""

from __future__ import annotations

import math
import os
import warnings
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

# Guard against division by (near-)zero denominators when inverting
# disparity; affected pixels are invalidated instead of producing inf/NaN.
DENOM_EPS = 1e-9

# Relative tolerance for checking a supplied focal length against the one
# implied by the horizontal field of view.
_FOCAL_CONSISTENCY_RTOL = 1e-9


class DimensionMismatchError(ValueError):
    """Raster dimensions do not match the paired camera model."""


def focal_from_fov(width_px: int, hfov_deg: float) -> float:
    """Focal length in pixels from image width and horizontal field of view."""
    if width_px <= 0:
        raise ValueError(f"width_px must be positive, got {width_px}")
    if not 0.0 < hfov_deg < 180.0:
        raise ValueError(f"hfov_deg must be in (0, 180), got {hfov_deg}")
    return width_px * 0.5 / math.tan(hfov_deg * 0.5 * math.pi / 180.0)


@dataclass(frozen=True)
class CameraIntrinsics:
    """Pinhole camera: focal length in pixels, principal point, resolution.

    The principal point defaults to the raster center ((w-1)/2, (h-1)/2).
    When ``hfov_deg`` is given alongside an explicit focal length, the two
    are cross-checked; a mismatch warns but the supplied focal wins (vendor
    specs occasionally disagree with the exact FOV formula).
    """

    focal_px: float
    width: int
    height: int
    principal_point: tuple[float, float] = field(default=None)  # type: ignore[assignment]
    hfov_deg: float | None = None

    def __post_init__(self) -> None:
        if self.focal_px <= 0:
            raise ValueError(f"focal_px must be positive, got {self.focal_px}")
        if self.width <= 0 or self.height <= 0:
            raise ValueError(
                f"image size must be positive, got {self.width}x{self.height}"
            )
        if self.principal_point is None:
            object.__setattr__(
                self,
                "principal_point",
                ((self.width - 1) / 2.0, (self.height - 1) / 2.0),
            )
        if self.hfov_deg is not None:
            implied = focal_from_fov(self.width, self.hfov_deg)
            if abs(self.focal_px - implied) > _FOCAL_CONSISTENCY_RTOL * implied:
                warnings.warn(
                    f"focal_px={self.focal_px} disagrees with the value "
                    f"{implied:.4f} implied by hfov_deg={self.hfov_deg}; "
                    "trusting the supplied focal length",
                    stacklevel=2,
                )

    @classmethod
    def from_fov(
        cls,
        width: int,
        height: int,
        hfov_deg: float,
        principal_point: tuple[float, float] | None = None,
    ) -> "CameraIntrinsics":
        return cls(
            focal_px=focal_from_fov(width, hfov_deg),
            width=width,
            height=height,
            principal_point=principal_point,
            hfov_deg=hfov_deg,
        )

    @property
    def u0(self) -> float:
        return self.principal_point[0]

    @property
    def v0(self) -> float:
        return self.principal_point[1]

    def to_json_dict(self) -> dict:
        return {
            "focal_px": self.focal_px,
            "width": self.width,
            "height": self.height,
            "principal_point": list(self.principal_point),
            "hfov_deg": self.hfov_deg,
        }

    @classmethod
    def from_json_dict(cls, doc: dict) -> "CameraIntrinsics":
        pp = doc.get("principal_point")
        return cls(
            focal_px=float(doc["focal_px"]),
            width=int(doc["width"]),
            height=int(doc["height"]),
            principal_point=tuple(pp) if pp is not None else None,
            hfov_deg=doc.get("hfov_deg"),
        )


class DepthKind(Enum):
    APPROXIMATE = "approximate"
    METRIC = "metric"
    GROUND_TRUTH = "ground_truth"


def _check_raster(values: np.ndarray, valid: np.ndarray) -> None:
    if values.ndim != 2:
        raise ValueError(f"raster must be 2D, got shape {values.shape}")
    if valid.shape != values.shape:
        raise ValueError(
            f"validity mask shape {valid.shape} != raster shape {values.shape}"
        )


@dataclass(frozen=True)
class DisparityMap:
    """Unitless relative disparity with a per-pixel validity mask."""

    values: np.ndarray
    valid: np.ndarray

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=np.float64)
        valid = np.asarray(self.valid, dtype=bool)
        _check_raster(values, valid)
        if not np.isfinite(values[valid]).all():
            raise ValueError("disparity has non-finite values at valid pixels")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "valid", valid)

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape


@dataclass(frozen=True)
class DepthMap:
    """Depth in meters with a per-pixel validity mask."""

    values: np.ndarray
    valid: np.ndarray
    kind: DepthKind

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=np.float64)
        valid = np.asarray(self.valid, dtype=bool)
        _check_raster(values, valid)
        picked = values[valid]
        if not (np.isfinite(picked).all() and (picked > 0).all()):
            raise ValueError("depth must be positive and finite at valid pixels")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "valid", valid)

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape


@dataclass(frozen=True)
class PointCloud:
    """3D points in meters plus the (u, v) pixel each one came from."""

    points: np.ndarray  # (N, 3) float64
    source_pixel: np.ndarray  # (N, 2) int64, columns (u, v)

    def __post_init__(self) -> None:
        points = np.asarray(self.points, dtype=np.float64).reshape(-1, 3)
        source = np.asarray(self.source_pixel, dtype=np.int64).reshape(-1, 2)
        if len(points) != len(source):
            raise ValueError("points and source_pixel lengths differ")
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "source_pixel", source)

    def __len__(self) -> int:
        return len(self.points)


def invert_disparity(
    d_hat: DisparityMap, scale: float, shift: float, kind: DepthKind
) -> DepthMap:
    """Depth = 1 / (disparity * scale + shift), invalidating denominators
    at or below DENOM_EPS instead of propagating inf/NaN."""
    den = d_hat.values * scale + shift
    ok = d_hat.valid & (den > DENOM_EPS)
    values = np.where(ok, 1.0 / np.where(ok, den, 1.0), 0.0)
    return DepthMap(values, ok, kind)


def disparity_to_approx_depth(d_hat: DisparityMap, calib) -> DepthMap:
    """Invert disparity into an approximate depth map: 1 / (d * scale + shift).

    ``calib`` is anything with ``scale`` and ``shift`` attributes (a global
    calibration or an affine parameter pair in disparity space).
    """
    return invert_disparity(d_hat, calib.scale, calib.shift, DepthKind.APPROXIMATE)


def apply_affine_depth(d_bar: DepthMap, params) -> DepthMap:
    """Affine depth-space alignment: scale * d + shift, invalidating d <= 0."""
    if params.scale <= 0:
        raise ValueError(f"scale must be positive, got {params.scale}")
    values = d_bar.values * params.scale + params.shift
    ok = d_bar.valid & (values > 0)
    return DepthMap(np.where(ok, values, 0.0), ok, DepthKind.METRIC)


def unproject(depth: DepthMap, intr: CameraIntrinsics) -> PointCloud:
    """Lift every valid depth pixel to a 3D point through the pinhole model."""
    if depth.shape != (intr.height, intr.width):
        raise DimensionMismatchError(
            f"depth raster {depth.shape} does not match camera "
            f"{intr.height}x{intr.width}"
        )
    vs, us = np.nonzero(depth.valid)
    d = depth.values[vs, us]
    x = (us - intr.u0) / intr.focal_px * d
    y = (vs - intr.v0) / intr.focal_px * d
    points = np.column_stack([x, y, d])
    return PointCloud(points, np.column_stack([us, vs]))


def export_pointcloud(cloud: PointCloud, path: str | os.PathLike) -> None:
    """Write an ASCII PLY file with one float32 vertex per point."""
    if len(cloud) == 0:
        raise ValueError("refusing to export an empty point cloud")
    pts = cloud.points.astype(np.float32)
    with open(path, "w", encoding="ascii") as f:
        f.write("ply\n")
        f.write("format ascii 1.0\n")
        f.write(f"element vertex {len(pts)}\n")
        f.write("property float x\n")
        f.write("property float y\n")
        f.write("property float z\n")
        f.write("end_header\n")
        for x, y, z in pts:
            f.write(f"{x:.9g} {y:.9g} {z:.9g}\n")


def read_pointcloud_ply(path: str | os.PathLike) -> np.ndarray:
    """Parse the vertices of an ASCII PLY written by export_pointcloud."""
    with open(path, encoding="ascii") as f:
        if f.readline().strip() != "ply":
            raise ValueError(f"{path}: not a PLY file")
        n = None
        for line in f:
            line = line.strip()
            if line.startswith("element vertex"):
                n = int(line.split()[-1])
            elif line == "end_header":
                break
        if n is None:
            raise ValueError(f"{path}: missing vertex element")
        rows = [f.readline().split() for _ in range(n)]
    return np.array(rows, dtype=np.float64)
