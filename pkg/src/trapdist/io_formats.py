"""On-disk raster formats.

Depth rasters are 16-bit grayscale PNG holding millimeters, with 0 marking
invalid pixels. Disparity and attention rasters are single-channel PFM
(bottom-up row order, negative scale = little-endian); non-finite samples
mark invalid pixels.
"""

from __future__ import annotations

import os

import numpy as np
from PIL import Image

from .geometry import DepthKind, DepthMap, DisparityMap

MM_PER_M = 1000.0


class RasterFormatError(ValueError):
    """A raster file does not match the expected format."""


def read_pfm(path: str | os.PathLike) -> np.ndarray:
    """Read a single-channel PFM file into a float array (top-down rows)."""
    with open(path, "rb") as f:
        header = f.readline().rstrip()
        if header != b"Pf":
            raise RasterFormatError(
                f"{path}: expected single-channel PFM header 'Pf', got {header!r}"
            )
        dims = f.readline().split()
        if len(dims) != 2:
            raise RasterFormatError(f"{path}: malformed PFM dimension line")
        width, height = int(dims[0]), int(dims[1])
        scale = float(f.readline())
        dtype = "<f4" if scale < 0 else ">f4"
        data = np.frombuffer(f.read(width * height * 4), dtype=dtype)
    if data.size != width * height:
        raise RasterFormatError(f"{path}: truncated PFM payload")
    # PFM stores rows bottom-up.
    return np.flipud(data.reshape(height, width)).astype(np.float64)


def write_pfm(path: str | os.PathLike, values: np.ndarray) -> None:
    """Write a 2D float array as little-endian single-channel PFM."""
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 2:
        raise RasterFormatError("PFM writer expects a 2D array")
    height, width = values.shape
    with open(path, "wb") as f:
        f.write(b"Pf\n")
        f.write(f"{width} {height}\n".encode("ascii"))
        f.write(b"-1.0\n")
        f.write(np.flipud(values).astype("<f4").tobytes())


def load_disparity(path: str | os.PathLike) -> DisparityMap:
    """Load a PFM disparity raster; non-finite samples become invalid."""
    values = read_pfm(path)
    valid = np.isfinite(values)
    return DisparityMap(np.where(valid, values, 0.0), valid)


def save_disparity(path: str | os.PathLike, disparity: DisparityMap) -> None:
    write_pfm(path, np.where(disparity.valid, disparity.values, np.nan))


def load_depth_png16(path: str | os.PathLike, kind: DepthKind) -> DepthMap:
    """Load a millimeter-encoded 16-bit PNG depth raster."""
    arr = np.asarray(Image.open(path))
    if arr.ndim != 2:
        raise RasterFormatError(f"{path}: expected single-channel 16-bit PNG")
    arr = arr.astype(np.uint16)
    valid = arr > 0
    values = arr.astype(np.float64) / MM_PER_M
    return DepthMap(np.where(valid, values, 0.0), valid, kind)


def save_depth_png16(path: str | os.PathLike, depth: DepthMap) -> None:
    """Save a depth raster as 16-bit PNG millimeters (0 = invalid).

    Valid depths are rounded to the nearest millimeter and saturate at the
    encodable range [1 mm, 65.535 m].
    """
    mm = np.zeros(depth.values.shape, dtype=np.uint16)
    if depth.valid.any():
        quantized = np.rint(depth.values[depth.valid] * MM_PER_M)
        mm[depth.valid] = np.clip(quantized, 1, np.iinfo(np.uint16).max)
    Image.fromarray(mm).save(path, format="PNG")
