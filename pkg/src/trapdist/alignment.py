"""Affine scale/shift estimation between relative and metric depth.

The robust fit is RANSAC with a least-squares inner solver: candidate models
come from random minimal samples, are scored by absolute-residual consensus,
and the winner is refined by ordinary least squares on its inlier set. The
same engine runs in disparity space (fitting scale * disparity + shift
against inverted ground truth) and in depth space (fitting approximate depth
against ground truth directly, the reference implementation of the aligner
role a learned model would otherwise fill).
"""

from __future__ import annotations

import json
import math
import os
from abc import ABC, abstractmethod
from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import kernels
from .geometry import DepthKind, DepthMap, DisparityMap, invert_disparity

# Lower bound on the consensus threshold so noiseless data (median residual
# ~1e-17) still admits inliers.
_MIN_THRESHOLD = 1e-12


class InsufficientOverlapError(ValueError):
    """Too few jointly valid pixels to fit."""


class DegenerateFitError(ValueError):
    """The design matrix has insufficient rank (e.g. constant disparity)."""


class SpaceMismatchError(ValueError):
    """Affine parameters were produced for a different space."""


class Space(Enum):
    DISPARITY = "disparity"
    DEPTH = "depth"


@dataclass(frozen=True)
class AffineDepthParams:
    """A scale/shift pair, tagged with the space it parameterizes.

    Disparity-space pairs map disparity to depth via 1/(d*scale + shift);
    depth-space pairs map approximate depth to metric via d*scale + shift.
    """

    scale: float
    shift: float
    space: Space

    def __post_init__(self) -> None:
        if not (math.isfinite(self.scale) and math.isfinite(self.shift)):
            raise ValueError("scale and shift must be finite")


@dataclass(frozen=True)
class GlobalCalibration:
    """Disparity-space scale/shift averaged over per-frame fits."""

    scale: float
    shift: float
    n_frames: int

    def __post_init__(self) -> None:
        if not (math.isfinite(self.scale) and math.isfinite(self.shift)):
            raise ValueError("scale and shift must be finite")
        if self.n_frames < 1:
            raise ValueError(f"n_frames must be >= 1, got {self.n_frames}")


@dataclass(frozen=True)
class RansacConfig:
    """Knobs for the robust affine fit.

    ``inlier_threshold`` is in residual units (disparity units for the
    disparity fit, meters for the depth fit); None derives it as 1.5x the
    median absolute residual of an initial full least-squares fit.
    Rasters with more than ``max_points`` jointly valid pixels are uniformly
    subsampled (seeded) before fitting.
    """

    iterations: int = 500
    inlier_threshold: float | None = None
    min_samples: int = 2
    seed: int = 0
    max_points: int = 100_000

    def __post_init__(self) -> None:
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.inlier_threshold is not None and self.inlier_threshold <= 0:
            raise ValueError("inlier_threshold must be positive")
        if self.min_samples < 2:
            raise ValueError("min_samples must be >= 2")
        if self.max_points < self.min_samples:
            raise ValueError("max_points must be >= min_samples")


@dataclass(frozen=True)
class LossConfig:
    """Weight factor (1/meters) for the distance-weighted squared loss."""

    alpha: float = 0.04

    def __post_init__(self) -> None:
        if self.alpha < 0:
            raise ValueError(f"alpha must be >= 0, got {self.alpha}")


def _ols(x: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    """Closed-form least squares of y ~ m*x + c."""
    n = float(x.size)
    sx = float(x.sum())
    sy = float(y.sum())
    sxx = float((x * x).sum())
    sxy = float((x * y).sum())
    den = n * sxx - sx * sx
    if not math.isfinite(den) or den <= 1e-12 * n * sxx or den <= 0.0:
        raise DegenerateFitError("design matrix is rank deficient (constant input?)")
    m = (n * sxy - sx * sy) / den
    c = (sy - m * sx) / n
    return m, c


def fit_affine_robust(
    x: np.ndarray, y: np.ndarray, cfg: RansacConfig
) -> tuple[float, float]:
    """RANSAC fit of y ~ m*x + c over paired samples; deterministic in seed."""
    x = np.asarray(x, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    if x.size != y.size:
        raise ValueError("x and y must have equal length")
    if x.size < cfg.min_samples:
        raise InsufficientOverlapError(
            f"need at least {cfg.min_samples} samples, got {x.size}"
        )
    rng = np.random.default_rng(cfg.seed)
    if x.size > cfg.max_points:
        keep = rng.choice(x.size, cfg.max_points, replace=False)
        keep.sort()
        x = x[keep]
        y = y[keep]

    m0, c0 = _ols(x, y)
    if cfg.inlier_threshold is not None:
        threshold = cfg.inlier_threshold
    else:
        threshold = 1.5 * float(np.median(np.abs(m0 * x + c0 - y)))
    threshold = max(threshold, _MIN_THRESHOLD)

    samples = rng.integers(0, x.size, size=(cfg.iterations, cfg.min_samples))
    m, c, _ = kernels.ransac_consensus(x, y, samples, threshold)
    if not math.isfinite(m):
        # Every sampled row was degenerate; the full fit is the best we have.
        return m0, c0

    # Refit on the consensus set, re-deriving the threshold from the current
    # model's residuals each round so the inlier set contracts onto the
    # clean points (with an explicit threshold the set is just iterated to a
    # fixed point).
    for _ in range(8):
        resid = np.abs(m * x + c - y)
        if cfg.inlier_threshold is None:
            threshold = max(1.5 * float(np.median(resid)), _MIN_THRESHOLD)
        inliers = resid <= threshold
        if inliers.sum() < 2:
            break
        try:
            m_new, c_new = _ols(x[inliers], y[inliers])
        except DegenerateFitError:
            break
        if m_new == m and c_new == c:
            break
        m, c = m_new, c_new
    return m, c


def _joint_values(
    a_values: np.ndarray,
    a_valid: np.ndarray,
    b_values: np.ndarray,
    b_valid: np.ndarray,
    min_count: int,
) -> tuple[np.ndarray, np.ndarray]:
    if a_values.shape != b_values.shape:
        raise ValueError(
            f"raster shapes differ: {a_values.shape} vs {b_values.shape}"
        )
    joint = a_valid & b_valid
    n = int(joint.sum())
    if n < min_count:
        raise InsufficientOverlapError(
            f"only {n} jointly valid pixels, need at least {min_count}"
        )
    return a_values[joint], b_values[joint]


def ransac_align_disparity(
    d_hat: DisparityMap, g: DepthMap, cfg: RansacConfig = RansacConfig()
) -> AffineDepthParams:
    """Fit disparity-space scale/shift so d*scale + shift matches 1/g."""
    x, g_vals = _joint_values(
        d_hat.values, d_hat.valid, g.values, g.valid, cfg.min_samples
    )
    m, c = fit_affine_robust(x, 1.0 / g_vals, cfg)
    return AffineDepthParams(m, c, Space.DISPARITY)


def depth_align(
    d_bar: DepthMap, g: DepthMap, cfg: RansacConfig = RansacConfig()
) -> AffineDepthParams:
    """Robust fit of metric = scale * approximate + shift against ground truth."""
    x, y = _joint_values(
        d_bar.values, d_bar.valid, g.values, g.valid, cfg.min_samples
    )
    m, c = fit_affine_robust(x, y, cfg)
    return AffineDepthParams(m, c, Space.DEPTH)


def metric_depth_from_disparity_fit(
    d_hat: DisparityMap, params: AffineDepthParams
) -> DepthMap:
    """Convert disparity to metric depth using a disparity-space fit."""
    if params.space is not Space.DISPARITY:
        raise SpaceMismatchError(
            f"expected disparity-space parameters, got {params.space.value}"
        )
    return invert_disparity(d_hat, params.scale, params.shift, DepthKind.METRIC)


def fit_global_calibration(
    pairs: list[tuple[DisparityMap, DepthMap]], cfg: RansacConfig = RansacConfig()
) -> GlobalCalibration:
    """Average per-frame disparity-space fits into one global calibration."""
    if not pairs:
        raise ValueError("cannot fit a global calibration from zero frames")
    fits = [ransac_align_disparity(d_hat, g, cfg) for d_hat, g in pairs]
    scale = sum(f.scale for f in fits) / len(fits)
    shift = sum(f.shift for f in fits) / len(fits)
    return GlobalCalibration(scale, shift, len(fits))


def weighted_loss(
    d_m: DepthMap, g: DepthMap, cfg: LossConfig = LossConfig()
) -> float:
    """Mean squared depth error, down-weighted exponentially with distance.

    Each jointly valid pixel contributes (d - g)^2 * exp(-alpha * g); the sum
    is divided by the jointly valid pixel count, so errors near the camera
    dominate for alpha > 0 and alpha = 0 reduces to plain MSE.
    """
    if d_m.values.shape != g.values.shape:
        raise ValueError(
            f"raster shapes differ: {d_m.values.shape} vs {g.values.shape}"
        )
    joint = d_m.valid & g.valid
    n = int(joint.sum())
    if n == 0:
        raise InsufficientOverlapError("no jointly valid pixels")
    d = d_m.values[joint]
    gt = g.values[joint]
    return float(((d - gt) ** 2 * np.exp(-cfg.alpha * gt)).sum()) / n


class Aligner(ABC):
    """Maps an approximate depth map to depth-space affine parameters."""

    @abstractmethod
    def fit(
        self, approx_depth: DepthMap, ground_truth: DepthMap | None = None
    ) -> AffineDepthParams:
        raise NotImplementedError


class RansacAligner(Aligner):
    """Aligns against ground truth with the robust depth-space fit."""

    def __init__(self, cfg: RansacConfig = RansacConfig()):
        self.cfg = cfg

    def fit(
        self, approx_depth: DepthMap, ground_truth: DepthMap | None = None
    ) -> AffineDepthParams:
        if ground_truth is None:
            raise ValueError("RansacAligner requires ground truth")
        return depth_align(approx_depth, ground_truth, self.cfg)


class FixedAligner(Aligner):
    """Returns externally supplied parameters (e.g. from a trained model)."""

    def __init__(self, params: AffineDepthParams):
        self.params = params

    def fit(
        self, approx_depth: DepthMap, ground_truth: DepthMap | None = None
    ) -> AffineDepthParams:
        return self.params


def params_to_json_dict(obj: AffineDepthParams | GlobalCalibration) -> dict:
    if isinstance(obj, GlobalCalibration):
        return {
            "scale": obj.scale,
            "shift": obj.shift,
            "space": Space.DISPARITY.value,
            "n_frames": obj.n_frames,
        }
    return {
        "scale": obj.scale,
        "shift": obj.shift,
        "space": obj.space.value,
        "n_frames": None,
    }


def params_from_json_dict(doc: dict) -> AffineDepthParams | GlobalCalibration:
    if doc.get("n_frames") is not None:
        return GlobalCalibration(
            float(doc["scale"]), float(doc["shift"]), int(doc["n_frames"])
        )
    return AffineDepthParams(
        float(doc["scale"]), float(doc["shift"]), Space(doc["space"])
    )


def save_params(
    path: str | os.PathLike, obj: AffineDepthParams | GlobalCalibration
) -> None:
    with open(path, "w", encoding="ascii") as f:
        json.dump(params_to_json_dict(obj), f, indent=2)
        f.write("\n")


def load_params(path: str | os.PathLike) -> AffineDepthParams | GlobalCalibration:
    with open(path, encoding="ascii") as f:
        return params_from_json_dict(json.load(f))
