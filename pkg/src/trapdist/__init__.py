"""Metric camera-to-animal distances and depth-aware tracking.

Turns relative monocular-depth output plus animal detections into metric
distances and 3D-aware multi-object tracks: affine metric alignment,
pinhole unprojection, attention-mask distance extraction, depth-extended
SORT tracking, and the matching depth / CLEAR-MOT evaluation suites.
"""

from .alignment import (
    AffineDepthParams,
    Aligner,
    FixedAligner,
    GlobalCalibration,
    LossConfig,
    RansacAligner,
    RansacConfig,
    Space,
    depth_align,
    fit_global_calibration,
    metric_depth_from_disparity_fit,
    ransac_align_disparity,
    weighted_loss,
)
from .evaluation import (
    DepthReport,
    MotReport,
    depth_metrics,
    instance_depth_metrics,
    mot_metrics,
)
from .geometry import (
    CameraIntrinsics,
    DepthKind,
    DepthMap,
    DisparityMap,
    PointCloud,
    apply_affine_depth,
    disparity_to_approx_depth,
    export_pointcloud,
    focal_from_fov,
    unproject,
)
from .instances import (
    AttentionMap,
    Detection,
    InstanceDistance,
    InstanceMask,
    expand_bbox,
    ingest_detections,
    instance_distance,
    threshold_attention,
)
from .kernels import BACKEND
from .tracking import (
    AssociationConfig,
    Observation3D,
    Sort25DTracker,
    TrackUpdate,
    dist_z,
    iou,
    sim_score,
)

__version__ = "0.1.0"

__all__ = [
    "AffineDepthParams",
    "Aligner",
    "AssociationConfig",
    "AttentionMap",
    "BACKEND",
    "CameraIntrinsics",
    "DepthKind",
    "DepthMap",
    "DepthReport",
    "Detection",
    "DisparityMap",
    "FixedAligner",
    "GlobalCalibration",
    "InstanceDistance",
    "InstanceMask",
    "LossConfig",
    "MotReport",
    "Observation3D",
    "PointCloud",
    "RansacAligner",
    "RansacConfig",
    "Sort25DTracker",
    "Space",
    "TrackUpdate",
    "apply_affine_depth",
    "depth_align",
    "depth_metrics",
    "disparity_to_approx_depth",
    "dist_z",
    "expand_bbox",
    "export_pointcloud",
    "fit_global_calibration",
    "focal_from_fov",
    "ingest_detections",
    "instance_depth_metrics",
    "instance_distance",
    "iou",
    "metric_depth_from_disparity_fit",
    "mot_metrics",
    "ransac_align_disparity",
    "sim_score",
    "threshold_attention",
    "unproject",
    "weighted_loss",
]
