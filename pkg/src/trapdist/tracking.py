"""Depth-aware multi-object tracking (SORT extended with a depth channel).

Each track runs two constant-velocity Kalman filters: the standard SORT
7-state box filter over (center, area, aspect) and an independent 2-state
(depth, depth velocity) filter. Association maximizes
alpha * IoU + (1 - alpha) * depth-similarity over an optimal bipartite
assignment; with alpha = 1 (and the depth channel disabled) behavior
reduces exactly to classic 2D SORT on the same observations.

A tracker session is stateful and strictly sequential per video; the
scoring helpers are pure.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

# Floor for predicted depth fed into the similarity metric.
MIN_PREDICTED_Z = 0.01

Rect = tuple[float, float, float, float]  # (x, y, w, h) pixels


class FrameOrderError(ValueError):
    """Observations arrived out of frame order."""


@dataclass(frozen=True)
class Observation3D:
    """A detection's pixel box plus its estimated camera distance."""

    bbox: Rect
    z: float
    frame_id: int
    det_index: int

    def __post_init__(self) -> None:
        if self.z <= 0:
            raise ValueError(f"observation depth must be positive, got {self.z}")
        if self.bbox[2] <= 0 or self.bbox[3] <= 0:
            raise ValueError(f"bbox {self.bbox} has nonpositive extent")


@dataclass(frozen=True)
class AssociationConfig:
    """Association and lifecycle knobs.

    ``alpha`` weights IoU against depth similarity; ``dist_max`` is the depth
    difference (meters) beyond which similarity clips to zero. Tracks retire
    after ``max_age`` consecutive unmatched frames and are only emitted once
    they have ``min_hits`` total matches. ``use_depth`` = False disables the
    depth filter entirely (the depth similarity term reads as zero, so only
    alpha = 1 is meaningful then).
    """

    alpha: float = 0.5
    dist_max: float = 4.0
    sim_threshold: float = 0.3
    max_age: int = 3
    min_hits: int = 2
    depth_std: float = 0.5
    use_depth: bool = True

    def __post_init__(self) -> None:
        if not 0 <= self.alpha <= 1:
            raise ValueError(f"alpha must be in [0,1], got {self.alpha}")
        if self.dist_max <= 0:
            raise ValueError(f"dist_max must be positive, got {self.dist_max}")


def iou(a: Rect, b: Rect) -> float:
    """Intersection over union of two (x, y, w, h) rects."""
    ax, ay, aw, ah = a
    bx, by, bw, bh = b
    ix = max(0.0, min(ax + aw, bx + bw) - max(ax, bx))
    iy = max(0.0, min(ay + ah, by + bh) - max(ay, by))
    inter = ix * iy
    union = aw * ah + bw * bh - inter
    return inter / union if union > 0 else 0.0


def dist_z(z_t: float, z_det: float, dist_max: float) -> float:
    """Depth similarity: 1 at equal depth, 0 beyond dist_max apart."""
    if dist_max <= 0:
        raise ValueError(f"dist_max must be positive, got {dist_max}")
    return min(max((dist_max - abs(z_t - z_det)) / dist_max, 0.0), 1.0)


def sim_score(iou_val: float, dz_val: float, alpha: float) -> float:
    """Blend of box overlap and depth similarity, weighted by alpha."""
    return alpha * iou_val + (1.0 - alpha) * dz_val


def bbox_to_state(bbox: Rect) -> tuple[float, float, float, float]:
    """(x, y, w, h) -> (center u, center v, area, aspect ratio)."""
    x, y, w, h = bbox
    return x + w / 2.0, y + h / 2.0, w * h, w / h


def state_to_bbox(cu: float, cv: float, area: float, aspect: float) -> Rect:
    """Inverse of bbox_to_state; degenerate states give a zero-size box."""
    wh = area * aspect
    w = math.sqrt(wh) if wh > 0 else 0.0
    h = area / w if w > 0 else 0.0
    return cu - w / 2.0, cv - h / 2.0, w, h


class KalmanBoxFilter:
    """Classic SORT constant-velocity filter over (cu, cv, area, aspect)."""

    def __init__(self, bbox: Rect):
        self.F = np.eye(7)
        for i in range(3):
            self.F[i, i + 4] = 1.0
        self.H = np.zeros((4, 7))
        self.H[:4, :4] = np.eye(4)
        self.R = np.diag([1.0, 1.0, 10.0, 10.0])
        self.P = np.diag([10.0, 10.0, 10.0, 10.0, 1e4, 1e4, 1e4])
        self.Q = np.diag([1.0, 1.0, 1.0, 1.0, 0.01, 0.01, 1e-4])
        self.x = np.zeros(7)
        self.x[:4] = bbox_to_state(bbox)

    def predict(self) -> Rect:
        # Freeze the area velocity if it would drive the area nonpositive.
        if self.x[2] + self.x[6] <= 0:
            self.x[6] = 0.0
        self.x = self.F @ self.x
        self.P = self.F @ self.P @ self.F.T + self.Q
        return state_to_bbox(*self.x[:4])

    def update(self, bbox: Rect) -> None:
        z = np.array(bbox_to_state(bbox))
        y = z - self.H @ self.x
        S = self.H @ self.P @ self.H.T + self.R
        K = self.P @ self.H.T @ np.linalg.inv(S)
        self.x = self.x + K @ y
        self.P = (np.eye(7) - K @ self.H) @ self.P


class KalmanDepthFilter:
    """Constant-velocity filter over (z, dz/dt) in meters."""

    def __init__(self, z: float, meas_std: float):
        self.F = np.array([[1.0, 1.0], [0.0, 1.0]])
        self.H = np.array([[1.0, 0.0]])
        self.R = np.array([[meas_std**2]])
        self.P = np.diag([1.0, 100.0])
        self.Q = np.diag([0.01, 1e-4])
        self.x = np.array([z, 0.0])

    def predict(self) -> float:
        self.x = self.F @ self.x
        self.P = self.F @ self.P @ self.F.T + self.Q
        return float(self.x[0])

    def update(self, z: float) -> None:
        y = np.array([z]) - self.H @ self.x
        S = self.H @ self.P @ self.H.T + self.R
        K = self.P @ self.H.T @ np.linalg.inv(S)
        self.x = self.x + K @ y
        self.P = (np.eye(2) - K @ self.H) @ self.P


class _Track:
    def __init__(self, track_id: int, obs: Observation3D, cfg: AssociationConfig):
        self.track_id = track_id
        self.box_filter = KalmanBoxFilter(obs.bbox)
        self.depth_filter = (
            KalmanDepthFilter(obs.z, cfg.depth_std) if cfg.use_depth else None
        )
        self.last_obs = obs
        self.age = 0
        self.hits = 1
        self.time_since_update = 0
        self.predicted_bbox = obs.bbox
        self.predicted_z = obs.z

    def predict(self) -> None:
        self.predicted_bbox = self.box_filter.predict()
        if self.depth_filter is not None:
            self.predicted_z = max(self.depth_filter.predict(), MIN_PREDICTED_Z)
        else:
            self.predicted_z = self.last_obs.z
        self.age += 1
        self.time_since_update += 1

    def update(self, obs: Observation3D) -> None:
        self.box_filter.update(obs.bbox)
        if self.depth_filter is not None:
            self.depth_filter.update(obs.z)
        self.last_obs = obs
        self.hits += 1
        self.time_since_update = 0


@dataclass(frozen=True)
class TrackUpdate:
    """One emitted track state: the matched observation or the prediction."""

    frame_id: int
    track_id: int
    bbox: Rect
    z: float
    matched: bool


class Sort25DTracker:
    """Stateful per-video tracker; feed frames in increasing order."""

    def __init__(self, cfg: AssociationConfig = AssociationConfig()):
        self.cfg = cfg
        self.tracks: list[_Track] = []
        self.last_frame_id: int | None = None
        self._next_track_id = 1

    def step(
        self, frame_id: int, observations: list[Observation3D]
    ) -> list[TrackUpdate]:
        """Advance one frame; returns the emitted tracks for this frame."""
        if self.last_frame_id is not None and frame_id <= self.last_frame_id:
            raise FrameOrderError(
                f"frame {frame_id} after frame {self.last_frame_id}"
            )
        for obs in observations:
            if obs.frame_id != frame_id:
                raise FrameOrderError(
                    f"observation from frame {obs.frame_id} in step({frame_id})"
                )
        self.last_frame_id = frame_id

        for track in self.tracks:
            track.predict()

        matched, unmatched_obs = self._associate(observations)
        for track_idx, obs in matched:
            self.tracks[track_idx].update(observations[obs])
        for obs_idx in unmatched_obs:
            self.tracks.append(
                _Track(self._next_track_id, observations[obs_idx], self.cfg)
            )
            self._next_track_id += 1

        self.tracks = [
            t for t in self.tracks if t.time_since_update <= self.cfg.max_age
        ]

        emitted: list[TrackUpdate] = []
        for track in self.tracks:
            if track.hits < self.cfg.min_hits:
                continue
            if track.time_since_update == 0:
                emitted.append(
                    TrackUpdate(
                        frame_id,
                        track.track_id,
                        track.last_obs.bbox,
                        track.last_obs.z,
                        True,
                    )
                )
            else:
                emitted.append(
                    TrackUpdate(
                        frame_id,
                        track.track_id,
                        track.predicted_bbox,
                        track.predicted_z,
                        False,
                    )
                )
        return emitted

    def _associate(
        self, observations: list[Observation3D]
    ) -> tuple[list[tuple[int, int]], list[int]]:
        n_tracks = len(self.tracks)
        n_obs = len(observations)
        if n_tracks == 0 or n_obs == 0:
            return [], list(range(n_obs))
        scores = np.zeros((n_tracks, n_obs))
        for ti, track in enumerate(self.tracks):
            for oi, obs in enumerate(observations):
                overlap = iou(track.predicted_bbox, obs.bbox)
                if self.cfg.use_depth:
                    dz = dist_z(track.predicted_z, obs.z, self.cfg.dist_max)
                else:
                    dz = 0.0
                scores[ti, oi] = sim_score(overlap, dz, self.cfg.alpha)
        rows, cols = linear_sum_assignment(-scores)
        matched = []
        matched_obs = set()
        for ti, oi in zip(rows, cols):
            if scores[ti, oi] >= self.cfg.sim_threshold:
                matched.append((int(ti), int(oi)))
                matched_obs.add(int(oi))
        unmatched_obs = [i for i in range(n_obs) if i not in matched_obs]
        return matched, unmatched_obs


def write_tracks_jsonl(
    path: str | os.PathLike, updates: list[TrackUpdate]
) -> None:
    with open(path, "w", encoding="ascii") as f:
        for u in updates:
            f.write(
                json.dumps(
                    {
                        "frame_id": u.frame_id,
                        "track_id": u.track_id,
                        "bbox_px": list(u.bbox),
                        "z_m": u.z,
                        "matched": u.matched,
                    }
                )
            )
            f.write("\n")


def read_tracks_jsonl(path: str | os.PathLike) -> list[TrackUpdate]:
    updates = []
    with open(path, encoding="ascii") as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            doc = json.loads(line)
            updates.append(
                TrackUpdate(
                    frame_id=int(doc["frame_id"]),
                    track_id=int(doc["track_id"]),
                    bbox=tuple(float(v) for v in doc["bbox_px"]),
                    z=float(doc["z_m"]),
                    matched=bool(doc["matched"]),
                )
            )
    return updates
