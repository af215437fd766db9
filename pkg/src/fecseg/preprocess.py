"""Ground removal by a tilt-constrained RANSAC plane fit."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

from .core import ParameterError, PointCloud

MIN_INLIER_FRACTION = 0.10


@dataclass(frozen=True)
class GroundModel:
    """Fitted ground plane ``normal . p + offset = 0``.

    ``normal`` is None when no acceptable plane was found; ``inlier_indices``
    is then empty.
    """

    normal: Optional[np.ndarray]
    offset: float
    inlier_threshold: float
    inlier_indices: np.ndarray = field(default_factory=lambda: np.zeros(0, np.int64))

    @property
    def found(self) -> bool:
        return self.normal is not None


def _upward(normal: np.ndarray) -> np.ndarray:
    return -normal if normal[2] < 0 else normal


def _refine(xyz: np.ndarray) -> Tuple[np.ndarray, float]:
    centroid = xyz.mean(axis=0)
    _, vecs = np.linalg.eigh(np.cov((xyz - centroid).T, bias=True))
    normal = _upward(vecs[:, 0] / np.linalg.norm(vecs[:, 0]))
    return normal, -float(normal @ centroid)


def remove_ground(cloud: PointCloud, inlier_threshold: float = 0.2, max_iterations: int = 100,
                  max_tilt: float = math.radians(30.0), rng_seed: int = 0):
    """Fit the dominant near-horizontal plane and drop its inliers.

    Returns ``(survivors, model)``. Survivors keep their original relative
    order. If no plane within ``max_tilt`` of vertical collects at least
    10% of the points, the cloud comes back unchanged with an empty model.
    """
    if not inlier_threshold > 0:
        raise ParameterError("inlier_threshold must be positive")
    if max_iterations < 1:
        raise ParameterError("max_iterations must be positive")
    empty = GroundModel(None, 0.0, float(inlier_threshold))
    n = len(cloud)
    if n < 3:
        return cloud, empty

    xyz = cloud.xyz
    rng = np.random.default_rng(rng_seed)
    min_cos = math.cos(max_tilt)
    best_count = 0
    best_plane = None
    for _ in range(max_iterations):
        a, b, c = xyz[rng.choice(n, size=3, replace=False)]
        normal = np.cross(b - a, c - a)
        norm = np.linalg.norm(normal)
        if norm < 1e-12:
            continue
        normal = _upward(normal / norm)
        if normal[2] < min_cos:
            continue
        offset = -float(normal @ a)
        count = int(np.count_nonzero(np.abs(xyz @ normal + offset) <= inlier_threshold))
        if count > best_count:
            best_count = count
            best_plane = (normal, offset)

    if best_plane is None or best_count < MIN_INLIER_FRACTION * n:
        return cloud, empty

    normal, offset = best_plane
    inliers = np.abs(xyz @ normal + offset) <= inlier_threshold
    if inliers.sum() >= 3:
        r_normal, r_offset = _refine(xyz[inliers])
        r_inliers = np.abs(xyz @ r_normal + r_offset) <= inlier_threshold
        # keep the least-squares plane only if it still satisfies the constraints
        if r_normal[2] >= min_cos and r_inliers.sum() >= inliers.sum():
            normal, offset, inliers = r_normal, r_offset, r_inliers

    inlier_idx = np.flatnonzero(inliers)
    survivors = cloud.subset(np.flatnonzero(~inliers))
    return survivors, GroundModel(normal, offset, float(inlier_threshold), inlier_idx)
