"""Cluster-wise baselines: Euclidean cluster extraction and region growing.

Both grow one cluster to completion before starting the next, which is the
behavior FEC is benchmarked against. They share the kd-tree and label
conventions of the rest of the package, so timings compare like for like.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Optional

import numpy as np
from numba import njit

from .core import ClusterParams, ParameterError, PointCloud, compact_labels
from .fec import RunStats
from .spatial import _STACK_DEPTH, DEFAULT_LEAF_SIZE, KdTree3, _radius_query


@njit(cache=True, nogil=True)
def _size_filter(labels, n_clusters, min_size, max_size):
    sizes = np.zeros(n_clusters + 1, np.int64)
    for i in range(labels.shape[0]):
        sizes[labels[i]] += 1
    for i in range(labels.shape[0]):
        s = sizes[labels[i]]
        if s < min_size or s > max_size:
            labels[i] = 0


@njit(cache=True, nogil=True)
def _ec(ppts, perm, start, end, left, right, axis, split, pts, r2, cap):
    n = pts.shape[0]
    labels = np.zeros(n, np.int64)
    processed = np.zeros(n, np.bool_)
    queue = np.empty(n, np.int64)
    nbr = np.empty(n, np.int64)
    nbr_d2 = np.empty(n, np.float64)
    stack = np.empty(_STACK_DEPTH, np.int64)
    cluster = 0
    queries = 0
    for i in range(n):
        if processed[i]:
            continue
        cluster += 1
        processed[i] = True
        queue[0] = i
        q_len = 1
        head = 0
        while head < q_len:
            p = queue[head]
            head += 1
            labels[p] = cluster
            cnt = _radius_query(ppts, perm, start, end, left, right, axis, split,
                                pts[p, 0], pts[p, 1], pts[p, 2], r2, cap,
                                nbr, nbr_d2, stack, False)
            queries += 1
            for t in range(cnt):
                j = nbr[t]
                if not processed[j]:
                    processed[j] = True
                    queue[q_len] = j
                    q_len += 1
    return labels, cluster, queries


def ec_cluster(cloud: PointCloud, params: ClusterParams, leaf_size: int = DEFAULT_LEAF_SIZE):
    """Euclidean cluster extraction by breadth-first growth from the lowest unprocessed index.

    Clusters whose size falls outside ``[min_cluster_size, max_cluster_size]``
    are labeled 0. Returns ``(labels, stats)``.
    """
    if not isinstance(params, ClusterParams):
        raise ParameterError("params must be a ClusterParams")
    n = len(cloud)
    stats = RunStats()
    if n == 0:
        return np.zeros(0, np.int64), stats
    t0 = time.perf_counter()
    tree = KdTree3.build(cloud, leaf_size)
    labels, n_clusters, queries = _ec(*tree.kernel_args, cloud.xyz,
                                      float(params.d_th) ** 2, int(min(params.th_max, n)))
    _size_filter(labels, n_clusters, params.min_cluster_size, params.max_size_or_inf)
    stats.wall_time = time.perf_counter() - t0
    stats.neighbor_queries = int(queries)
    stats.peak_label = int(n_clusters)
    return compact_labels(labels), stats


# --------------------------------------------------------------------------
# surface estimation
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class SurfaceEstimate:
    """Per-point PCA surface estimate.

    Attributes
    ----------
    normals : ndarray, shape (N, 3)
        Unit normals, oriented into the +z half-space (+x, then +y, on ties).
    curvature : ndarray, shape (N,)
        Surface variation ``l0 / (l0 + l1 + l2)`` with ``l0`` the smallest
        covariance eigenvalue; lies in ``[0, 1/3]``.
    """

    normals: np.ndarray
    curvature: np.ndarray

    def __len__(self) -> int:
        return self.curvature.shape[0]


_ORIENT_EPS = 1e-12


@njit(cache=True, nogil=True)
def _pca_normals(pts, knn):
    n = pts.shape[0]
    k = knn.shape[1]
    normals = np.zeros((n, 3), np.float64)
    curv = np.zeros(n, np.float64)
    cov = np.zeros((3, 3), np.float64)
    for i in range(n):
        cx = 0.0
        cy = 0.0
        cz = 0.0
        for t in range(k):
            p = knn[i, t]
            cx += pts[p, 0]
            cy += pts[p, 1]
            cz += pts[p, 2]
        cx /= k
        cy /= k
        cz /= k
        cov[:, :] = 0.0
        for t in range(k):
            p = knn[i, t]
            d0 = pts[p, 0] - cx
            d1 = pts[p, 1] - cy
            d2 = pts[p, 2] - cz
            cov[0, 0] += d0 * d0
            cov[0, 1] += d0 * d1
            cov[0, 2] += d0 * d2
            cov[1, 1] += d1 * d1
            cov[1, 2] += d1 * d2
            cov[2, 2] += d2 * d2
        cov[1, 0] = cov[0, 1]
        cov[2, 0] = cov[0, 2]
        cov[2, 1] = cov[1, 2]
        trace = cov[0, 0] + cov[1, 1] + cov[2, 2]
        if trace <= 0.0:
            normals[i, 2] = 1.0
            continue
        w, v = np.linalg.eigh(cov)
        nx = v[0, 0]
        ny = v[1, 0]
        nz = v[2, 0]
        norm = math.sqrt(nx * nx + ny * ny + nz * nz)
        nx /= norm
        ny /= norm
        nz /= norm
        flip = False
        if abs(nz) > _ORIENT_EPS:
            flip = nz < 0.0
        elif abs(nx) > _ORIENT_EPS:
            flip = nx < 0.0
        else:
            flip = ny < 0.0
        if flip:
            nx = -nx
            ny = -ny
            nz = -nz
        normals[i, 0] = nx
        normals[i, 1] = ny
        normals[i, 2] = nz
        l0 = max(w[0], 0.0)
        total = max(w[0], 0.0) + max(w[1], 0.0) + max(w[2], 0.0)
        curv[i] = l0 / total if total > 0.0 else 0.0
    return normals, curv


def estimate_surface(cloud: PointCloud, tree: Optional[KdTree3], k: int) -> SurfaceEstimate:
    """PCA normal and curvature of every point over its ``k`` nearest neighbors (self included).

    A neighborhood of identical points gets normal +z and curvature 0.
    """
    n = len(cloud)
    if k < 1:
        raise ParameterError("k must be positive")
    if n < k:
        raise ParameterError(f"surface estimation needs at least k={k} points, cloud has {n}")
    if tree is None:
        tree = KdTree3.build(cloud)
    knn = tree.knn_all(k)
    normals, curv = _pca_normals(cloud.xyz, knn)
    return SurfaceEstimate(normals, curv)


# --------------------------------------------------------------------------
# region growing
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class RgParams:
    """Region-growing parameters.

    Defaults follow the usual library defaults for this method: 30 normal
    neighbors, a 3 degree smoothness angle and a curvature threshold of 1,
    which lets every point act as a seed.
    """

    d_th: float
    k_normals: int = 30
    angle_th: float = math.radians(3.0)
    curvature_th: float = 1.0
    min_cluster_size: int = 0
    max_cluster_size: Optional[int] = None

    def __post_init__(self):
        if not (math.isfinite(self.d_th) and self.d_th > 0):
            raise ParameterError(f"d_th must be a positive finite distance, got {self.d_th}")
        if self.k_normals < 3:
            raise ParameterError("k_normals must be at least 3")
        if not 0.0 < self.angle_th < math.pi:
            raise ParameterError("angle_th must lie in (0, pi) radians")
        if self.curvature_th < 0:
            raise ParameterError("curvature_th must be non-negative")
        if self.min_cluster_size < 0:
            raise ParameterError("min_cluster_size must be non-negative")
        if self.max_cluster_size is not None and self.min_cluster_size > self.max_cluster_size:
            raise ParameterError("min_cluster_size exceeds max_cluster_size")

    @property
    def max_size_or_inf(self) -> int:
        return np.iinfo(np.int64).max if self.max_cluster_size is None else int(self.max_cluster_size)


@njit(cache=True, nogil=True)
def _rg(ppts, perm, start, end, left, right, axis, split, pts, r2,
        order, normals, curv, cos_th, curv_th):
    n = pts.shape[0]
    labels = np.zeros(n, np.int64)
    seeds = np.empty(n, np.int64)
    nbr = np.empty(n, np.int64)
    nbr_d2 = np.empty(n, np.float64)
    stack = np.empty(_STACK_DEPTH, np.int64)
    region = 0
    queries = 0
    for o in range(n):
        s0 = order[o]
        if labels[s0] != 0:
            continue
        region += 1
        labels[s0] = region
        seeds[0] = s0
        n_seeds = 1
        head = 0
        while head < n_seeds:
            cur = seeds[head]
            head += 1
            cnt = _radius_query(ppts, perm, start, end, left, right, axis, split,
                                pts[cur, 0], pts[cur, 1], pts[cur, 2], r2, n,
                                nbr, nbr_d2, stack, False)
            queries += 1
            for t in range(cnt):
                j = nbr[t]
                if labels[j] != 0:
                    continue
                dot = (normals[cur, 0] * normals[j, 0] + normals[cur, 1] * normals[j, 1]
                       + normals[cur, 2] * normals[j, 2])
                if abs(dot) < cos_th:
                    continue
                labels[j] = region
                if curv[j] <= curv_th:
                    seeds[n_seeds] = j
                    n_seeds += 1
    return labels, region, queries


def rg_cluster(cloud: PointCloud, params: RgParams, leaf_size: int = DEFAULT_LEAF_SIZE,
               surface: Optional[SurfaceEstimate] = None):
    """Smoothness-constrained region growing.

    Seeds are taken in order of ascending curvature. A radius neighbor joins
    the region when its normal is within ``angle_th`` of the current point's
    normal (sign-insensitive); it becomes a further seed only if its
    curvature is at most ``curvature_th``. Returns ``(labels, stats)``;
    ``stats.wall_time`` includes normal estimation unless ``surface`` is given.
    """
    if not isinstance(params, RgParams):
        raise ParameterError("params must be an RgParams")
    n = len(cloud)
    stats = RunStats()
    if n == 0:
        return np.zeros(0, np.int64), stats
    if n < params.k_normals:
        raise ParameterError(f"region growing needs at least k_normals={params.k_normals} points")
    t0 = time.perf_counter()
    tree = KdTree3.build(cloud, leaf_size)
    if surface is None:
        surface = estimate_surface(cloud, tree, params.k_normals)
    order = np.argsort(surface.curvature, kind="stable")
    labels, n_regions, queries = _rg(*tree.kernel_args, cloud.xyz, float(params.d_th) ** 2,
                                     order, surface.normals, surface.curvature,
                                     math.cos(params.angle_th), float(params.curvature_th))
    _size_filter(labels, n_regions, params.min_cluster_size, params.max_size_or_inf)
    stats.wall_time = time.perf_counter() - t0
    stats.neighbor_queries = int(queries)
    stats.peak_label = int(n_regions)
    return compact_labels(labels), stats
