"""Synthetic benchmark clouds: ``n`` voxel clusters of ``m`` points each.

Selected voxels sit on a lattice with stride ``2 * voxel_edge``, so any two
clusters are separated by at least one voxel edge of empty space. Inside a
voxel the points fill an even ``g x g x g`` grid (truncated to ``m`` sites),
optionally jittered, or they are drawn around a number of Gaussian
sub-cluster centers. The global point order is shuffled.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import ParameterError, PointCloud


class ConfigError(ParameterError):
    """A synthetic configuration whose ground truth could not be guaranteed."""


@dataclass(frozen=True)
class SynthConfig:
    n_clusters: int
    density: int
    voxel_edge: float = 1.0
    shift_sigma: float = 0.0
    sub_clusters: int = 1
    rng_seed: int = 0

    def __post_init__(self):
        if self.n_clusters < 1:
            raise ConfigError("n_clusters must be at least 1")
        if self.density < 1:
            raise ConfigError("density must be at least 1")
        if not self.voxel_edge > 0:
            raise ConfigError("voxel_edge must be positive")
        if self.shift_sigma < 0:
            raise ConfigError("shift_sigma must be non-negative")
        if self.sub_clusters < 1:
            raise ConfigError("sub_clusters must be at least 1")
        if self.recommended_d_th >= self.voxel_edge:
            raise ConfigError(
                f"density {self.density} gives grid pitch {self.pitch:g}, so the recommended "
                f"d_th {self.recommended_d_th:g} would bridge neighboring voxels "
                f"(voxel_edge {self.voxel_edge:g}); raise the density or pick d_th manually"
            )

    @property
    def grid_side(self) -> int:
        return icbrt_ceil(self.density)

    @property
    def pitch(self) -> float:
        g = self.grid_side
        return self.voxel_edge if g == 1 else self.voxel_edge / (g - 1)

    @property
    def recommended_d_th(self) -> float:
        if self.grid_side == 1:
            # one point per voxel: any radius below the voxel gap isolates the clusters
            return 0.5 * self.voxel_edge
        return 1.1 * self.pitch


@dataclass(frozen=True)
class LabeledCloud:
    cloud: PointCloud
    gt: np.ndarray
    recommended_d_th: float


def icbrt_ceil(m: int) -> int:
    """Smallest integer g with g**3 >= m."""
    g = max(1, int(round(m ** (1.0 / 3.0))))
    while g ** 3 < m:
        g += 1
    while g > 1 and (g - 1) ** 3 >= m:
        g -= 1
    return g


def _grid_sites(g: int, m: int) -> np.ndarray:
    axis = np.arange(g)
    ii, jj, kk = np.meshgrid(axis, axis, axis, indexing="ij")
    sites = np.stack([ii.ravel(), jj.ravel(), kk.ravel()], axis=1)
    return sites[:m].astype(np.float64)


def generate(cfg: SynthConfig) -> LabeledCloud:
    rng = np.random.default_rng(cfg.rng_seed)
    n, m, edge = cfg.n_clusters, cfg.density, cfg.voxel_edge

    side = icbrt_ceil(2 * n)
    cells = rng.choice(side ** 3, size=n, replace=False)
    lattice = np.stack(np.unravel_index(cells, (side, side, side)), axis=1).astype(np.float64)
    origins = lattice * (2.0 * edge)

    g = cfg.grid_side
    if cfg.sub_clusters == 1:
        if g == 1:
            local = np.full((1, 3), 0.5 * edge)
        else:
            local = _grid_sites(g, m) * cfg.pitch
        pts = origins[:, None, :] + local[None, :, :]
        if cfg.shift_sigma > 0:
            pts = pts + rng.normal(0.0, cfg.shift_sigma, size=pts.shape)
    else:
        centers = rng.uniform(0.0, edge, size=(n, cfg.sub_clusters, 3))
        which = np.arange(m) % cfg.sub_clusters
        local = centers[:, which, :]
        if cfg.shift_sigma > 0:
            local = local + rng.normal(0.0, cfg.shift_sigma, size=local.shape)
        pts = origins[:, None, :] + local
    # keep every point inside its own voxel
    pts = np.clip(pts, origins[:, None, :], origins[:, None, :] + edge)

    xyz = pts.reshape(-1, 3)
    gt = np.repeat(np.arange(1, n + 1, dtype=np.int64), m)
    order = rng.permutation(xyz.shape[0])
    return LabeledCloud(PointCloud(xyz[order]), gt[order], cfg.recommended_d_th)
