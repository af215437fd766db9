"""Domain types shared by every clusterer.

Labels are plain ``int64`` numpy arrays: ``0`` means unlabeled (or filtered
out), ``1..K`` are cluster ids.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Iterator, Optional, Sequence

import numpy as np


class FecError(Exception):
    """Base class for all errors raised by this package."""


class ParameterError(FecError, ValueError):
    """Invalid clustering, generator or metric parameters."""


class IngestionError(FecError, ValueError):
    """Non-finite or otherwise unusable point data."""

    def __init__(self, message: str, record: Optional[int] = None):
        super().__init__(message)
        self.record = record


@dataclass(frozen=True)
class Point3:
    x: float
    y: float
    z: float
    intensity: Optional[float] = None

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y) and math.isfinite(self.z)):
            raise IngestionError(f"non-finite coordinate in {self!r}")

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z], dtype=np.float64)


class PointCloud:
    """Ordered, immutable point collection.

    Index order is preserved exactly as given; FEC results depend on it.

    Parameters
    ----------
    xyz : array_like, shape (N, 3)
        Coordinates in meters. Must be finite.
    intensity : array_like, shape (N,), optional
        Per-point intensity, carried along but never used for clustering.
    """

    __slots__ = ("_xyz", "_intensity")

    def __init__(self, xyz, intensity=None):
        xyz = np.array(xyz, dtype=np.float64, copy=True)
        if xyz.size == 0:
            xyz = xyz.reshape(0, 3)
        if xyz.ndim != 2 or xyz.shape[1] != 3:
            raise IngestionError(f"expected an (N, 3) coordinate array, got shape {xyz.shape}")
        bad = ~np.isfinite(xyz).all(axis=1)
        if bad.any():
            first = int(np.flatnonzero(bad)[0])
            raise IngestionError(f"non-finite coordinate at record {first}", record=first)
        xyz = np.ascontiguousarray(xyz)
        xyz.flags.writeable = False
        self._xyz = xyz

        if intensity is not None:
            intensity = np.array(intensity, dtype=np.float64, copy=True).reshape(-1)
            if intensity.shape[0] != xyz.shape[0]:
                raise IngestionError("intensity length does not match point count")
            intensity.flags.writeable = False
        self._intensity = intensity

    @classmethod
    def from_points(cls, points: Iterable[Point3]) -> "PointCloud":
        points = list(points)
        xyz = [(p.x, p.y, p.z) for p in points]
        if points and all(p.intensity is not None for p in points):
            return cls(xyz, [p.intensity for p in points])
        return cls(xyz)

    @property
    def xyz(self) -> np.ndarray:
        """Read-only (N, 3) float64 view of the coordinates."""
        return self._xyz

    @property
    def intensity(self) -> Optional[np.ndarray]:
        return self._intensity

    def __len__(self) -> int:
        return self._xyz.shape[0]

    def __getitem__(self, i: int) -> Point3:
        x, y, z = self._xyz[i]
        inten = None if self._intensity is None else float(self._intensity[i])
        return Point3(float(x), float(y), float(z), inten)

    def __iter__(self) -> Iterator[Point3]:
        for i in range(len(self)):
            yield self[i]

    def subset(self, indices) -> "PointCloud":
        """Cloud restricted to ``indices``, in the order given."""
        indices = np.asarray(indices, dtype=np.int64)
        inten = None if self._intensity is None else self._intensity[indices]
        return PointCloud(self._xyz[indices], inten)

    def permuted(self, order) -> "PointCloud":
        return self.subset(order)

    def __repr__(self) -> str:
        return f"PointCloud(n={len(self)})"


@dataclass(frozen=True)
class ClusterParams:
    """Parameters shared by FEC and Euclidean cluster extraction.

    ``th_max`` caps the neighbors returned per radius query. Only
    ``th_max >= len(cloud)`` guarantees the exact connectivity partition;
    a smaller cap may hide bridging points.
    """

    d_th: float
    th_max: int = 50
    min_cluster_size: int = 0
    max_cluster_size: Optional[int] = None

    def __post_init__(self):
        if not (math.isfinite(self.d_th) and self.d_th > 0):
            raise ParameterError(f"d_th must be a positive finite distance, got {self.d_th}")
        if int(self.th_max) != self.th_max or self.th_max < 1:
            raise ParameterError(f"th_max must be a positive integer, got {self.th_max}")
        if self.min_cluster_size < 0:
            raise ParameterError("min_cluster_size must be non-negative")
        if self.max_cluster_size is not None:
            if self.max_cluster_size < 1:
                raise ParameterError("max_cluster_size must be positive")
            if self.min_cluster_size > self.max_cluster_size:
                raise ParameterError("min_cluster_size exceeds max_cluster_size")

    @property
    def max_size_or_inf(self) -> int:
        return np.iinfo(np.int64).max if self.max_cluster_size is None else int(self.max_cluster_size)


def is_neighbor(a: Point3, b: Point3, d_th: float) -> bool:
    """True iff ``a`` and ``b`` are within ``d_th`` (inclusive) in L2."""
    dx = a.x - b.x
    dy = a.y - b.y
    dz = a.z - b.z
    return dx * dx + dy * dy + dz * dz <= d_th * d_th


def compact_labels(labels: Sequence[int]) -> np.ndarray:
    """Renumber nonzero labels to ``1..K`` by first occurrence; zeros stay zero.

    >>> compact_labels([3, 3, 7, 7, 3]).tolist()
    [1, 1, 2, 2, 1]
    """
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    out = np.zeros_like(labels)
    nz = labels != 0
    if not nz.any():
        return out
    uniq, first, inverse = np.unique(labels[nz], return_index=True, return_inverse=True)
    # rank of each distinct label by where it first appears
    rank = np.empty(len(uniq), dtype=np.int64)
    rank[np.argsort(first, kind="stable")] = np.arange(1, len(uniq) + 1)
    out[nz] = rank[inverse]
    return out
