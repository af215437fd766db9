"""Fast Euclidean Clustering for unorganized point clouds.

The package provides the point-wise FEC clusterer, two cluster-wise
baselines (Euclidean cluster extraction and region growing), a brute-force
connectivity oracle, a synthetic benchmark generator, AP scoring, file
codecs and the ``fecseg`` command line.
"""

from .baselines import RgParams, SurfaceEstimate, ec_cluster, estimate_surface, rg_cluster
from .core import (ClusterParams, FecError, IngestionError, ParameterError, Point3, PointCloud,
                   compact_labels, is_neighbor)
from .fec import RunStats, fec_cluster, oracle_cluster
from .metrics import MatchReport, average_precision, rand_index
from .preprocess import GroundModel, remove_ground
from .spatial import KdTree3, NeighborSet
from .synthgen import ConfigError, LabeledCloud, SynthConfig, generate

__all__ = [
    "ClusterParams", "ConfigError", "FecError", "GroundModel", "IngestionError", "KdTree3",
    "LabeledCloud", "MatchReport", "NeighborSet", "ParameterError", "Point3", "PointCloud",
    "RgParams", "RunStats", "SurfaceEstimate", "SynthConfig", "average_precision",
    "compact_labels", "ec_cluster", "estimate_surface", "fec_cluster", "generate",
    "is_neighbor", "oracle_cluster", "rand_index", "remove_ground", "rg_cluster",
]

__version__ = "0.1.0"
