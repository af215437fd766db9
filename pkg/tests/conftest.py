import numpy as np
import pytest

from fecseg import PointCloud


def brute_radius(xyz, q, d_th, cap=None):
    """Indices within d_th of q, ordered by (distance, index), truncated to cap."""
    d = xyz - np.asarray(q, dtype=float)
    d2 = d[:, 0] * d[:, 0] + d[:, 1] * d[:, 1] + d[:, 2] * d[:, 2]
    hits = np.flatnonzero(d2 <= d_th * d_th)
    hits = hits[np.lexsort((hits, d2[hits]))]
    return hits if cap is None else hits[:cap]


def reference_fec(xyz, d_th, cap=None, skip_labeled=False):
    """Plain-Python FEC over brute-force neighbor lists.

    Returns (raw labels, neighbor queries, merge relabels, peak label).
    Shares no code with the package kernels.
    """
    n = len(xyz)
    labels = [0] * n
    seg_lab = 1
    queries = merges = 0
    for i in range(n):
        fresh = labels[i] == 0
        if skip_labeled and not fresh:
            continue
        nn = brute_radius(xyz, xyz[i], d_th, cap).tolist()
        queries += 1
        nonzero = [labels[j] for j in nn if labels[j] != 0]
        min_lab = min(nonzero + [seg_lab])
        if min_lab == seg_lab:
            fresh = True
        for j in nn:
            lab = labels[j]
            if lab > min_lab:
                merges += 1
                labels = [min_lab if x == lab else x for x in labels]
        for j in nn:
            if labels[j] == 0:
                labels[j] = min_lab
        if fresh:
            seg_lab += 1
    return np.array(labels), queries, merges, seg_lab - 1


def same_partition(a, b) -> bool:
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        return False
    pairs = set(zip(a.tolist(), b.tolist()))
    return len(pairs) == len(set(a.tolist())) == len(set(b.tolist()))


def random_cloud(rng, n=None, kind=None):
    """Mixed geometries: uniform box, gaussian blobs, or blobs with duplicates."""
    n = int(rng.integers(1, 400)) if n is None else n
    kind = kind or rng.choice(["uniform", "blobs", "duplicates"])
    if kind == "uniform":
        xyz = rng.uniform(0, rng.uniform(0.5, 5.0), size=(n, 3))
    else:
        k = int(rng.integers(1, 6))
        centers = rng.uniform(-5, 5, size=(k, 3))
        xyz = centers[rng.integers(0, k, n)] + rng.normal(0, rng.uniform(0.05, 0.6), size=(n, 3))
        if kind == "duplicates" and n > 1:
            dup = rng.integers(0, n, size=n // 3)
            xyz[rng.integers(0, n, size=n // 3)] = xyz[dup]
    return PointCloud(xyz)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
