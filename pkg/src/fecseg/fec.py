"""Fast Euclidean Clustering: a point-wise labeling pass with segment merging.

Points are visited in index order. Each visited point queries its radius
neighborhood, takes the smallest label present there (or a fresh one when
the neighborhood is unlabeled), gives that label to every unlabeled
neighbor (itself included) and folds every larger neighboring segment into
it. ``seg_lab`` advances once per visit that started from an unlabeled
point, so label values have gaps until they are compacted.

Two merge implementations produce identical labels:

``"indexed"`` (default)
    Segments keep member lists; a merge relabels only the smaller side and
    records the surviving label value, i.e. a weighted union.
``"sweep"``
    The literal reading: every merge rescans all N labels.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
from numba import njit

from .core import ClusterParams, ParameterError, PointCloud, compact_labels
from .spatial import _STACK_DEPTH, DEFAULT_LEAF_SIZE, KdTree3, _radius_query

METHODS = ("indexed", "sweep")


@dataclass
class RunStats:
    neighbor_queries: int = 0
    merge_relabels: int = 0
    wall_time: float = 0.0
    peak_label: int = 0

    def as_dict(self) -> dict:
        return {
            "wall_time": self.wall_time,
            "neighbor_queries": self.neighbor_queries,
            "merge_relabels": self.merge_relabels,
            "peak_label": self.peak_label,
        }


@njit(cache=True, nogil=True)
def _fec_indexed(ppts, perm, start, end, left, right, axis, split, pts, r2, cap, skip_labeled):
    n = pts.shape[0]
    seg = np.zeros(n, np.int64)          # segment id per point, 0 = unlabeled
    value = np.zeros(n + 2, np.int64)    # current label value of each segment id
    head = np.full(n + 2, -1, np.int64)
    tail = np.full(n + 2, -1, np.int64)
    size = np.zeros(n + 2, np.int64)
    nxt = np.full(n, -1, np.int64)

    nbr = np.empty(n, np.int64)
    nbr_d2 = np.empty(n, np.float64)
    stack = np.empty(_STACK_DEPTH, np.int64)

    seg_lab = 1
    queries = 0
    merges = 0
    for i in range(n):
        fresh = seg[i] == 0
        if skip_labeled and not fresh:
            continue
        cnt = _radius_query(ppts, perm, start, end, left, right, axis, split,
                            pts[i, 0], pts[i, 1], pts[i, 2], r2, cap,
                            nbr, nbr_d2, stack, False)
        queries += 1

        min_lab = seg_lab
        target = 0
        for t in range(cnt):
            s = seg[nbr[t]]
            if s != 0 and value[s] < min_lab:
                min_lab = value[s]
                target = s
        if target == 0:
            # fresh segment; its id doubles as its label value
            target = seg_lab
            value[target] = seg_lab
            fresh = True

        for t in range(cnt):
            s = seg[nbr[t]]
            if s == 0 or s == target:
                continue
            # s carries a label > min_lab: fold it into the target segment
            merges += 1
            if size[s] > size[target]:
                big = s
                small = target
            else:
                big = target
                small = s
            p = head[small]
            while p != -1:
                seg[p] = big
                p = nxt[p]
            if head[small] != -1:
                if head[big] == -1:
                    head[big] = head[small]
                else:
                    nxt[tail[big]] = head[small]
                tail[big] = tail[small]
            size[big] += size[small]
            head[small] = -1
            tail[small] = -1
            size[small] = 0
            value[big] = min_lab
            target = big

        for t in range(cnt):
            j = nbr[t]
            if seg[j] == 0:
                seg[j] = target
                if head[target] == -1:
                    head[target] = j
                else:
                    nxt[tail[target]] = j
                tail[target] = j
                size[target] += 1
        if fresh:
            seg_lab += 1

    labels = np.empty(n, np.int64)
    for i in range(n):
        labels[i] = value[seg[i]]
    return labels, queries, merges, seg_lab - 1


@njit(cache=True, nogil=True)
def _fec_sweep(ppts, perm, start, end, left, right, axis, split, pts, r2, cap, skip_labeled):
    n = pts.shape[0]
    labels = np.zeros(n, np.int64)
    nbr = np.empty(n, np.int64)
    nbr_d2 = np.empty(n, np.float64)
    stack = np.empty(_STACK_DEPTH, np.int64)

    seg_lab = 1
    queries = 0
    merges = 0
    for i in range(n):
        fresh = labels[i] == 0
        if skip_labeled and not fresh:
            continue
        cnt = _radius_query(ppts, perm, start, end, left, right, axis, split,
                            pts[i, 0], pts[i, 1], pts[i, 2], r2, cap,
                            nbr, nbr_d2, stack, False)
        queries += 1
        min_lab = seg_lab
        for t in range(cnt):
            lab = labels[nbr[t]]
            if lab != 0 and lab < min_lab:
                min_lab = lab
        if min_lab == seg_lab:
            fresh = True
        for t in range(cnt):
            lab = labels[nbr[t]]
            if lab > min_lab:
                merges += 1
                for k in range(n):
                    if labels[k] == lab:
                        labels[k] = min_lab
        for t in range(cnt):
            if labels[nbr[t]] == 0:
                labels[nbr[t]] = min_lab
        if fresh:
            seg_lab += 1
    return labels, queries, merges, seg_lab - 1


def fec_cluster(cloud: PointCloud, params: ClusterParams, method: str = "indexed",
                skip_labeled: bool = False, leaf_size: int = DEFAULT_LEAF_SIZE,
                raw: bool = False):
    """Cluster ``cloud`` with FEC.

    By default every point is visited and queried, which makes the result
    the exact ``d_th`` connectivity partition (for ``th_max >= N``).
    ``skip_labeled=True`` only queries points that are still unlabeled when
    visited: far fewer queries, but an edge between two points that were
    both labeled from other points' neighborhoods is never examined, so
    clusters can come out split.

    Returns ``(labels, stats)``. Labels are compacted to ``1..K`` unless
    ``raw`` is set, in which case the uncompacted segment labels are
    returned (useful for checking the two merge paths against each other).
    ``stats.wall_time`` covers tree construction and the labeling loop.

    Note that ``params.th_max < len(cloud)`` can split a connected cluster:
    a capped query may not see the neighbor that bridges two segments.
    """
    if not isinstance(params, ClusterParams):
        raise ParameterError("params must be a ClusterParams")
    if method not in METHODS:
        raise ParameterError(f"unknown FEC method {method!r}; expected one of {METHODS}")
    n = len(cloud)
    stats = RunStats()
    if n == 0:
        return np.zeros(0, np.int64), stats

    kernel = _fec_indexed if method == "indexed" else _fec_sweep
    t0 = time.perf_counter()
    tree = KdTree3.build(cloud, leaf_size)
    labels, queries, merges, peak = kernel(*tree.kernel_args, cloud.xyz,
                                           float(params.d_th) ** 2, int(min(params.th_max, n)),
                                           bool(skip_labeled))
    stats.wall_time = time.perf_counter() - t0
    stats.neighbor_queries = int(queries)
    stats.merge_relabels = int(merges)
    stats.peak_label = int(peak)
    if raw:
        return labels, stats
    return compact_labels(labels), stats


# --------------------------------------------------------------------------
# brute-force reference partition
# --------------------------------------------------------------------------


def _find_many(parent: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Roots of ``x``, compressing every visited path onto its root."""
    roots = parent[x]
    while True:
        up = parent[roots]
        if np.array_equal(up, roots):
            break
        roots = up
    parent[x] = roots
    return roots


def oracle_cluster(cloud: PointCloud, d_th: float, block: int = 512) -> np.ndarray:
    """Exact connected components of the ``<= d_th`` graph by all-pairs scan.

    O(N^2) distance evaluations plus a union-find over every qualifying
    pair; meant as ground truth for a few thousand points at most.
    """
    if not d_th > 0:
        raise ParameterError("d_th must be positive")
    xyz = cloud.xyz
    n = xyz.shape[0]
    parent = np.arange(n, dtype=np.int64)
    r2 = float(d_th) * float(d_th)
    for lo in range(0, n, block):
        a = xyz[lo:lo + block]
        dx = a[:, None, 0] - xyz[None, :, 0]
        dy = a[:, None, 1] - xyz[None, :, 1]
        dz = a[:, None, 2] - xyz[None, :, 2]
        close = dx * dx + dy * dy + dz * dz <= r2
        rows, cols = np.nonzero(close)
        rows += lo
        keep = rows < cols
        rows, cols = rows[keep], cols[keep]
        # repeat until every pair shares a root; each round links roots to smaller roots
        while rows.size:
            ra = _find_many(parent, rows)
            rb = _find_many(parent, cols)
            diff = ra != rb
            if not diff.any():
                break
            ra, rb = ra[diff], rb[diff]
            hi = np.maximum(ra, rb)
            lo_root = np.minimum(ra, rb)
            # conflicting writes to the same root resolve on the next round
            parent[hi] = lo_root
            rows, cols = rows[diff], cols[diff]
    roots = _find_many(parent, np.arange(n, dtype=np.int64))
    return compact_labels(roots + 1)
