"""Static 3-D kd-tree with exact capped radius and k-nearest queries.

The tree is a flat node array over a permutation of point indices, plus a
copy of the coordinates stored in that permuted order for cache locality. Split
axes cycle x -> y -> z by depth and each node splits at its median point,
so construction is O(N log N). Queries return indices into the original
cloud order.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np
from numba import njit

from .core import ParameterError, Point3, PointCloud

DEFAULT_LEAF_SIZE = 16
_STACK_DEPTH = 256


class NeighborSet(NamedTuple):
    """Query result, sorted by ascending distance then ascending index."""

    indices: np.ndarray
    distances: np.ndarray


# --------------------------------------------------------------------------
# numba kernels
# --------------------------------------------------------------------------


@njit(cache=True, nogil=True)
def _select(perm, ppts, lo, hi, kth, axis):
    # Hoare quickselect on rows lo:hi of (perm, ppts); afterwards row kth holds
    # the median key, rows before it are <= and rows after it are >=.
    hi -= 1
    while hi > lo:
        mid = (lo + hi) // 2
        a = ppts[lo, axis]
        b = ppts[mid, axis]
        c = ppts[hi, axis]
        if a < b:
            if b < c:
                pivot = b
            elif a < c:
                pivot = c
            else:
                pivot = a
        else:
            if a < c:
                pivot = a
            elif b < c:
                pivot = c
            else:
                pivot = b
        i = lo
        j = hi
        while i <= j:
            while ppts[i, axis] < pivot:
                i += 1
            while ppts[j, axis] > pivot:
                j -= 1
            if i <= j:
                t = perm[i]
                perm[i] = perm[j]
                perm[j] = t
                for d in range(3):
                    v = ppts[i, d]
                    ppts[i, d] = ppts[j, d]
                    ppts[j, d] = v
                i += 1
                j -= 1
        if kth <= j:
            hi = j
        elif kth >= i:
            lo = i
        else:
            return


@njit(cache=True, nogil=True)
def _build(pts, leaf_size):
    n = pts.shape[0]
    perm = np.arange(n).astype(np.int64)
    ppts = pts.copy()
    max_nodes = 4 * (n // leaf_size) + 4 if leaf_size > 1 else 2 * n + 4
    start = np.empty(max_nodes, np.int64)
    end = np.empty(max_nodes, np.int64)
    left = np.full(max_nodes, -1, np.int64)
    right = np.full(max_nodes, -1, np.int64)
    axis = np.zeros(max_nodes, np.int64)
    split = np.zeros(max_nodes, np.float64)

    n_nodes = 1
    start[0] = 0
    end[0] = n
    stack_node = np.empty(_STACK_DEPTH, np.int64)
    stack_depth = np.empty(_STACK_DEPTH, np.int64)
    stack_node[0] = 0
    stack_depth[0] = 0
    sp = 1
    while sp > 0:
        sp -= 1
        node = stack_node[sp]
        depth = stack_depth[sp]
        lo = start[node]
        hi = end[node]
        if hi - lo <= leaf_size:
            continue
        ax = depth % 3
        mid = (lo + hi) // 2
        _select(perm, ppts, lo, hi, mid, ax)
        axis[node] = ax
        split[node] = ppts[mid, ax]
        l = n_nodes
        r = n_nodes + 1
        n_nodes += 2
        start[l] = lo
        end[l] = mid
        start[r] = mid
        end[r] = hi
        left[node] = l
        right[node] = r
        stack_node[sp] = r
        stack_depth[sp] = depth + 1
        sp += 1
        stack_node[sp] = l
        stack_depth[sp] = depth + 1
        sp += 1
    return perm, ppts, start[:n_nodes].copy(), end[:n_nodes].copy(), left[:n_nodes].copy(), \
        right[:n_nodes].copy(), axis[:n_nodes].copy(), split[:n_nodes].copy()


@njit(cache=True, nogil=True)
def _radius_collect(ppts, perm, start, end, left, right, axis, split,
                    qx, qy, qz, r2, out_idx, out_d2, stack):
    count = 0
    if start.shape[0] == 0 or end[0] == 0:
        return 0
    stack[0] = 0
    sp = 1
    while sp > 0:
        sp -= 1
        node = stack[sp]
        if left[node] < 0:
            for t in range(start[node], end[node]):
                p = perm[t]
                dx = ppts[t, 0] - qx
                dy = ppts[t, 1] - qy
                dz = ppts[t, 2] - qz
                d2 = dx * dx + dy * dy + dz * dz
                if d2 <= r2:
                    out_idx[count] = p
                    out_d2[count] = d2
                    count += 1
        else:
            ax = axis[node]
            if ax == 0:
                diff = qx - split[node]
            elif ax == 1:
                diff = qy - split[node]
            else:
                diff = qz - split[node]
            if diff <= 0.0:
                near = left[node]
                far = right[node]
            else:
                near = right[node]
                far = left[node]
            if diff * diff <= r2:
                stack[sp] = far
                sp += 1
            stack[sp] = near
            sp += 1
    return count


@njit(cache=True, nogil=True)
def _sort_neighbors(out_idx, out_d2, count):
    # order by (d2, index); mergesort is stable so pre-sorting by index breaks ties
    idx = out_idx[:count]
    d2 = out_d2[:count]
    o1 = np.argsort(idx)
    idx1 = idx[o1]
    d21 = d2[o1]
    o2 = np.argsort(d21, kind="mergesort")
    for t in range(count):
        out_idx[t] = idx1[o2[t]]
        out_d2[t] = d21[o2[t]]


@njit(cache=True, nogil=True)
def _radius_query(ppts, perm, start, end, left, right, axis, split,
                  qx, qy, qz, r2, cap, out_idx, out_d2, stack, always_sort):
    """Fill out_idx/out_d2 and return the result count (<= cap).

    With ``always_sort`` false the sort is skipped whenever the cap does not
    truncate, which is all the clusterers need.
    """
    count = _radius_collect(ppts, perm, start, end, left, right, axis, split,
                            qx, qy, qz, r2, out_idx, out_d2, stack)
    if count > cap:
        _sort_neighbors(out_idx, out_d2, count)
        return cap
    if always_sort and count > 1:
        _sort_neighbors(out_idx, out_d2, count)
    return count


@njit(cache=True, nogil=True)
def _knn_query(ppts, perm, start, end, left, right, axis, split,
               qx, qy, qz, k, best_idx, best_d2, stack):
    count = 0
    stack[0] = 0
    sp = 1
    while sp > 0:
        sp -= 1
        node = stack[sp]
        if left[node] < 0:
            for t in range(start[node], end[node]):
                p = perm[t]
                dx = ppts[t, 0] - qx
                dy = ppts[t, 1] - qy
                dz = ppts[t, 2] - qz
                d2 = dx * dx + dy * dy + dz * dz
                if count == k:
                    wd = best_d2[k - 1]
                    if d2 > wd or (d2 == wd and p > best_idx[k - 1]):
                        continue
                    pos = k - 1
                else:
                    pos = count
                    count += 1
                # insertion keeps (d2, index) ascending
                while pos > 0 and (best_d2[pos - 1] > d2 or (best_d2[pos - 1] == d2 and best_idx[pos - 1] > p)):
                    best_d2[pos] = best_d2[pos - 1]
                    best_idx[pos] = best_idx[pos - 1]
                    pos -= 1
                best_d2[pos] = d2
                best_idx[pos] = p
        else:
            ax = axis[node]
            if ax == 0:
                diff = qx - split[node]
            elif ax == 1:
                diff = qy - split[node]
            else:
                diff = qz - split[node]
            if diff <= 0.0:
                near = left[node]
                far = right[node]
            else:
                near = right[node]
                far = left[node]
            if count < k or diff * diff <= best_d2[k - 1]:
                stack[sp] = far
                sp += 1
            stack[sp] = near
            sp += 1
    return count


@njit(cache=True, nogil=True)
def _knn_all(pts, ppts, perm, start, end, left, right, axis, split, k):
    n = pts.shape[0]
    out = np.empty((n, k), np.int64)
    best_idx = np.empty(k, np.int64)
    best_d2 = np.empty(k, np.float64)
    stack = np.empty(_STACK_DEPTH, np.int64)
    for i in range(n):
        _knn_query(ppts, perm, start, end, left, right, axis, split,
                   pts[i, 0], pts[i, 1], pts[i, 2], k, best_idx, best_d2, stack)
        out[i, :] = best_idx
    return out


# --------------------------------------------------------------------------
# Python surface
# --------------------------------------------------------------------------


class KdTree3:
    """Immutable kd-tree over a :class:`PointCloud`.

    Build with :meth:`build`. Queries allocate their own result storage and
    never mutate the tree, so one tree may be shared across threads.
    """

    def __init__(self, cloud: PointCloud, leaf_size: int, arrays):
        self.cloud = cloud
        self.leaf_size = leaf_size
        (self.perm, self.tree_xyz, self.node_start, self.node_end, self.node_left,
         self.node_right, self.node_axis, self.node_split) = arrays
        for a in arrays:
            a.flags.writeable = False

    @classmethod
    def build(cls, cloud: PointCloud, leaf_size: int = DEFAULT_LEAF_SIZE) -> "KdTree3":
        if int(leaf_size) != leaf_size or leaf_size < 1:
            raise ParameterError(f"leaf_size must be a positive integer, got {leaf_size}")
        arrays = _build(cloud.xyz, int(leaf_size))
        return cls(cloud, int(leaf_size), arrays)

    def __len__(self) -> int:
        return len(self.cloud)

    @property
    def n_nodes(self) -> int:
        return self.node_start.shape[0]

    @property
    def kernel_args(self):
        """Positional arrays expected by the numba query kernels."""
        return (self.tree_xyz, self.perm, self.node_start, self.node_end,
                self.node_left, self.node_right, self.node_axis, self.node_split)

    def radius_query(self, query, d_th: float, cap: int | None = None) -> NeighborSet:
        """Points within ``d_th`` (inclusive) of ``query``, nearest ``cap`` kept.

        ``query`` may be a :class:`Point3` or any length-3 sequence.
        """
        if not d_th > 0:
            raise ParameterError("d_th must be positive")
        n = len(self)
        if cap is None:
            cap = max(n, 1)
        if cap < 1:
            raise ParameterError("cap must be at least 1")
        q = _as_xyz(query)
        out_idx = np.empty(n, np.int64)
        out_d2 = np.empty(n, np.float64)
        stack = np.empty(_STACK_DEPTH, np.int64)
        count = _radius_query(*self.kernel_args, q[0], q[1], q[2], float(d_th) ** 2,
                              int(cap), out_idx, out_d2, stack, True)
        return NeighborSet(out_idx[:count].copy(), np.sqrt(out_d2[:count]))

    def knn_query(self, query, k: int) -> NeighborSet:
        """Exact ``k`` nearest points (fewer if the cloud is smaller)."""
        if k < 1:
            raise ParameterError("k must be at least 1")
        k = min(int(k), len(self))
        if k == 0:
            return NeighborSet(np.empty(0, np.int64), np.empty(0))
        q = _as_xyz(query)
        best_idx = np.empty(k, np.int64)
        best_d2 = np.empty(k, np.float64)
        stack = np.empty(_STACK_DEPTH, np.int64)
        _knn_query(*self.kernel_args, q[0], q[1], q[2], k, best_idx, best_d2, stack)
        return NeighborSet(best_idx, np.sqrt(best_d2))

    def knn_all(self, k: int) -> np.ndarray:
        """(N, k) array: the k nearest neighbors of every cloud point, self included."""
        if k < 1 or k > len(self):
            raise ParameterError(f"k must be in [1, {len(self)}], got {k}")
        return _knn_all(self.cloud.xyz, *self.kernel_args, int(k))


def _as_xyz(query) -> np.ndarray:
    if isinstance(query, Point3):
        return query.as_array()
    q = np.asarray(query, dtype=np.float64).reshape(-1)
    if q.shape[0] != 3:
        raise ParameterError("query must have three coordinates")
    return q


def build(cloud: PointCloud, leaf_size: int = DEFAULT_LEAF_SIZE) -> KdTree3:
    return KdTree3.build(cloud, leaf_size)


def radius_query(tree: KdTree3, query, d_th: float, cap: int | None = None) -> NeighborSet:
    return tree.radius_query(query, d_th, cap)
