import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fecseg import ClusterParams, ParameterError, PointCloud, fec_cluster, oracle_cluster, rand_index

from conftest import random_cloud, reference_fec, same_partition


def cluster(xyz, d_th, **kw):
    cloud = PointCloud(xyz)
    return fec_cluster(cloud, ClusterParams(d_th, th_max=max(len(cloud), 1)), **kw)


def test_connected_pair():
    labels, _ = cluster([[0, 0, 0], [0.5, 0, 0]], 1.0)
    assert labels.tolist() == [1, 1]


def test_far_singletons():
    labels, _ = cluster([[0, 0, 0], [10, 0, 0]], 1.0)
    assert labels.tolist() == [1, 2]


@pytest.mark.parametrize("method", ["indexed", "sweep"])
def test_bridge_point_last_merges_segments(method):
    xyz = [[0, 0, 0], [1.8, 0, 0], [0.9, 0, 0]]
    labels, stats = cluster(xyz, 1.0, method=method)
    assert labels.tolist() == [1, 1, 1]
    assert same_partition(labels, oracle_cluster(PointCloud(xyz), 1.0))


@pytest.mark.parametrize("method", ["indexed", "sweep"])
def test_segment_merge_fires(method):
    # points 0 and 1 open separate segments; revisiting 2 sees both labels
    xyz = [[0, 0, 0], [2.7, 0, 0], [0.9, 0, 0], [1.8, 0, 0]]
    labels, stats = cluster(xyz, 1.0, method=method)
    assert labels.tolist() == [1, 1, 1, 1]
    assert stats.merge_relabels == 1
    # skipping labeled points never revisits 2, so the chain stays split
    literal, _ = cluster(xyz, 1.0, method=method, skip_labeled=True)
    assert literal.tolist() == [1, 2, 1, 2]


def test_two_shuffled_blobs_match_oracle(rng):
    a = rng.normal(0, 0.3, size=(250, 3))
    b = rng.normal(0, 0.3, size=(250, 3)) + [20, 0, 0]
    xyz = np.vstack([a, b])[rng.permutation(500)]
    labels, _ = cluster(xyz, 2.0)
    oracle = oracle_cluster(PointCloud(xyz), 2.0)
    assert oracle.max() == 2
    assert same_partition(labels, oracle)


def test_empty_cloud():
    labels, stats = fec_cluster(PointCloud(np.zeros((0, 3))), ClusterParams(1.0))
    assert labels.size == 0 and stats.neighbor_queries == 0


def test_invalid_params():
    cloud = PointCloud([[0, 0, 0]])
    with pytest.raises(ParameterError):
        fec_cluster(cloud, ClusterParams(1.0), method="bogus")
    with pytest.raises(ParameterError):
        fec_cluster(cloud, {"d_th": 1.0})


def test_oracle_examples():
    assert oracle_cluster(PointCloud([[1, 2, 3]]), 0.1).tolist() == [1]
    chain = PointCloud([[0, 0, 0], [0.9, 0, 0], [1.8, 0, 0]])
    assert oracle_cluster(chain, 1.0).tolist() == [1, 1, 1]


def test_oracle_against_quadratic_flood_fill(rng):
    # independent check of the union-find oracle itself
    for _ in range(20):
        cloud = random_cloud(rng, n=int(rng.integers(1, 150)))
        d_th = rng.uniform(0.05, 1.0)
        xyz = cloud.xyz
        adj = ((xyz[:, None] - xyz[None]) ** 2).sum(-1) <= d_th * d_th
        comp = -np.ones(len(xyz), int)
        c = 0
        for s in range(len(xyz)):
            if comp[s] >= 0:
                continue
            stack = [s]
            comp[s] = c
            while stack:
                p = stack.pop()
                for q in np.flatnonzero(adj[p] & (comp < 0)):
                    comp[q] = c
                    stack.append(q)
            c += 1
        assert same_partition(oracle_cluster(cloud, d_th), comp)


def test_oracle_equivalence_1000_points(rng):
    cloud = random_cloud(rng, n=1000, kind="blobs")
    d_th = rng.uniform(0.1, 0.5)
    labels, _ = fec_cluster(cloud, ClusterParams(d_th, th_max=1000))
    assert rand_index(labels, oracle_cluster(cloud, d_th)) == 1.0


@pytest.mark.parametrize("skip_labeled", [False, True])
@pytest.mark.parametrize("capped", [False, True])
def test_kernels_match_reference(skip_labeled, capped):
    rng = np.random.default_rng(7 + skip_labeled + 2 * capped)
    for _ in range(25):
        cloud = random_cloud(rng, n=int(rng.integers(1, 120)))
        d_th = rng.uniform(0.05, 1.2)
        cap = int(rng.integers(1, 8)) if capped else len(cloud)
        ref, q, m, peak = reference_fec(cloud.xyz, d_th, cap, skip_labeled)
        for method in ("indexed", "sweep"):
            raw, stats = fec_cluster(cloud, ClusterParams(d_th, th_max=cap), method=method,
                                     skip_labeled=skip_labeled, raw=True)
            assert raw.tolist() == ref.tolist()
            assert (stats.neighbor_queries, stats.merge_relabels, stats.peak_label) == (q, m, peak)


def test_skip_labeled_counts_unlabeled_visits(rng):
    cloud = random_cloud(rng, n=300, kind="uniform")
    d_th = 0.4
    raw, stats = fec_cluster(cloud, ClusterParams(d_th, th_max=300), skip_labeled=True, raw=True)
    _, q, _, _ = reference_fec(cloud.xyz, d_th, None, True)
    assert stats.neighbor_queries == q < 300
    assert stats.peak_label == q


def test_skip_labeled_can_split_clusters():
    # 0 labels 1 and 2; 3 labels 4 and 5; edge 1-4 is never examined
    xyz = np.array([[0, 0, 0], [0.9, 0, 0], [-0.9, 0, 0], [2.6, 0, 0], [1.7, 0, 0], [3.5, 0, 0]])
    cloud = PointCloud(xyz)
    params = ClusterParams(1.0, th_max=6)
    literal, _ = fec_cluster(cloud, params, skip_labeled=True)
    exact, _ = fec_cluster(cloud, params)
    assert oracle_cluster(cloud, 1.0).max() == 1
    assert exact.max() == 1
    assert literal.max() == 2


def _check_fec_output(cloud, d_th):
    labels, _ = fec_cluster(cloud, ClusterParams(d_th, th_max=len(cloud)))
    assert (labels > 0).all()
    assert set(labels.tolist()) == set(range(1, labels.max() + 1))
    assert rand_index(labels, oracle_cluster(cloud, d_th)) == 1.0
    return labels


@settings(max_examples=60, deadline=None)
@given(st.integers(min_value=0, max_value=2**31 - 1))
def test_oracle_equivalence_property(seed):
    rng = np.random.default_rng(seed)
    cloud = random_cloud(rng)
    _check_fec_output(cloud, float(rng.uniform(0.02, 1.0)))


@settings(max_examples=30, deadline=None)
@given(st.integers(min_value=0, max_value=2**31 - 1))
def test_permutation_invariance_of_partition(seed):
    rng = np.random.default_rng(seed)
    cloud = random_cloud(rng)
    d_th = float(rng.uniform(0.05, 1.0))
    base, _ = fec_cluster(cloud, ClusterParams(d_th, th_max=len(cloud)))
    order = rng.permutation(len(cloud))
    shuffled, _ = fec_cluster(cloud.permuted(order), ClusterParams(d_th, th_max=len(cloud)))
    restored = np.empty_like(shuffled)
    restored[order] = shuffled
    assert same_partition(base, restored)


def test_deterministic(rng):
    cloud = random_cloud(rng, n=800)
    p = ClusterParams(0.3, th_max=20)
    a, sa = fec_cluster(cloud, p)
    b, sb = fec_cluster(cloud, p)
    assert a.tobytes() == b.tobytes()
    assert (sa.neighbor_queries, sa.merge_relabels) == (sb.neighbor_queries, sb.merge_relabels)


def test_indexed_and_sweep_identical_on_larger_cloud(rng):
    cloud = random_cloud(rng, n=3000, kind="uniform")
    p = ClusterParams(0.2, th_max=3000)
    a, sa = fec_cluster(cloud, p, raw=True)
    b, sb = fec_cluster(cloud, p, method="sweep", raw=True)
    assert a.tobytes() == b.tobytes()
    assert sa.merge_relabels == sb.merge_relabels
