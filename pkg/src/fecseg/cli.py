"""``fecseg`` command line: cluster, bench, eval, ground-remove, gen."""

from __future__ import annotations

import argparse
import csv
import itertools
import json
import math
import statistics
import sys
import time
from dataclasses import astuple, dataclass, fields
from typing import List, Optional

import numpy as np

from . import io
from .baselines import RgParams, ec_cluster, rg_cluster
from .core import ClusterParams, FecError, compact_labels
from .fec import RunStats, fec_cluster
from .metrics import OVERLAP_MODES, average_precision
from .preprocess import remove_ground
from .synthgen import SynthConfig, generate

ALGORITHMS = ("fec", "ec", "rg")


@dataclass
class BenchRow:
    algorithm: str
    n_clusters: int
    density: int
    sub_clusters: int
    point_count: int
    wall_time_seconds: float
    neighbor_queries: int
    merge_relabels: int
    ap_vs_gt: float
    rng_seed: int


BENCH_HEADER = [f.name for f in fields(BenchRow)]
TIMING_COLUMNS = ("wall_time_seconds",)


def _peak_rss_mb() -> Optional[float]:
    try:
        import resource
    except ImportError:
        return None
    kb = resource.getrusage(resource.RUSAGE_SELF).ru_maxrss
    # ru_maxrss is bytes on macOS, kilobytes elsewhere
    return kb / (1024 * 1024) if sys.platform == "darwin" else kb / 1024


def _stats_line(pairs: dict) -> str:
    def fmt(v):
        if v is None:
            return ""
        if isinstance(v, float):
            return f"{v:.6g}"
        return str(v)
    return " ".join(f"{k}={fmt(v)}" for k, v in pairs.items())


def run_algorithm(name: str, cloud, d_th: float, th_max: int, min_size: int = 0,
                  max_size: Optional[int] = None, k_normals: int = 30,
                  angle_th_deg: float = 3.0, curvature_th: float = 1.0):
    if name == "fec":
        return fec_cluster(cloud, ClusterParams(d_th, th_max, min_size, max_size))
    if name == "ec":
        return ec_cluster(cloud, ClusterParams(d_th, th_max, min_size, max_size))
    if name == "rg":
        params = RgParams(d_th, k_normals, math.radians(angle_th_deg), curvature_th, min_size, max_size)
        return rg_cluster(cloud, params)
    raise FecError(f"unknown algorithm {name!r}")


def _apply_size_filter(labels: np.ndarray, min_size: int, max_size: Optional[int]) -> np.ndarray:
    if min_size <= 0 and max_size is None:
        return labels
    _, inverse, counts = np.unique(labels, return_inverse=True, return_counts=True)
    sizes = counts[inverse]
    bad = sizes < min_size
    if max_size is not None:
        bad |= sizes > max_size
    out = labels.copy()
    out[bad] = 0
    return compact_labels(out)


def _warm_up(algorithms) -> None:
    # load or compile the numba kernels so timed runs measure clustering only
    warm = generate(SynthConfig(2, 27, rng_seed=0))
    for a in algorithms:
        run_algorithm(a, warm.cloud, warm.recommended_d_th, len(warm.cloud), k_normals=10)


# --------------------------------------------------------------------------
# subcommands
# --------------------------------------------------------------------------


def cmd_cluster(args) -> int:
    cloud = io.read_cloud(args.input, args.format)
    n_in = len(cloud)
    keep = np.arange(n_in)
    ground_time = None
    removed = 0
    if args.remove_ground:
        t0 = time.perf_counter()
        survivors, model = remove_ground(cloud, args.ground_threshold, args.ground_iterations,
                                         math.radians(args.max_tilt_deg), args.seed)
        ground_time = time.perf_counter() - t0
        if model.found:
            keep = np.setdiff1d(np.arange(n_in), model.inlier_indices)
            removed = int(model.inlier_indices.size)
        cloud = survivors

    th_max = args.max_nn if args.max_nn is not None else max(len(cloud), 1)
    if len(cloud):
        _warm_up([args.algorithm])
        sub_labels, stats = run_algorithm(args.algorithm, cloud, args.d_th, th_max,
                                          args.min_cluster_size, args.max_cluster_size,
                                          args.k_normals, args.angle_th_deg, args.curvature_th)
    else:
        sub_labels, stats = np.zeros(0, np.int64), RunStats()
    if args.algorithm == "fec":
        # FEC itself has no size limits; apply them after labeling
        sub_labels = _apply_size_filter(sub_labels, args.min_cluster_size, args.max_cluster_size)

    labels = np.zeros(n_in, np.int64)
    labels[keep] = sub_labels
    io.write_labels(labels, args.output)
    if args.colored_ply:
        io.write_colored_ply(io.read_cloud(args.input, args.format), labels, args.colored_ply)

    print(_stats_line({
        "algorithm": args.algorithm,
        "points": n_in,
        "ground_removed": removed,
        "clusters": int(labels.max()) if labels.size else 0,
        "wall_time": stats.wall_time,
        "neighbor_queries": stats.neighbor_queries,
        "merge_relabels": stats.merge_relabels,
        "peak_label": stats.peak_label,
        "ground_time": ground_time,
        "peak_rss_mb": _peak_rss_mb(),
    }))
    return 0


def _parse_int_list(text: str) -> List[int]:
    return [int(t) for t in text.replace(" ", "").split(",") if t]


def bench_rows(n_list, m_list, sub_list, algorithms, repetitions, seed, d_th=None,
               th_max=None, shift_sigma=0.0, rg_angle_deg=90.0, k_normals=30, log=None):
    """Run the synthetic sweep; yields one BenchRow per algorithm x config x repetition.

    Configurations are enumerated in (n, m, sub_clusters) order and the
    k-th configuration is generated with seed ``seed + k``.
    """
    for k, (n, m, s) in enumerate(itertools.product(n_list, m_list, sub_list)):
        cfg_seed = seed + k
        try:
            cfg = SynthConfig(n, m, shift_sigma=shift_sigma, sub_clusters=s, rng_seed=cfg_seed)
            if d_th is not None and d_th >= cfg.voxel_edge:
                raise FecError(f"d_th {d_th} would bridge neighboring voxels")
        except FecError as exc:
            if log:
                log(f"skipping n={n} m={m} sub_clusters={s}: {exc}")
            yield None
            continue
        data = generate(cfg)
        radius = data.recommended_d_th if d_th is None else d_th
        cap = th_max if th_max is not None else len(data.cloud)
        for algo in algorithms:
            for _ in range(repetitions):
                labels, stats = run_algorithm(algo, data.cloud, radius, cap, k_normals=k_normals,
                                              angle_th_deg=rg_angle_deg)
                ap = average_precision(labels, data.gt, 0.75).ap
                yield BenchRow(algo, n, m, s, len(data.cloud), stats.wall_time,
                               stats.neighbor_queries, stats.merge_relabels, ap, cfg_seed)


def cmd_bench(args) -> int:
    algorithms = [a.strip() for a in args.algorithms.split(",") if a.strip()]
    for a in algorithms:
        if a not in ALGORITHMS:
            raise FecError(f"unknown algorithm {a!r}")
    _warm_up(algorithms)

    rows, attempted, failed = [], 0, 0
    for row in bench_rows(_parse_int_list(args.n_clusters), _parse_int_list(args.density),
                          _parse_int_list(args.sub_clusters), algorithms, args.repetitions,
                          args.seed, args.d_th, args.max_nn, args.shift_sigma,
                          args.angle_th_deg, args.k_normals,
                          log=lambda msg: print(msg, file=sys.stderr)):
        attempted += 1
        if row is None:
            failed += 1
            continue
        rows.append(row)

    with open(args.output, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(BENCH_HEADER)
        for r in rows:
            writer.writerow([f"{v:.9g}" if isinstance(v, float) else v for v in astuple(r)])

    groups = {}
    for r in rows:
        groups.setdefault((r.algorithm, r.n_clusters, r.density, r.sub_clusters), []).append(r)
    for (algo, n, m, s), rs in groups.items():
        print(_stats_line({
            "algorithm": algo, "n_clusters": n, "density": m, "sub_clusters": s,
            "points": rs[0].point_count,
            "median_wall_time": statistics.median(r.wall_time_seconds for r in rs),
            "ap_vs_gt": rs[0].ap_vs_gt,
        }))
    if attempted and failed == attempted:
        print("error: every configuration was invalid", file=sys.stderr)
        return 2
    return 0


def cmd_eval(args) -> int:
    pred = io.read_labels(args.pred)
    gt = io.read_labels(args.gt)
    report = average_precision(pred, gt, args.threshold, args.overlap)
    print(json.dumps(report.as_dict()))
    return 0


def cmd_ground_remove(args) -> int:
    cloud = io.read_cloud(args.input, args.format)
    survivors, model = remove_ground(cloud, args.threshold, args.max_iterations,
                                     math.radians(args.max_tilt_deg), args.seed)
    io.write_cloud(survivors, args.output)
    if model.found:
        nx, ny, nz = (float(v) for v in model.normal)
        print(_stats_line({"normal": f"{nx:.6f},{ny:.6f},{nz:.6f}", "offset": float(model.offset),
                           "inliers": int(model.inlier_indices.size), "survivors": len(survivors)}))
    else:
        print(_stats_line({"inliers": 0, "survivors": len(survivors), "note": "no_ground_found"}))
        print("no ground found", file=sys.stderr)
    return 0


def cmd_gen(args) -> int:
    cfg = SynthConfig(args.n_clusters, args.density, args.voxel_edge, args.shift_sigma,
                      args.sub_clusters, args.seed)
    data = generate(cfg)
    io.write_cloud(data.cloud, args.output, args.format)
    if args.gt_output:
        io.write_labels(data.gt, args.gt_output)
    print(_stats_line({"points": len(data.cloud), "clusters": cfg.n_clusters,
                       "recommended_d_th": data.recommended_d_th}))
    return 0


# --------------------------------------------------------------------------
# parser
# --------------------------------------------------------------------------


def _add_format(p):
    p.add_argument("--format", choices=[f.value for f in io.CloudFormat], default=None,
                   help="cloud format (default: from the file extension)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fecseg", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("cluster", help="segment a point cloud file")
    p.add_argument("input")
    _add_format(p)
    p.add_argument("--algorithm", choices=ALGORITHMS, default="fec")
    p.add_argument("--d-th", type=float, required=True, help="neighbor radius (m)")
    p.add_argument("--max-nn", type=int, default=50,
                   help="neighbors kept per radius query (default 50)")
    p.add_argument("--min-cluster-size", type=int, default=0)
    p.add_argument("--max-cluster-size", type=int, default=None)
    p.add_argument("--k-normals", type=int, default=30)
    p.add_argument("--angle-th-deg", type=float, default=3.0)
    p.add_argument("--curvature-th", type=float, default=1.0)
    p.add_argument("--output", required=True, help="labels CSV path")
    p.add_argument("--colored-ply", default=None)
    p.add_argument("--remove-ground", action="store_true")
    p.add_argument("--ground-threshold", type=float, default=0.2)
    p.add_argument("--ground-iterations", type=int, default=100)
    p.add_argument("--max-tilt-deg", type=float, default=30.0)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser("bench", help="synthetic runtime/precision sweep")
    p.add_argument("--n-clusters", default="100")
    p.add_argument("--density", default="200")
    p.add_argument("--sub-clusters", default="1")
    p.add_argument("--algorithms", default="fec,ec,rg")
    p.add_argument("--repetitions", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--d-th", type=float, default=None,
                   help="fixed radius for every config (default: each config's recommended radius)")
    p.add_argument("--max-nn", type=int, default=None, help="query cap (default: uncapped)")
    p.add_argument("--shift-sigma", type=float, default=0.0)
    p.add_argument("--angle-th-deg", type=float, default=90.0,
                   help="RG smoothness angle; voxel blobs have no surface, so the default is permissive")
    p.add_argument("--k-normals", type=int, default=30)
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("eval", help="score predicted labels against ground truth")
    p.add_argument("--pred", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--threshold", type=float, default=0.75)
    p.add_argument("--overlap", choices=OVERLAP_MODES, default="iou")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("ground-remove", help="drop the dominant ground plane")
    p.add_argument("input")
    _add_format(p)
    p.add_argument("--threshold", type=float, default=0.2)
    p.add_argument("--max-iterations", type=int, default=100)
    p.add_argument("--max-tilt-deg", type=float, default=30.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_ground_remove)

    p = sub.add_parser("gen", help="write a synthetic labeled cloud")
    p.add_argument("--n-clusters", type=int, required=True)
    p.add_argument("--density", type=int, required=True)
    p.add_argument("--voxel-edge", type=float, default=1.0)
    p.add_argument("--shift-sigma", type=float, default=0.0)
    p.add_argument("--sub-clusters", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    _add_format(p)
    p.add_argument("--output", required=True)
    p.add_argument("--gt-output", default=None)
    p.set_defaults(func=cmd_gen)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (FecError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
