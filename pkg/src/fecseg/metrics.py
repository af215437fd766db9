"""Instance-segmentation scoring: thresholded AP and the Rand index."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Tuple

import numpy as np

from .core import ParameterError

OVERLAP_MODES = ("iou", "precision")


@dataclass
class MatchReport:
    tp: int
    fp: int
    ap: float
    matched_pairs: List[Tuple[int, int, float]] = field(default_factory=list)

    def as_dict(self) -> dict:
        return {"tp": self.tp, "fp": self.fp, "ap": self.ap}


def _check_lengths(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise ParameterError(f"label maps differ in length: {a.shape[0]} vs {b.shape[0]}")


def average_precision(pred, gt, threshold: float = 0.75, overlap: str = "iou") -> MatchReport:
    """AP = TP / (TP + FP) under greedy one-to-one matching.

    Predicted clusters are processed largest first (ties: smaller label
    first). Each takes the still-unmatched ground-truth cluster with the
    highest overlap and counts as a true positive when that overlap reaches
    ``threshold``; a matched ground-truth cluster cannot validate a second
    prediction. Points whose ground-truth label is 0 are ignored entirely,
    as are predicted label-0 points.

    ``overlap`` is ``"iou"`` (``|P & G| / |P | G|``) or ``"precision"``
    (``|P & G| / |P|``).
    """
    pred = np.asarray(pred, dtype=np.int64).reshape(-1)
    gt = np.asarray(gt, dtype=np.int64).reshape(-1)
    _check_lengths(pred, gt)
    if not 0.0 < threshold <= 1.0:
        raise ParameterError("threshold must lie in (0, 1]")
    if overlap not in OVERLAP_MODES:
        raise ParameterError(f"overlap must be one of {OVERLAP_MODES}")

    keep = (gt != 0) & (pred != 0)
    gt_labels, gt_sizes = np.unique(gt[gt != 0], return_counts=True)
    p = pred[keep]
    g = gt[keep]
    pred_labels, pred_sizes = np.unique(p, return_counts=True)

    if pred_labels.size == 0:
        ap = 1.0 if gt_labels.size == 0 else 0.0
        return MatchReport(0, 0, ap)

    # sparse contingency: intersection count for each (pred, gt) pair present
    pi = np.searchsorted(pred_labels, p)
    gi = np.searchsorted(gt_labels, g)
    pairs, inter = np.unique(np.stack([pi, gi], axis=1), axis=0, return_counts=True)
    by_pred: dict = {}
    for (a, b), c in zip(pairs.tolist(), inter.tolist()):
        by_pred.setdefault(a, []).append((b, c))

    order = np.lexsort((pred_labels, -pred_sizes))
    matched_gt = np.zeros(gt_labels.size, dtype=bool)
    tp = fp = 0
    matched_pairs = []
    for a in order.tolist():
        best, best_b = 0.0, -1
        for b, c in by_pred.get(a, ()):
            if matched_gt[b]:
                continue
            if overlap == "iou":
                score = c / (pred_sizes[a] + gt_sizes[b] - c)
            else:
                score = c / pred_sizes[a]
            # candidates arrive in ascending gt order, so ties keep the smaller label
            if score > best:
                best, best_b = score, b
        if best_b >= 0 and best >= threshold:
            tp += 1
            matched_gt[best_b] = True
            matched_pairs.append((int(pred_labels[a]), int(gt_labels[best_b]), float(best)))
        else:
            fp += 1
    return MatchReport(tp, fp, tp / (tp + fp), matched_pairs)


def rand_index(a, b) -> float:
    """Fraction of point pairs on which two partitions agree.

    Computed from the contingency table in O(N log N) with exact integer
    pair counts, so identical partitions give exactly 1.0.
    """
    a = np.asarray(a, dtype=np.int64).reshape(-1)
    b = np.asarray(b, dtype=np.int64).reshape(-1)
    _check_lengths(a, b)
    n = a.shape[0]
    if n < 2:
        return 1.0

    def pairs(counts):
        counts = counts.astype(object)
        return int(sum(c * (c - 1) // 2 for c in counts))

    _, ca = np.unique(a, return_counts=True)
    _, cb = np.unique(b, return_counts=True)
    _, cab = np.unique(np.stack([a, b], axis=1), axis=0, return_counts=True)
    total = n * (n - 1) // 2
    same_both = pairs(cab)
    agree = total + 2 * same_both - pairs(ca) - pairs(cb)
    return agree / total
