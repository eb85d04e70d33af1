"""Detection scoring: rectangle IoU, greedy matching, and the combined
weighted metric (the arithmetic mean of IoU, precision, and recall)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .detect import BoundingBox

__all__ = ["iou", "MatchResult", "match_and_score"]


def iou(a: BoundingBox, b: BoundingBox) -> float:
    """Intersection over union of two time/frequency rectangles, in [0, 1]."""
    t_lo = max(a.t_min_s, b.t_min_s)
    t_hi = min(a.t_max_s, b.t_max_s)
    f_lo = max(a.f_min_hz, b.f_min_hz)
    f_hi = min(a.f_max_hz, b.f_max_hz)
    inter = max(0.0, t_hi - t_lo) * max(0.0, f_hi - f_lo)
    union = a.area() + b.area() - inter
    return inter / union if union > 0 else 0.0


@dataclass(frozen=True)
class MatchResult:
    """Greedy one-to-one matching outcome.

    mean_iou averages the matched-pair IoUs over the number of ground
    truths, so missed truths count as zero localization quality. The
    zero-denominator conventions (no detections / no truths) yield 0 and
    are flagged.
    """

    precision: float
    recall: float
    mean_iou: float
    wem: float
    tp: int
    fp: int
    fn: int
    precision_degenerate: bool = False
    recall_degenerate: bool = False


def match_and_score(
    dets: list[BoundingBox],
    truths: list[BoundingBox],
    iou_thresh: float = 0.5,
) -> MatchResult:
    """Greedy descending-IoU one-to-one matching.

    Pairs with IoU >= iou_thresh are true positives; leftover detections
    are false positives and leftover truths false negatives. The result
    is invariant to the order of the inputs.
    """
    if not (0.0 < iou_thresh < 1.0):
        raise ValueError(f"iou_thresh must be in (0, 1), got {iou_thresh}")
    pairs = []
    for i, d in enumerate(dets):
        for j, t in enumerate(truths):
            v = iou(d, t)
            if v >= iou_thresh:
                # sort key breaks ties by box geometry, not input order
                pairs.append((-v, d.t_min_s, d.f_min_hz, t.t_min_s, t.f_min_hz, i, j))
    pairs.sort()
    used_d: set[int] = set()
    used_t: set[int] = set()
    matched_iou = []
    for neg_v, *_rest, i, j in pairs:
        if i in used_d or j in used_t:
            continue
        used_d.add(i)
        used_t.add(j)
        matched_iou.append(-neg_v)
    tp = len(matched_iou)
    fp = len(dets) - tp
    fn = len(truths) - tp

    precision_degenerate = (tp + fp) == 0
    recall_degenerate = (tp + fn) == 0
    precision = 0.0 if precision_degenerate else tp / (tp + fp)
    recall = 0.0 if recall_degenerate else tp / (tp + fn)
    mean_iou = float(np.sum(matched_iou) / len(truths)) if truths else 0.0
    wem = (mean_iou + precision + recall) / 3.0
    return MatchResult(
        precision=precision,
        recall=recall,
        mean_iou=mean_iou,
        wem=wem,
        tp=tp,
        fp=fp,
        fn=fn,
        precision_degenerate=precision_degenerate,
        recall_degenerate=recall_degenerate,
    )
