"""Binary IoU and per-class aggregate IoU."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from lexseg.errors import DataLeakError, LexsegWarning, ShapeError


def _pair(pred, gt):
    pred, gt = np.asarray(pred).astype(bool), np.asarray(gt).astype(bool)
    if pred.shape != gt.shape:
        raise ShapeError(f"mask sizes differ: {pred.shape} vs {gt.shape}")
    return pred, gt


def confusion(pred, gt, ignore=None) -> tuple[int, int, int]:
    """(TP, FP, FN), skipping pixels where ``ignore`` is set."""
    pred, gt = _pair(pred, gt)
    if ignore is not None:
        keep = ~np.asarray(ignore).astype(bool)
        pred, gt = pred[keep], gt[keep]
    tp = int(np.count_nonzero(pred & gt))
    return tp, int(np.count_nonzero(pred & ~gt)), int(np.count_nonzero(~pred & gt))


def iou_from_counts(tp: int, fp: int, fn: int) -> float:
    denom = tp + fp + fn
    return 1.0 if denom == 0 else tp / denom


def binary_iou(pred, gt, ignore=None) -> float:
    """|pred & gt| / |pred | gt|, and 1.0 when both are empty."""
    return iou_from_counts(*confusion(pred, gt, ignore))


@dataclass
class ClassCounts:
    tp: int = 0
    fp: int = 0
    fn: int = 0
    images: int = 0

    def add(self, tp, fp, fn):
        self.tp += tp
        self.fp += fp
        self.fn += fn
        self.images += 1

    @property
    def iou(self) -> float:
        return iou_from_counts(self.tp, self.fp, self.fn)


@dataclass
class PartitionScores:
    index: int
    class_iou: dict = field(default_factory=dict)
    counts: dict = field(default_factory=dict)

    @property
    def miou(self) -> float:
        if not self.class_iou:
            return float("nan")
        return float(np.mean(list(self.class_iou.values())))


def per_class_miou(results, partition) -> PartitionScores:
    """Aggregate TP/FP/FN per class over all its images, then average classes.

    ``results`` yields ``(label, pred, gt)`` or ``(label, pred, gt, ignore)``.
    Test classes with no image are left out with a warning.
    """
    allowed = set(partition.test_labels)
    counts = {c: ClassCounts() for c in partition.test_labels}
    for item in results:
        label, pred, gt = item[:3]
        ignore = item[3] if len(item) > 3 else None
        if label not in allowed:
            raise DataLeakError(f"{label!r} is not a test label of partition {partition.index}")
        counts[label].add(*confusion(pred, gt, ignore))
    scores = PartitionScores(partition.index)
    for c in partition.test_labels:
        if counts[c].images == 0:
            warnings.warn(f"partition {partition.index}: no test images for {c!r}; excluded", LexsegWarning, stacklevel=2)
            continue
        scores.class_iou[c] = counts[c].iou
        scores.counts[c] = counts[c]
    return scores
