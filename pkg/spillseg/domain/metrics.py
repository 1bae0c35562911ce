"""Pixel confusion counts, threshold metrics and ROC analysis."""

from __future__ import annotations

from dataclasses import asdict, dataclass, replace
from typing import Optional

import numpy as np
from scipy.stats import rankdata

from spillseg.core.errors import DataError, ShapeError

METRIC_FIELDS = ("accuracy", "precision", "recall", "f1", "iou", "roc_auc")


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int = 0
    tn: int = 0
    fp: int = 0
    fn: int = 0

    def __post_init__(self):
        for name in ("tp", "tn", "fp", "fn"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn

    @property
    def false_positive_rate(self) -> float:
        negatives = self.fp + self.tn
        return self.fp / negatives if negatives else 0.0

    def __add__(self, other: "ConfusionCounts") -> "ConfusionCounts":
        return ConfusionCounts(
            self.tp + other.tp,
            self.tn + other.tn,
            self.fp + other.fp,
            self.fn + other.fn,
        )


@dataclass(frozen=True)
class MetricsReport:
    accuracy: float
    precision: float
    recall: float
    f1: float
    iou: float
    roc_auc: Optional[float] = None
    # names of metrics whose denominator was zero (reported as 0)
    undefined: tuple[str, ...] = ()

    @property
    def flagged(self) -> bool:
        return bool(self.undefined)

    def with_auc(self, auc: Optional[float]) -> "MetricsReport":
        return replace(self, roc_auc=auc)

    def as_row(self) -> dict:
        data = asdict(self)
        return {name: data[name] for name in METRIC_FIELDS}


@dataclass(frozen=True)
class RocCurve:
    """ROC points sorted by descending threshold, starting at (0, 0)."""

    thresholds: np.ndarray
    fpr: np.ndarray
    tpr: np.ndarray

    @property
    def points(self) -> list[tuple[float, float, float]]:
        return [
            (float(t), float(f), float(r))
            for t, f, r in zip(self.thresholds, self.fpr, self.tpr)
        ]

    def __len__(self) -> int:
        return len(self.thresholds)


def _as_binary(x, label: str) -> np.ndarray:
    arr = np.asarray(x)
    if arr.dtype == bool:
        return arr
    if not np.all((arr == 0) | (arr == 1)):
        raise DataError(f"{label} must be binary (values 0 or 1)")
    return arr.astype(bool)


def confusion(pred_mask, gt_mask) -> ConfusionCounts:
    pred = np.asarray(pred_mask)
    gt = np.asarray(gt_mask)
    if pred.shape != gt.shape:
        raise ShapeError(f"prediction shape {pred.shape} does not match mask shape {gt.shape}")
    p = _as_binary(pred, "prediction mask")
    g = _as_binary(gt, "ground-truth mask")
    return ConfusionCounts(
        tp=int(np.count_nonzero(p & g)),
        tn=int(np.count_nonzero(~p & ~g)),
        fp=int(np.count_nonzero(p & ~g)),
        fn=int(np.count_nonzero(~p & g)),
    )


def metrics(counts: ConfusionCounts) -> MetricsReport:
    if counts.total == 0:
        raise DataError("cannot compute metrics from all-zero confusion counts")

    undefined: list[str] = []

    def ratio(num: int, den: int, name: str) -> float:
        if den == 0:
            undefined.append(name)
            return 0.0
        return num / den

    tp, tn, fp, fn = counts.tp, counts.tn, counts.fp, counts.fn
    return MetricsReport(
        accuracy=(tp + tn) / counts.total,
        precision=ratio(tp, tp + fp, "precision"),
        recall=ratio(tp, tp + fn, "recall"),
        f1=ratio(2 * tp, 2 * tp + fp + fn, "f1"),
        iou=ratio(tp, tp + fp + fn, "iou"),
        undefined=tuple(undefined),
    )


def _scores_and_labels(scores, labels) -> tuple[np.ndarray, np.ndarray]:
    s = np.asarray(scores, dtype=np.float64).ravel()
    y = _as_binary(np.asarray(labels).ravel(), "labels")
    if s.size != y.size:
        raise ShapeError(f"{s.size} scores but {y.size} labels")
    n_pos = int(np.count_nonzero(y))
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        only = "negative" if n_pos == 0 else "positive"
        raise DataError(f"ROC-AUC needs both classes; all {y.size} labels are {only}")
    return s, y


def roc_curve(scores, labels) -> RocCurve:
    s, y = _scores_and_labels(scores, labels)
    order = np.argsort(-s, kind="mergesort")
    s_sorted = s[order]
    y_sorted = y[order]
    tps = np.cumsum(y_sorted)
    fps = np.cumsum(~y_sorted)
    # last position of each distinct score
    last = np.r_[np.nonzero(np.diff(s_sorted))[0], s.size - 1]
    return RocCurve(
        thresholds=np.r_[np.inf, s_sorted[last]],
        fpr=np.r_[0.0, fps[last] / fps[-1]],
        tpr=np.r_[0.0, tps[last] / tps[-1]],
    )


def trapezoid_auc(curve: RocCurve) -> float:
    dx = np.diff(curve.fpr)
    return float(np.sum(dx * (curve.tpr[1:] + curve.tpr[:-1]) / 2.0))


def rank_auc(scores, labels) -> float:
    """Mann-Whitney form: (sum of positive midranks - n+(n+ + 1)/2) / (n+ n-)."""
    s, y = _scores_and_labels(scores, labels)
    ranks = rankdata(s, method="average")
    n_pos = int(np.count_nonzero(y))
    n_neg = y.size - n_pos
    return float((ranks[y].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def roc_auc(scores, labels) -> tuple[RocCurve, float]:
    curve = roc_curve(scores, labels)
    return curve, trapezoid_auc(curve)
