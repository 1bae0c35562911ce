"""Evaluation of probability maps, models and the threshold baseline."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from spillseg.core.errors import DataError, ShapeError
from spillseg.core.tensor import ParamStore
from spillseg.domain.baseline import darkness_scores, threshold_baseline
from spillseg.domain.metrics import (
    ConfusionCounts,
    MetricsReport,
    RocCurve,
    confusion,
    metrics,
    roc_auc,
)
from spillseg.models.fusion import binarize
from spillseg.models.network import FusionSegmenter

logger = logging.getLogger(__name__)


@dataclass
class EvaluationResult:
    report: MetricsReport
    counts: ConfusionCounts
    curve: Optional[RocCurve] = None
    per_item: list[ConfusionCounts] = field(default_factory=list)
    # summed over items whose ground-truth mask is empty (look-alike-only scenes)
    empty_mask_counts: ConfusionCounts = field(default_factory=ConfusionCounts)

    @property
    def false_positive_rate(self) -> float:
        return self.counts.false_positive_rate

    @property
    def empty_mask_false_positive_rate(self) -> float:
        return self.empty_mask_counts.false_positive_rate


@dataclass(frozen=True)
class FalseAlarmComparison:
    model_fpr: float
    baseline_fpr: float
    reduction: Optional[float]
    model_fpr_empty: float
    baseline_fpr_empty: float
    reduction_empty: Optional[float]
    empty_scenes: int


def relative_reduction(model_rate: float, baseline_rate: float) -> Optional[float]:
    """``1 - model / baseline``; None when the baseline raised no false alarms."""
    if baseline_rate <= 0.0:
        return None
    return 1.0 - model_rate / baseline_rate


def evaluate_masks(pred_masks, scores, gt_masks) -> EvaluationResult:
    """Metrics for binary predictions plus ROC over the per-pixel *scores*."""
    pred = np.asarray(pred_masks)
    gt = np.asarray(gt_masks)
    if pred.shape != gt.shape:
        raise ShapeError(f"prediction shape {pred.shape} does not match mask shape {gt.shape}")
    if pred.shape[0] == 0:
        raise DataError("nothing to evaluate: empty split")

    per_item = [confusion(pred[i], gt[i]) for i in range(pred.shape[0])]
    counts = sum(per_item, ConfusionCounts())
    empty = sum(
        (c for c, g in zip(per_item, gt) if not np.any(g)),
        ConfusionCounts(),
    )
    report = metrics(counts)

    curve = None
    try:
        curve, auc = roc_auc(scores, gt)
        report = report.with_auc(auc)
    except DataError as exc:
        logger.warning("ROC-AUC undefined: %s", exc)

    return EvaluationResult(report, counts, curve, per_item, empty)


def predict_probabilities(
    model: FusionSegmenter,
    params: ParamStore,
    images: np.ndarray,
    batch_size: int = 16,
) -> np.ndarray:
    images = np.asarray(images, dtype=np.float64)
    chunks = [
        model.forward(images[start : start + batch_size], params)
        for start in range(0, images.shape[0], batch_size)
    ]
    if not chunks:
        raise DataError("nothing to predict: no images")
    return np.concatenate(chunks, axis=0)


def evaluate_model(
    model: FusionSegmenter,
    params: ParamStore,
    images: np.ndarray,
    masks: np.ndarray,
    threshold: float | None = None,
    batch_size: int = 16,
) -> EvaluationResult:
    threshold = model.threshold if threshold is None else threshold
    probs = predict_probabilities(model, params, images, batch_size)
    return evaluate_masks(binarize(probs, threshold), probs, masks)


def validation_iou(
    model: FusionSegmenter,
    params: ParamStore,
    images: np.ndarray,
    masks: np.ndarray,
    threshold: float = 0.5,
    batch_size: int = 16,
) -> float:
    """IoU only; skips ROC work during training."""
    probs = predict_probabilities(model, params, images, batch_size)
    return metrics(confusion(binarize(probs, threshold), masks)).iou


def evaluate_baseline(images: np.ndarray, masks: np.ndarray) -> EvaluationResult:
    return evaluate_masks(threshold_baseline(images), darkness_scores(images), masks)


def compare_false_alarms(
    model_result: EvaluationResult, baseline_result: EvaluationResult
) -> FalseAlarmComparison:
    empty_scenes = sum(
        1 for c in model_result.per_item if c.tp + c.fn == 0
    )
    return FalseAlarmComparison(
        model_fpr=model_result.false_positive_rate,
        baseline_fpr=baseline_result.false_positive_rate,
        reduction=relative_reduction(
            model_result.false_positive_rate, baseline_result.false_positive_rate
        ),
        model_fpr_empty=model_result.empty_mask_false_positive_rate,
        baseline_fpr_empty=baseline_result.empty_mask_false_positive_rate,
        reduction_empty=relative_reduction(
            model_result.empty_mask_false_positive_rate,
            baseline_result.empty_mask_false_positive_rate,
        ),
        empty_scenes=empty_scenes,
    )
