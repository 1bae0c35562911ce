"""CSV writers for metrics, ROC curves and training logs."""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Iterable

from spillseg.domain.metrics import METRIC_FIELDS, MetricsReport, RocCurve

ROC_FIELDS = ("threshold", "fpr", "tpr")
LOG_FIELDS = ("epoch", "lr", "train_loss", "val_iou")


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, int) and not isinstance(value, bool):
        return str(value)
    return repr(float(value))


def _write_rows(path: str | Path, header: Iterable[str], rows: Iterable[Iterable]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])
    return path


def write_metrics_csv(path: str | Path, report: MetricsReport) -> Path:
    """One row; an undefined ROC-AUC is written as an empty field."""
    row = report.as_row()
    return _write_rows(path, METRIC_FIELDS, [[row[name] for name in METRIC_FIELDS]])


def write_roc_csv(path: str | Path, curve: RocCurve) -> Path:
    return _write_rows(path, ROC_FIELDS, curve.points)


def write_training_log(path: str | Path, records) -> Path:
    return _write_rows(
        path,
        LOG_FIELDS,
        ([r.epoch, r.lr, r.train_loss, r.val_iou] for r in records),
    )


def read_csv_rows(path: str | Path) -> list[dict[str, str]]:
    with open(path, "r", encoding="utf-8", newline="") as f:
        return list(csv.DictReader(f))
