import math

import numpy as np

from spillseg.domain.metrics import MetricsReport, roc_curve
from spillseg.domain.training.trainer import EpochRecord
from spillseg.infra.reports import (
    read_csv_rows,
    write_metrics_csv,
    write_roc_csv,
    write_training_log,
)


def test_metrics_csv_has_one_row_in_fixed_column_order(tmp_path):
    report = MetricsReport(accuracy=0.9, precision=0.75, recall=0.6, f1=2 / 3, iou=0.5, roc_auc=0.875)

    path = write_metrics_csv(tmp_path / "out" / "metrics.csv", report)

    lines = path.read_text(encoding="utf-8").splitlines()
    assert lines[0] == "accuracy,precision,recall,f1,iou,roc_auc"
    assert len(lines) == 2
    row = read_csv_rows(path)[0]
    assert float(row["f1"]) == 2 / 3
    assert float(row["roc_auc"]) == 0.875


def test_undefined_auc_is_an_empty_field(tmp_path):
    report = MetricsReport(accuracy=1.0, precision=0.0, recall=0.0, f1=0.0, iou=0.0)

    path = write_metrics_csv(tmp_path / "metrics.csv", report)

    assert read_csv_rows(path)[0]["roc_auc"] == ""


def test_roc_csv_lists_the_whole_curve(tmp_path):
    curve = roc_curve(np.array([0.9, 0.8, 0.3, 0.1]), np.array([1, 0, 1, 0]))

    rows = read_csv_rows(write_roc_csv(tmp_path / "roc.csv", curve))

    assert list(rows[0]) == ["threshold", "fpr", "tpr"]
    assert len(rows) == len(curve)
    assert math.isinf(float(rows[0]["threshold"]))
    assert (float(rows[0]["fpr"]), float(rows[0]["tpr"])) == (0.0, 0.0)
    assert (float(rows[-1]["fpr"]), float(rows[-1]["tpr"])) == (1.0, 1.0)


def test_training_log_keeps_integer_epochs(tmp_path):
    records = [
        EpochRecord(epoch=0, lr=1e-4, train_loss=0.7, val_iou=0.1, improved=True),
        EpochRecord(epoch=1, lr=5e-5, train_loss=0.5, val_iou=0.05),
    ]

    path = write_training_log(tmp_path / "train_log.csv", records)

    lines = path.read_text(encoding="utf-8").splitlines()
    assert lines[0] == "epoch,lr,train_loss,val_iou"
    assert lines[1] == "0,0.0001,0.7,0.1"
    assert lines[2].startswith("1,5e-05,")
