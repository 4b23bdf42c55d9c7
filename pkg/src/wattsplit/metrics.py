"""Evaluation metrics for state identification and power retrieval.

Precision = TP/(TP+FP) and recall = TP/(TP+FN), the standard definitions;
any 0/0 is reported as 0. Regression errors are computed in watts, after
de-normalization.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    fn: int
    tn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn


@dataclass(frozen=True)
class ClassificationReport:
    precision: float
    recall: float
    f1: float
    accuracy: float


@dataclass(frozen=True)
class RegressionReport:
    mae: float
    mse: float


def _ratio(num: float, den: float) -> float:
    return num / den if den else 0.0


def classification_metrics(pred, truth) -> tuple[ConfusionCounts, ClassificationReport]:
    pred = np.asarray(pred).astype(bool)
    truth = np.asarray(truth).astype(bool)
    if pred.shape != truth.shape:
        raise ValueError(f"length mismatch: {pred.shape} vs {truth.shape}")
    if pred.size == 0:
        raise ValueError("cannot score empty sequences")
    counts = ConfusionCounts(
        tp=int(np.sum(pred & truth)),
        fp=int(np.sum(pred & ~truth)),
        fn=int(np.sum(~pred & truth)),
        tn=int(np.sum(~pred & ~truth)),
    )
    precision = _ratio(counts.tp, counts.tp + counts.fp)
    recall = _ratio(counts.tp, counts.tp + counts.fn)
    f1 = _ratio(2 * precision * recall, precision + recall)
    accuracy = _ratio(counts.tp + counts.tn, counts.total)
    return counts, ClassificationReport(precision, recall, f1, accuracy)


def regression_metrics(pred, truth) -> RegressionReport:
    pred = np.asarray(pred, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    if pred.shape != truth.shape:
        raise ValueError(f"length mismatch: {pred.shape} vs {truth.shape}")
    if pred.size == 0:
        raise ValueError("cannot score empty sequences")
    err = np.abs(pred - truth)
    return RegressionReport(mae=float(err.mean()), mse=float((err ** 2).mean()))


METRICS_CSV_HEADER = "appliance,split,precision,recall,f1,accuracy,mae,mse"


def metrics_csv_row(appliance: str, split: str, cls: ClassificationReport | None,
                    reg: RegressionReport | None) -> str:
    """One CSV row shaped like the per-appliance result tables."""
    def fmt(x, digits):
        return "" if x is None else f"{x:.{digits}f}"

    return ",".join([
        appliance,
        split,
        fmt(cls.precision if cls else None, 4),
        fmt(cls.recall if cls else None, 4),
        fmt(cls.f1 if cls else None, 4),
        fmt(cls.accuracy if cls else None, 4),
        fmt(reg.mae if reg else None, 3),
        fmt(reg.mse if reg else None, 3),
    ])
