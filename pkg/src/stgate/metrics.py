"""Evaluation metrics: RMSE, ranking AUC, and inverse-prevalence-weighted F1.

AUC follows the Mann-Whitney convention (tied pairs earn half credit) and
is computed from average ranks, which agrees exactly with the quadratic
pairwise count.  IPW-F1 weights every sample by the reciprocal of its true
class prevalence before forming the confusion sums, and is reported on a
0-100 scale.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DataError, UndefinedMetricError


@dataclass
class MetricsReport:
    """One split's metric values plus the context needed to reproduce them."""

    auc: float
    rmse: float
    ipw_f1: float
    n_samples: int
    stage_threshold: float

    def to_dict(self) -> dict:
        return {
            "auc": self.auc,
            "rmse": self.rmse,
            "ipw_f1": self.ipw_f1,
            "n_samples": self.n_samples,
            "stage_threshold": self.stage_threshold,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def rmse(y_hat: Sequence[float], y: Sequence[float]) -> float:
    """Root mean squared error, in the units of the targets."""
    a = np.asarray(y_hat, dtype=np.float64)
    b = np.asarray(y, dtype=np.float64)
    if a.size == 0 or b.size == 0:
        raise DataError("rmse needs non-empty inputs")
    if a.shape != b.shape:
        raise DataError(f"rmse length mismatch: {a.shape} vs {b.shape}")
    return float(np.sqrt(np.mean((a - b) ** 2)))


def stage_labels(y: Sequence[float], threshold: float) -> list[int]:
    """Binary progression labels: 1 iff the score strictly exceeds the threshold."""
    return [1 if v > threshold else 0 for v in np.asarray(y, dtype=np.float64)]


def auc(scores: Sequence[float], labels: Sequence[int]) -> float:
    """Probability that a random positive outranks a random negative.

    Computed from average ranks (Mann-Whitney U); tied score pairs count
    half.  Needs both classes present.
    """
    s = np.asarray(scores, dtype=np.float64)
    lab = np.asarray(labels)
    if s.shape != lab.shape:
        raise DataError(f"auc length mismatch: {s.shape} vs {lab.shape}")
    n_pos = int((lab == 1).sum())
    n_neg = int((lab == 0).sum())
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetricError("auc undefined: needs at least one positive and one negative")
    ranks = _average_ranks(s)
    pos_rank_sum = float(ranks[lab == 1].sum())
    u = pos_rank_sum - n_pos * (n_pos + 1) / 2.0
    return u / float(n_pos * n_neg)


def _average_ranks(values: np.ndarray) -> np.ndarray:
    """1-based ranks with ties sharing the average of their rank range."""
    order = np.argsort(values, kind="stable")
    ranks = np.empty(values.size, dtype=np.float64)
    i = 0
    while i < values.size:
        j = i
        while j + 1 < values.size and values[order[j + 1]] == values[order[i]]:
            j += 1
        avg = (i + j) / 2.0 + 1.0
        ranks[order[i : j + 1]] = avg
        i = j + 1
    return ranks


def ipw_f1(pred_labels: Sequence[int], true_labels: Sequence[int]) -> float:
    """F1 with samples weighted by inverse true-class prevalence, scaled to 0-100.

    Returns 0 when precision and recall are both zero.  Needs both classes
    present in the true labels.
    """
    pred = np.asarray(pred_labels)
    true = np.asarray(true_labels)
    if pred.shape != true.shape:
        raise DataError(f"ipw_f1 length mismatch: {pred.shape} vs {true.shape}")
    n = true.size
    n_pos = int((true == 1).sum())
    n_neg = n - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetricError("ipw_f1 undefined: true labels contain a single class")
    w_pos = n / n_pos
    w_neg = n / n_neg
    weights = np.where(true == 1, w_pos, w_neg)
    tp = float(weights[(true == 1) & (pred == 1)].sum())
    fp = float(weights[(true == 0) & (pred == 1)].sum())
    fn = float(weights[(true == 1) & (pred == 0)].sum())
    if tp + fp == 0.0 or tp + fn == 0.0:
        return 0.0
    precision = tp / (tp + fp)
    recall = tp / (tp + fn)
    if precision + recall == 0.0:
        return 0.0
    return 100.0 * 2.0 * precision * recall / (precision + recall)


def evaluate(y_hat: Sequence[float], y_true: Sequence[float], threshold: float) -> MetricsReport:
    """Full report for one split: RMSE on raw scores, AUC/IPW-F1 on stages.

    Stage truth comes from thresholding the true scores; predicted stages
    threshold the predictions with the same cutoff, and AUC ranks the raw
    predictions against the stage truth.
    """
    y_hat = np.asarray(y_hat, dtype=np.float64)
    y_true = np.asarray(y_true, dtype=np.float64)
    if y_hat.size == 0:
        raise DataError("evaluate needs a non-empty split")
    true_stages = stage_labels(y_true, threshold)
    pred_stages = stage_labels(y_hat, threshold)
    return MetricsReport(
        auc=auc(y_hat, true_stages),
        rmse=rmse(y_hat, y_true),
        ipw_f1=ipw_f1(pred_stages, true_stages),
        n_samples=int(y_hat.size),
        stage_threshold=float(threshold),
    )
