"""Clustering accuracy via optimal label matching."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment


@dataclass
class AccReport:
    acc: float
    mapping: dict[int, int]  # predicted label -> matched true label (-1: unmatched)
    confusion: np.ndarray  # (k_pred, k_true) counts

    def to_dict(self) -> dict:
        return {
            "acc": self.acc,
            "mapping": {str(k): v for k, v in self.mapping.items()},
            "confusion": self.confusion.tolist(),
        }


def hungarian(cost: np.ndarray) -> tuple[np.ndarray, np.ndarray, float]:
    """Minimum-cost assignment of rows to columns.

    Rectangular inputs are padded to square with zeros, so every row and
    column of the original matrix participates; returns the matched
    (row, column) pairs that fall inside the original shape plus the total
    cost over those pairs.
    """
    cost = np.asarray(cost, dtype=np.float64)
    if cost.ndim != 2:
        raise ValueError(f"cost must be 2-D, got shape {cost.shape}")
    if not np.isfinite(cost).all():
        raise ValueError("cost entries must be finite")
    r, c = cost.shape
    side = max(r, c)
    padded = np.zeros((side, side))
    padded[:r, :c] = cost
    rows, cols = linear_sum_assignment(padded)
    keep = (rows < r) & (cols < c)
    rows, cols = rows[keep], cols[keep]
    return rows, cols, float(cost[rows, cols].sum())


def accuracy(pred, truth: np.ndarray) -> AccReport:
    """Best-matching clustering accuracy.

    Builds the predicted-vs-true confusion matrix and finds the injective
    predicted->true matching that maximizes the matched count (minimum-cost
    assignment on negated counts).
    """
    pred_labels = pred.labels if hasattr(pred, "labels") else np.asarray(pred)
    truth = np.asarray(truth)
    if pred_labels.shape != truth.shape:
        raise ValueError(
            f"length mismatch: {pred_labels.size} predictions vs {truth.size} truths"
        )
    n = truth.size
    pred_classes, pred_idx = np.unique(pred_labels, return_inverse=True)
    true_classes, true_idx = np.unique(truth, return_inverse=True)
    confusion = np.zeros((pred_classes.size, true_classes.size), dtype=np.int64)
    np.add.at(confusion, (pred_idx, true_idx), 1)

    rows, cols, _ = hungarian(-confusion.astype(np.float64))
    matched = int(confusion[rows, cols].sum())
    mapping = {int(pc): -1 for pc in pred_classes}
    for r, c in zip(rows, cols):
        mapping[int(pred_classes[r])] = int(true_classes[c])
    return AccReport(matched / n, mapping, confusion)
