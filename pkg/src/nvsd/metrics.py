"""Evaluation metrics for the benchmark harness."""
from __future__ import annotations

import numpy as np


def rmse(y_pred, y_true) -> float:
    """Root mean squared error."""
    y_pred = np.asarray(y_pred, dtype=float)
    y_true = np.asarray(y_true, dtype=float)
    if y_pred.shape != y_true.shape:
        raise ValueError("prediction and target lengths differ")
    if y_pred.size == 0:
        raise ValueError("empty vectors")
    resid = y_pred - y_true
    return float(np.sqrt(resid @ resid / resid.size))


def tanimoto_distance(selected, truth) -> float:
    """1 - |S n T| / |S u T|; two empty sets have distance 0."""
    s, t = set(selected), set(truth)
    union = s | t
    if not union:
        return 0.0
    return 1.0 - len(s & t) / len(union)
