"""Classification metrics on a node subset."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata


@dataclass(frozen=True)
class Metrics:
    accuracy: float
    f1_macro: float
    f1_micro: float
    auc: float


def softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def predict(logits: np.ndarray) -> np.ndarray:
    # np.argmax returns the first maximum, i.e. the lowest class index on ties
    return np.argmax(logits, axis=1)


def binary_auc(scores: np.ndarray, positive: np.ndarray) -> float:
    """Area under the ROC curve via the rank-sum identity (ties count one half).

    Equal to the trapezoidal area under the empirical ROC curve.
    """
    pos = int(positive.sum())
    neg = positive.size - pos
    if pos == 0 or neg == 0:
        return float("nan")
    ranks = rankdata(scores)
    return float((ranks[positive].sum() - pos * (pos + 1) / 2.0) / (pos * neg))


def f1_scores(y_true: np.ndarray, y_pred: np.ndarray, classes) -> tuple[float, float]:
    """Macro F1 over ``classes`` and micro F1 over all predictions."""
    per_class = []
    tp_sum = fp_sum = fn_sum = 0
    for c in classes:
        tp = int(np.sum((y_pred == c) & (y_true == c)))
        fp = int(np.sum((y_pred == c) & (y_true != c)))
        fn = int(np.sum((y_pred != c) & (y_true == c)))
        denom = 2 * tp + fp + fn
        per_class.append(2 * tp / denom if denom else 0.0)
    for c in np.union1d(y_true, y_pred):
        tp_sum += int(np.sum((y_pred == c) & (y_true == c)))
        fp_sum += int(np.sum((y_pred == c) & (y_true != c)))
        fn_sum += int(np.sum((y_pred != c) & (y_true == c)))
    denom = 2 * tp_sum + fp_sum + fn_sum
    micro = 2 * tp_sum / denom if denom else 0.0
    return (float(np.mean(per_class)) if per_class else float("nan")), micro


def evaluate(logits: np.ndarray, labels: np.ndarray, mask: np.ndarray) -> Metrics:
    """Accuracy, macro/micro F1 and one-vs-rest macro AUC on ``mask``.

    Classes with no node in the mask are left out of both macro averages.
    """
    labels = np.asarray(labels)
    mask = np.asarray(mask, dtype=bool)
    z = np.asarray(logits, dtype=np.float64)[mask]
    y = labels[mask]
    if y.size == 0:
        raise ValueError("evaluation mask selects no nodes")
    pred = predict(z)
    acc = float(np.mean(pred == y))
    present = np.unique(y)
    f1_macro, f1_micro = f1_scores(y, pred, present)
    prob = softmax(z)
    aucs = [binary_auc(prob[:, c], y == c) for c in present if c < prob.shape[1]]
    aucs = [a for a in aucs if not np.isnan(a)]
    auc = float(np.mean(aucs)) if aucs else float("nan")
    return Metrics(acc, f1_macro, f1_micro, auc)
