"""Classification metrics for leave-one-subject-out runs.

Pooling note: subject folds here are small and unevenly sized, so "score the
concatenation of all fold predictions" (micro pooling) and "average per-fold
scores" give different numbers. Both are computed and reported side by side;
tables cite the pooled value.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def predict_labels(logits: np.ndarray) -> np.ndarray:
    """Row-wise argmax; ties resolve to the lowest class index."""
    logits = np.asarray(logits)
    if logits.ndim != 2:
        raise ValueError(f"logits must be N x C, got shape {logits.shape}")
    return np.argmax(logits, axis=1).astype(np.int64)


@dataclass(frozen=True)
class Scored:
    accuracy: float
    macro_f1: float
    per_class_f1: np.ndarray  # (C,)
    confusion: np.ndarray  # (C, C), rows = truth, cols = prediction
    n: int


def score(preds: np.ndarray, labels: np.ndarray, n_classes: int) -> Scored:
    preds = np.asarray(preds, dtype=np.int64)
    labels = np.asarray(labels, dtype=np.int64)
    if preds.shape != labels.shape or preds.ndim != 1:
        raise ValueError("preds and labels must be equal-length 1-D arrays")
    if preds.size == 0:
        raise ValueError("cannot score an empty prediction set")
    for name, arr in (("preds", preds), ("labels", labels)):
        if arr.min() < 0 or arr.max() >= n_classes:
            raise ValueError(f"{name} out of range [0, {n_classes})")

    confusion = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(confusion, (labels, preds), 1)

    tp = np.diag(confusion).astype(np.float64)
    fp = confusion.sum(axis=0) - tp
    fn = confusion.sum(axis=1) - tp
    # per-class F1 = 2TP/(2TP + FP + FN), defined as 0 on an empty denominator
    denom = 2.0 * tp + fp + fn
    f1 = np.where(denom > 0, 2.0 * tp / np.maximum(denom, 1.0), 0.0)

    return Scored(
        accuracy=float(np.mean(preds == labels)),
        macro_f1=float(np.mean(f1)),
        per_class_f1=f1,
        confusion=confusion,
        n=int(preds.size),
    )


@dataclass(frozen=True)
class PooledScores:
    pooled: Scored
    fold_mean_accuracy: float
    fold_mean_macro_f1: float
    fold_scores: list[Scored]


def pool_folds(
    fold_preds: list[np.ndarray], fold_labels: list[np.ndarray], n_classes: int
) -> PooledScores:
    """Concatenate folds and score once; also report the per-fold mean."""
    if len(fold_preds) != len(fold_labels) or not fold_preds:
        raise ValueError("need one non-empty prediction array per fold")
    fold_scores = [
        score(p, y, n_classes) for p, y in zip(fold_preds, fold_labels)
    ]
    pooled = score(np.concatenate(fold_preds), np.concatenate(fold_labels), n_classes)
    return PooledScores(
        pooled=pooled,
        fold_mean_accuracy=float(np.mean([s.accuracy for s in fold_scores])),
        fold_mean_macro_f1=float(np.mean([s.macro_f1 for s in fold_scores])),
        fold_scores=fold_scores,
    )
