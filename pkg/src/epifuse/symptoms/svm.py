"""One-vs-rest linear SVM trained by stochastic subgradient descent, plus
class balancing and macro-averaged evaluation."""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from numba import njit

# 1 unrelated, 2 user has symptoms now, 3 user had symptoms,
# 4 someone else has symptoms now, 5 someone else had symptoms
CLASSES = (1, 2, 3, 4, 5)
SYMPTOMATIC = frozenset({2, 3, 4, 5})


@dataclass(frozen=True, eq=False)
class SvmModel:
    classes: tuple[int, ...]
    weights: np.ndarray  # (n_classes, d)
    bias: np.ndarray     # (n_classes,)
    majority: int

    def scores(self, x) -> np.ndarray:
        return self.weights @ np.asarray(x, dtype=float) + self.bias


@njit(cache=True)
def _train(x, y_pm, order, lam, eta0):
    n, d = x.shape
    k = y_pm.shape[1]
    w = np.zeros((k, d))
    b = np.zeros(k)
    t0 = 1.0 / (lam * eta0)
    t = 0
    for epoch in range(order.shape[0]):
        for idx in range(n):
            i = order[epoch, idx]
            eta = 1.0 / (lam * (t0 + t))
            t += 1
            for c in range(k):
                margin = b[c]
                for q in range(d):
                    margin += w[c, q] * x[i, q]
                margin *= y_pm[i, c]
                shrink = 1.0 - eta * lam
                for q in range(d):
                    w[c, q] *= shrink
                if margin < 1.0:
                    for q in range(d):
                        w[c, q] += eta * y_pm[i, c] * x[i, q]
                    b[c] += eta * y_pm[i, c]
    return w, b


def train_svm(vectors, labels: Sequence[int], lam: float = 1e-4, epochs: int = 30,
              eta0: float = 0.1, seed: int = 0) -> SvmModel:
    """Hinge loss + L2 per class against the rest; deterministic given ``seed``."""
    x = np.ascontiguousarray(vectors, dtype=float)
    y = np.asarray(labels, dtype=int)
    if x.ndim != 2 or x.shape[0] != y.size:
        raise ValueError("vectors must be (n, d) with one label per row")
    classes = tuple(sorted(set(y.tolist())))
    if len(classes) < 2:
        raise ValueError("need at least two distinct labels")
    y_pm = np.where(y[:, None] == np.array(classes)[None, :], 1.0, -1.0)
    rng = np.random.default_rng(seed)
    order = np.array([rng.permutation(y.size) for _ in range(epochs)], dtype=np.int64)
    w, b = _train(x, y_pm, order, lam, eta0)
    counts = Counter(y.tolist())
    majority = min(c for c in classes if counts[c] == max(counts.values()))
    return SvmModel(classes, w, b, majority)


def classify(model: SvmModel, vector) -> int:
    """Highest-scoring class; ties go to the lowest class label. A zero vector
    (no known tokens) carries no evidence and gets the majority class."""
    v = np.asarray(vector, dtype=float)
    if not np.any(v):
        return model.majority
    return model.classes[int(np.argmax(model.scores(v)))]


def classify_many(model: SvmModel, vectors) -> np.ndarray:
    return np.array([classify(model, v) for v in np.atleast_2d(vectors)], dtype=int)


def balance_classes(items: Sequence, labels: Sequence[int], target: int, seed: int = 0
                    ) -> tuple[list, list[int]]:
    """Resample every class to exactly ``target`` items.

    Larger classes are subsampled without replacement; smaller ones keep all
    their items and are topped up by sampling with replacement.
    """
    if target < 1:
        raise ValueError("target must be positive")
    if len(items) != len(labels):
        raise ValueError("items and labels differ in length")
    rng = np.random.default_rng(seed)
    by_class: dict[int, list[int]] = {}
    for i, lab in enumerate(labels):
        by_class.setdefault(int(lab), []).append(i)
    picked: list[int] = []
    for lab in sorted(by_class):
        idx = np.array(by_class[lab])
        if idx.size >= target:
            chosen = rng.choice(idx, size=target, replace=False)
        else:
            chosen = np.concatenate([idx, rng.choice(idx, size=target - idx.size)])
        picked.extend(int(i) for i in chosen)
    order = rng.permutation(len(picked))
    picked = [picked[i] for i in order]
    return [items[i] for i in picked], [int(labels[i]) for i in picked]


def classification_metrics(y_true: Sequence[int], y_pred: Sequence[int]) -> dict[str, float]:
    """Macro-averaged precision, recall and F1 over the labels seen in either
    argument, plus accuracy. Undefined ratios count as zero."""
    t = np.asarray(y_true, dtype=int)
    p = np.asarray(y_pred, dtype=int)
    if t.shape != p.shape or t.size == 0:
        raise ValueError("need equal-length, non-empty label sequences")
    labels = sorted(set(t.tolist()) | set(p.tolist()))
    prec, rec, f1 = [], [], []
    for lab in labels:
        tp = np.sum((p == lab) & (t == lab))
        fp = np.sum((p == lab) & (t != lab))
        fn = np.sum((p != lab) & (t == lab))
        pr = tp / (tp + fp) if tp + fp else 0.0
        rc = tp / (tp + fn) if tp + fn else 0.0
        prec.append(pr)
        rec.append(rc)
        f1.append(2 * pr * rc / (pr + rc) if pr + rc else 0.0)
    return {"f1": float(np.mean(f1)), "accuracy": float(np.mean(t == p)),
            "precision": float(np.mean(prec)), "recall": float(np.mean(rec))}


def evaluate_classifier(model: SvmModel, vectors, labels: Sequence[int]) -> dict[str, float]:
    return classification_metrics(labels, classify_many(model, vectors))
