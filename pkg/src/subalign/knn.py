"""Exhaustive k-nearest-neighbors with deceptive-class probabilities."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data_model import Label

_BLOCK_ELEMS = 1 << 22


@dataclass(frozen=True)
class KnnModel:
    points: np.ndarray
    labels: np.ndarray  # 1 = deceptive
    k: int

    @property
    def degenerate(self) -> bool:
        """True when the training labels contain a single class."""
        return len(np.unique(self.labels)) < 2


def fit(points: np.ndarray, labels, k: int) -> KnnModel:
    points = np.asarray(points, dtype=float)
    labels = np.asarray(labels, dtype=np.int8)
    if points.ndim != 2:
        raise ValueError("points must be a 2-D matrix")
    if len(labels) != len(points):
        raise ValueError("labels do not align with points")
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if k > len(points):
        raise ValueError(f"k={k} exceeds the {len(points)} training points")
    return KnnModel(points, labels, int(k))


def neighbor_order(points: np.ndarray, queries: np.ndarray) -> np.ndarray:
    """Training indices sorted by Euclidean distance for every query row.

    Equal distances keep training-row order.
    """
    n, dim = points.shape
    block = max(1, _BLOCK_ELEMS // max(1, n * dim))
    d2 = np.empty((len(queries), n))
    for start in range(0, len(queries), block):
        diff = queries[start : start + block, None, :] - points[None, :, :]
        d2[start : start + block] = np.einsum("qnd,qnd->qn", diff, diff)
    return np.argsort(d2, axis=1, kind="stable")


def deceptive_counts(points: np.ndarray, labels: np.ndarray, queries: np.ndarray) -> np.ndarray:
    """counts[q, j] = deceptive labels among the j+1 nearest neighbors of query q."""
    order = neighbor_order(points, queries)
    return np.cumsum(labels[order], axis=1)


def _as_queries(m: KnnModel, query) -> np.ndarray:
    q = np.asarray(query, dtype=float)
    if q.ndim == 1:
        q = q[None, :]
    if q.ndim != 2 or q.shape[1] != m.points.shape[1]:
        raise ValueError(f"query dimension {q.shape[-1]} != training dimension {m.points.shape[1]}")
    return q


def predict_proba(m: KnnModel, query) -> float:
    return float(predict_proba_many(m, query)[0])


def predict_proba_many(m: KnnModel, queries) -> np.ndarray:
    q = _as_queries(m, queries)
    order = neighbor_order(m.points, q)[:, : m.k]
    return m.labels[order].sum(axis=1) / m.k


def label_from_proba(p) -> np.ndarray:
    """Deceptive (1) iff probability >= 0.5."""
    return (np.asarray(p) >= 0.5).astype(np.int8)


def predict(m: KnnModel, query) -> Label:
    return Label.DECEPTIVE if predict_proba(m, query) >= 0.5 else Label.TRUTHFUL
