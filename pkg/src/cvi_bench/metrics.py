"""Distance functions between points and pairwise-distance construction.

All distances are dissimilarities (smaller = closer). Minkowski with
fractional exponents is supported; it is used as a dissimilarity, not a
metric, since the triangle inequality fails for ``p < 1``. Cosine is
``1 - cos(theta)`` so it can be substituted wherever a distance is expected.
"""
from __future__ import annotations

import numpy as np
from scipy.spatial import distance as _sdist

from .core import Dataset, MetricKind, MetricSpec

__all__ = ["MetricDomainError", "distance", "pairwise_matrix", "pairwise_condensed", "cross_distances"]


class MetricDomainError(ValueError):
    """Input outside a metric's domain (e.g. zero-norm vector under cosine)."""


def _check_cosine_norms(points: np.ndarray) -> None:
    norms = np.linalg.norm(points, axis=-1)
    if np.any(norms == 0.0):
        raise MetricDomainError("cosine distance undefined for zero-norm vectors")


def distance(x: np.ndarray, y: np.ndarray, metric: MetricSpec) -> float:
    """Distance between two points under ``metric``.

    Minkowski returns ``(sum |x_i - y_i|^p)^(1/p)``; Euclidean is the p=2
    case. Cosine returns ``1 - x.y/(|x||y|)`` clipped into [0, 2].
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError(f"points must be 1-d and same shape, got {x.shape} vs {y.shape}")
    if metric.kind is MetricKind.EUCLIDEAN:
        return float(np.sqrt(np.sum((x - y) ** 2)))
    if metric.kind is MetricKind.MINKOWSKI:
        return float(np.sum(np.abs(x - y) ** metric.p) ** (1.0 / metric.p))
    _check_cosine_norms(np.stack([x, y]))
    cos = np.dot(x, y) / (np.linalg.norm(x) * np.linalg.norm(y))
    return float(1.0 - min(1.0, max(-1.0, cos)))


def cross_distances(a: np.ndarray, b: np.ndarray, metric: MetricSpec) -> np.ndarray:
    """All distances between rows of ``a`` and rows of ``b`` (len(a) x len(b))."""
    a = np.atleast_2d(np.asarray(a, dtype=np.float64))
    b = np.atleast_2d(np.asarray(b, dtype=np.float64))
    if a.shape[1] != b.shape[1]:
        raise ValueError(f"dimension mismatch: {a.shape[1]} vs {b.shape[1]}")
    if metric.kind is MetricKind.EUCLIDEAN:
        return _sdist.cdist(a, b, "euclidean")
    if metric.kind is MetricKind.MINKOWSKI:
        return _sdist.cdist(a, b, "minkowski", p=metric.p)
    _check_cosine_norms(a)
    _check_cosine_norms(b)
    return np.clip(_sdist.cdist(a, b, "cosine"), 0.0, 2.0)


def pairwise_condensed(points: np.ndarray, metric: MetricSpec) -> np.ndarray:
    """Condensed (upper-triangle, row-major) pairwise distances of ``points``."""
    points = np.asarray(points, dtype=np.float64)
    if metric.kind is MetricKind.EUCLIDEAN:
        return _sdist.pdist(points, "euclidean")
    if metric.kind is MetricKind.MINKOWSKI:
        return _sdist.pdist(points, "minkowski", p=metric.p)
    _check_cosine_norms(points)
    return np.clip(_sdist.pdist(points, "cosine"), 0.0, 2.0)


def pairwise_matrix(dataset: Dataset, metric: MetricSpec) -> np.ndarray:
    """Full N x N symmetric distance matrix with an exactly zero diagonal."""
    square = _sdist.squareform(pairwise_condensed(dataset.points, metric))
    return square
