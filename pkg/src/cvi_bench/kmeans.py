"""Lloyd k-means with distance-weighted seeding, used to build partitions.

Assignment is always Euclidean, even when indices are later evaluated under
Minkowski or cosine dissimilarities; only the index formulas swap metrics.

Reproducibility contract: every restart owns an independent RNG stream
derived as ``SeedSequence([seed, K, restart])`` (PCG64), so any single
restart, K, or sweep cell can be replayed in isolation and results do not
depend on execution order or platform.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Dataset, Partition

__all__ = ["KMeansOptions", "kmeans", "kmeans_sweep"]


@dataclass(frozen=True)
class KMeansOptions:
    """Restart and convergence controls.

    Iteration stops when the relative WSS improvement falls below ``tol``
    or after ``max_iter`` Lloyd steps; the best of ``restarts`` runs
    (minimum pooled WSS) is kept.
    """

    restarts: int = 10
    tol: float = 1e-6
    max_iter: int = 300


def _plus_plus_init(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """Distance-weighted (k-means++ style) seeding: each new center is drawn
    with probability proportional to squared distance from the chosen set."""
    n = points.shape[0]
    centers = np.empty((k, points.shape[1]))
    first = int(rng.integers(n))
    centers[0] = points[first]
    closest_sq = np.sum((points - centers[0]) ** 2, axis=1)
    for j in range(1, k):
        total = closest_sq.sum()
        if total > 0:
            idx = int(rng.choice(n, p=closest_sq / total))
        else:
            # All remaining mass is on already-chosen points (duplicates).
            idx = int(rng.integers(n))
        centers[j] = points[idx]
        closest_sq = np.minimum(closest_sq, np.sum((points - centers[j]) ** 2, axis=1))
    return centers


def _sq_dists_to_centers(points: np.ndarray, sq_norms: np.ndarray, centers: np.ndarray) -> np.ndarray:
    d2 = sq_norms[:, None] - 2.0 * (points @ centers.T) + np.sum(centers**2, axis=1)[None, :]
    np.maximum(d2, 0.0, out=d2)
    return d2


def _lloyd(points: np.ndarray, sq_norms: np.ndarray, k: int,
           rng: np.random.Generator, opts: KMeansOptions,
           wss_trace: list | None = None) -> tuple[np.ndarray, float]:
    n = points.shape[0]
    centers = _plus_plus_init(points, k, rng)
    prev_wss = np.inf
    labels = np.zeros(n, dtype=np.int64)
    for _ in range(opts.max_iter):
        d2 = _sq_dists_to_centers(points, sq_norms, centers)
        labels = np.argmin(d2, axis=1)
        counts = np.bincount(labels, minlength=k)
        # Repair empty clusters: donate the point farthest from its current
        # center, never emptying a singleton donor; keeps K fixed.
        for empty in np.flatnonzero(counts == 0):
            own = d2[np.arange(n), labels].copy()
            own[counts[labels] < 2] = -np.inf
            donor = int(np.argmax(own))
            counts[labels[donor]] -= 1
            labels[donor] = empty
            counts[empty] = 1
        for c in range(k):
            centers[c] = points[labels == c].mean(axis=0)
        d2 = _sq_dists_to_centers(points, sq_norms, centers)
        wss = float(d2[np.arange(n), labels].sum())
        if wss_trace is not None:
            wss_trace.append(wss)
        if prev_wss - wss <= opts.tol * max(prev_wss, 1e-300) and np.isfinite(prev_wss):
            prev_wss = wss
            break
        prev_wss = wss
    return labels, prev_wss


def kmeans(dataset: Dataset, k: int, seed: int, opts: KMeansOptions = KMeansOptions()) -> Partition:
    """Best-of-restarts Lloyd k-means partition of ``dataset`` into ``k`` clusters.

    Deterministic given ``(dataset, k, seed, opts)``. Raises ``ValueError``
    when ``k`` is outside ``[2, N]``.
    """
    if not 2 <= k <= dataset.n_points:
        raise ValueError(f"cluster count {k} outside [2, {dataset.n_points}]")
    if opts.restarts < 1:
        raise ValueError("need at least one restart")
    points = dataset.points
    sq_norms = np.sum(points**2, axis=1)
    best_labels, best_wss = None, np.inf
    for restart in range(opts.restarts):
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, k, restart])))
        labels, wss = _lloyd(points, sq_norms, k, rng, opts)
        if wss < best_wss:
            best_labels, best_wss = labels, wss
    return Partition.from_labels(dataset, best_labels)


def kmeans_sweep(dataset: Dataset, k_range: range | list[int], seed: int,
                 opts: KMeansOptions = KMeansOptions()) -> list[Partition]:
    """One partition per K in ``k_range``; per-K seeds derive from (seed, K),
    so the result is independent of sweep order."""
    return [kmeans(dataset, k, seed, opts) for k in k_range]
