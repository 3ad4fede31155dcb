"""Building-block statistics the validity indices are assembled from.

Squared-distance sums (WSS/BSS/TSS) substitute ``distance(.,., m)**2`` for
the squared Euclidean norm under non-Euclidean metrics, preserving each
formula's homogeneity degree. Barycenters are always coordinate means.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import Dataset, MetricSpec, Partition
from .metrics import cross_distances, pairwise_condensed

__all__ = [
    "PairCounts",
    "wss_k",
    "cluster_wss",
    "pooled_wss",
    "bss",
    "tss",
    "pair_counts",
    "condensed_within_mask",
]


@dataclass(frozen=True)
class PairCounts:
    """Concordance/discordance counts and pair-distance sums for a partition.

    ``s_plus`` counts ordered (within-pair, between-pair) comparisons where
    the within-cluster distance is strictly smaller, ``s_minus`` where it is
    strictly larger; exact ties count toward neither. ``sum_min``/``sum_max``
    are the sums of the ``n_within`` smallest/largest pair distances in the
    whole dataset.
    """

    s_plus: int
    s_minus: int
    n_within: int
    n_between: int
    n_total: int
    sum_within: float
    sum_between: float
    sum_min: float
    sum_max: float


def _center_sq_dists(points: np.ndarray, center: np.ndarray, metric: MetricSpec) -> np.ndarray:
    return cross_distances(points, center[None, :], metric)[:, 0] ** 2


def wss_k(dataset: Dataset, partition: Partition, k: int, metric: MetricSpec) -> float:
    """Within-cluster dispersion of cluster ``k``: sum of squared distances
    of its members to its barycenter."""
    if not 0 <= k < partition.k:
        raise ValueError(f"cluster id {k} outside [0, {partition.k})")
    members = dataset.points[partition.labels == k]
    return float(np.sum(_center_sq_dists(members, partition.barycenters[k], metric)))


def cluster_wss(dataset: Dataset, partition: Partition, metric: MetricSpec) -> np.ndarray:
    """Vector of per-cluster within dispersions (length K)."""
    dists = cross_distances(dataset.points, partition.barycenters, metric)
    own_sq = dists[np.arange(dataset.n_points), partition.labels] ** 2
    return np.bincount(partition.labels, weights=own_sq, minlength=partition.k)


def pooled_wss(dataset: Dataset, partition: Partition, metric: MetricSpec) -> float:
    """Pooled within-cluster sum of squares, summed over all clusters."""
    return float(cluster_wss(dataset, partition, metric).sum())


def bss(dataset: Dataset, partition: Partition, metric: MetricSpec) -> float:
    """Between-cluster dispersion: size-weighted squared distances of cluster
    barycenters to the full-data barycenter."""
    center = dataset.points.mean(axis=0)
    sq = _center_sq_dists(partition.barycenters, center, metric)
    return float(np.sum(partition.cluster_sizes * sq))


def tss(dataset: Dataset, metric: MetricSpec) -> float:
    """Total dispersion: squared distances of all points to the data barycenter."""
    center = dataset.points.mean(axis=0)
    return float(np.sum(_center_sq_dists(dataset.points, center, metric)))


def condensed_within_mask(labels: np.ndarray) -> np.ndarray:
    """Boolean mask over condensed pair order marking same-cluster pairs."""
    labels = np.asarray(labels)
    n = labels.shape[0]
    iu, ju = np.triu_indices(n, k=1)
    return labels[iu] == labels[ju]


def pair_counts(
    dataset: Dataset,
    partition: Partition,
    metric: MetricSpec,
    *,
    condensed: Optional[np.ndarray] = None,
    within: Optional[np.ndarray] = None,
    sorted_condensed: Optional[np.ndarray] = None,
) -> PairCounts:
    """Pair statistics for a partition.

    Concordance counts sort the between-pair distances once and binary-search
    each within-pair distance, so strict inequalities cost
    O(N_T log N_T) instead of the quadratic double loop. The keyword
    arguments let callers reuse precomputed pairwise data.
    """
    if condensed is None:
        condensed = pairwise_condensed(dataset.points, metric)
    if within is None:
        within = condensed_within_mask(partition.labels)
    n = dataset.n_points
    n_total = n * (n - 1) // 2
    within_d = condensed[within]
    between_d = condensed[~within]
    n_within = within_d.size
    n_between = between_d.size

    between_sorted = np.sort(between_d)
    # Strictly-smaller / strictly-larger counts; ties land between the two
    # searchsorted sides and count toward neither.
    s_minus = int(np.searchsorted(between_sorted, within_d, side="left").sum())
    s_plus = int(
        (n_between - np.searchsorted(between_sorted, within_d, side="right")).sum()
    )

    if sorted_condensed is None:
        sorted_condensed = np.sort(condensed)
    if n_within == 0:
        sum_min = sum_max = 0.0
    else:
        sum_min = float(sorted_condensed[:n_within].sum())
        sum_max = float(sorted_condensed[n_total - n_within:].sum())
    return PairCounts(
        s_plus=s_plus,
        s_minus=s_minus,
        n_within=int(n_within),
        n_between=int(n_between),
        n_total=int(n_total),
        sum_within=float(within_d.sum()),
        sum_between=float(between_d.sum()),
        sum_min=sum_min,
        sum_max=sum_max,
    )
