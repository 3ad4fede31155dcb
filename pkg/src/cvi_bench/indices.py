"""The 24 relative validity indices, evaluated through a uniform registry.

Each index maps (Dataset, Partition, MetricSpec) to a real value, or to an
explicit undefined marker with a reason when its formula hits a domain error
(K=1 for a between-cluster quantity, log of a zero dispersion, a vanishing
denominator). Pair-based indices share one :class:`~cvi_bench.base_stats.PairCounts`
per (partition, metric); pairwise distances are shared across the whole K
curve via an internal dataset-level cache.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.spatial.distance import squareform

from . import base_stats
from .core import (
    INDEX_TABLE,
    Dataset,
    IndexSpec,
    MetricKind,
    MetricSpec,
    OptimumType,
    Partition,
)
from .metrics import MetricDomainError, cross_distances, pairwise_condensed

__all__ = [
    "IndexValue",
    "UndefinedIndex",
    "DEFAULT_ISOLATION_NEIGHBORS",
    "evaluate",
    "evaluate_curve",
    "evaluate_all",
    "all_index_specs",
]

# Neighborhood size for the isolation index; small relative to typical
# cluster sizes (~200) and stable across the dimension sweep.
DEFAULT_ISOLATION_NEIGHBORS = 10


class UndefinedIndex(Exception):
    """Raised internally when an index value is undefined for a partition."""

    def __init__(self, reason: str):
        super().__init__(reason)
        self.reason = reason


@dataclass(frozen=True)
class IndexValue:
    """Value of one index at one cluster count, or an undefined marker."""

    index_id: str
    k: int
    value: Optional[float]
    reason: Optional[str] = None

    @property
    def defined(self) -> bool:
        return self.value is not None


class _DatasetView:
    """Per-(dataset, metric) caches shared by every partition of a curve."""

    def __init__(self, dataset: Dataset, metric: MetricSpec,
                 isolation_neighbors: int = DEFAULT_ISOLATION_NEIGHBORS):
        self.dataset = dataset
        self.metric = metric
        self.points = dataset.points
        self.n = dataset.n_points
        self.dim = dataset.dim
        self.isolation_neighbors = isolation_neighbors

    @cached_property
    def global_center(self) -> np.ndarray:
        return self.points.mean(axis=0)

    @cached_property
    def dist_to_global(self) -> np.ndarray:
        return cross_distances(self.points, self.global_center[None, :], self.metric)[:, 0]

    @cached_property
    def tss(self) -> float:
        return float(np.sum(self.dist_to_global**2))

    @cached_property
    def condensed(self) -> np.ndarray:
        return pairwise_condensed(self.points, self.metric)

    @cached_property
    def square(self) -> np.ndarray:
        return squareform(self.condensed)

    @cached_property
    def sorted_condensed(self) -> np.ndarray:
        return np.sort(self.condensed)

    @cached_property
    def neighbor_lists(self) -> np.ndarray:
        """Indices of the nearest neighbors of each point, self excluded.

        Ties are broken by point index (stable sort) for determinism.
        """
        p = min(self.isolation_neighbors, self.n - 1)
        d = self.square.copy()
        np.fill_diagonal(d, np.inf)
        order = np.argsort(d, axis=1, kind="stable")
        return order[:, :p]

    @cached_property
    def feature_variance(self) -> np.ndarray:
        return self.points.var(axis=0)


class _PartitionView:
    """Per-partition caches layered over a :class:`_DatasetView`."""

    def __init__(self, ds: _DatasetView, partition: Partition):
        if partition.labels.shape[0] != ds.n:
            raise ValueError("partition does not cover the dataset")
        partition.verify_barycenters(ds.points)
        self.ds = ds
        self.partition = partition
        self.labels = partition.labels
        self.k = partition.k
        self.sizes = partition.cluster_sizes
        self.barycenters = partition.barycenters
        # Pooled WSS of the partitions at K-1 and K+1, when known
        # (required by Krzanowski-Lai only).
        self.kl_neighbor_wss: tuple[Optional[float], Optional[float]] = (None, None)

    @cached_property
    def center_dists(self) -> np.ndarray:
        """N x K distances from each point to each barycenter."""
        return cross_distances(self.ds.points, self.barycenters, self.ds.metric)

    @cached_property
    def own_center_dist(self) -> np.ndarray:
        return self.center_dists[np.arange(self.ds.n), self.labels]

    @cached_property
    def wss_vec(self) -> np.ndarray:
        return np.bincount(self.labels, weights=self.own_center_dist**2, minlength=self.k)

    @cached_property
    def pooled_wss(self) -> float:
        return float(self.wss_vec.sum())

    @cached_property
    def bss(self) -> float:
        sq = cross_distances(self.barycenters, self.ds.global_center[None, :], self.ds.metric)[:, 0] ** 2
        return float(np.sum(self.sizes * sq))

    @cached_property
    def within_mask(self) -> np.ndarray:
        return base_stats.condensed_within_mask(self.labels)

    @cached_property
    def pair_counts(self) -> base_stats.PairCounts:
        return base_stats.pair_counts(
            self.ds.dataset,
            self.partition,
            self.ds.metric,
            condensed=self.ds.condensed,
            within=self.within_mask,
            sorted_condensed=self.ds.sorted_condensed,
        )

    @cached_property
    def barycenter_dists(self) -> np.ndarray:
        return cross_distances(self.barycenters, self.barycenters, self.ds.metric)

    @cached_property
    def max_within_pair(self) -> Optional[float]:
        vals = self.ds.condensed[self.within_mask]
        return float(vals.max()) if vals.size else None

    @cached_property
    def min_between_pair(self) -> Optional[float]:
        vals = self.ds.condensed[~self.within_mask]
        return float(vals.min()) if vals.size else None

    @cached_property
    def cluster_dist_sums(self) -> np.ndarray:
        """N x K sums of distances from each point to each cluster's members."""
        onehot = np.zeros((self.ds.n, self.k))
        onehot[np.arange(self.ds.n), self.labels] = 1.0
        return self.ds.square @ onehot

    def require_between(self) -> None:
        if self.k < 2:
            raise UndefinedIndex("requires at least two clusters")


def _gamma(pv: _PartitionView) -> float:
    pc = pv.pair_counts
    total = pc.s_plus + pc.s_minus
    if total == 0:
        raise UndefinedIndex("no strict within/between pair comparisons")
    return (pc.s_plus - pc.s_minus) / total


def _ball_hall(pv: _PartitionView) -> float:
    return float(np.mean(pv.wss_vec / pv.sizes))


def _banfield_raftery(pv: _PartitionView) -> float:
    mean_disp = pv.wss_vec / pv.sizes
    if np.any(mean_disp <= 0.0):
        raise UndefinedIndex("log of zero within-cluster dispersion")
    return float(np.sum(pv.sizes * np.log(mean_disp)))


def _bic(pv: _PartitionView) -> float:
    n, d, k = pv.ds.n, pv.ds.dim, pv.k
    if n == k:
        raise UndefinedIndex("N - K must be positive")
    sum_mean_wss = float(np.sum(pv.wss_vec / pv.sizes))
    if sum_mean_wss <= 0.0:
        raise UndefinedIndex("log of zero pooled mean dispersion")
    sizes = pv.sizes.astype(np.float64)
    const = k * (d + 1) * math.log(n) / 2.0
    inner = (2.0 * math.pi * sizes * d / (n - k)) * sum_mean_wss
    terms = (
        sizes * np.log(sizes / n)
        - (sizes - 1.0) * d / 2.0
        - sizes * d / 2.0 * np.log(inner)
    )
    return const + float(terms.sum())


def _c_index(pv: _PartitionView) -> float:
    pc = pv.pair_counts
    denom = pc.sum_max - pc.sum_min
    if denom == 0.0:
        raise UndefinedIndex("degenerate pair-distance spread")
    return (pc.sum_within - pc.sum_min) / denom


def _calinski_harabasz(pv: _PartitionView) -> float:
    pv.require_between()
    if pv.pooled_wss == 0.0:
        raise UndefinedIndex("zero pooled WSS")
    n, k = pv.ds.n, pv.k
    return (n - k) / (k - 1) * pv.bss / pv.pooled_wss


def _davies_bouldin(pv: _PartitionView) -> float:
    pv.require_between()
    delta = np.bincount(pv.labels, weights=pv.own_center_dist, minlength=pv.k) / pv.sizes
    sep = pv.barycenter_dists
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = (delta[:, None] + delta[None, :]) / sep
    np.fill_diagonal(ratios, -np.inf)
    return float(np.mean(np.max(ratios, axis=1)))


def _dunn(pv: _PartitionView) -> float:
    pv.require_between()
    diameter = pv.max_within_pair
    if diameter is None or diameter == 0.0:
        raise UndefinedIndex("zero maximum within-cluster diameter")
    return pv.min_between_pair / diameter


def _g_plus(pv: _PartitionView) -> float:
    pc = pv.pair_counts
    denom = pc.n_total * (pc.n_total - 1)
    if denom == 0:
        raise UndefinedIndex("fewer than two point pairs")
    return 2.0 * pc.s_minus / denom


def _isolation(pv: _PartitionView) -> float:
    nn = pv.ds.neighbor_lists
    p = nn.shape[1]
    if p == 0:
        raise UndefinedIndex("no neighbors available")
    outside = pv.labels[nn] != pv.labels[:, None]
    return float(np.mean(1.0 - outside.sum(axis=1) / p))


def _krzanowski_lai(pv: _PartitionView) -> float:
    if pv.k < 2:
        raise UndefinedIndex("requires at least two clusters")
    wss_prev, wss_next = pv.kl_neighbor_wss
    if wss_prev is None or wss_next is None:
        raise UndefinedIndex("requires pooled WSS at K-1 and K+1")
    k, d = pv.k, pv.ds.dim
    e = 2.0 / d
    diff_k = (k - 1) ** e * wss_prev - k**e * pv.pooled_wss
    diff_next = k**e * pv.pooled_wss - (k + 1) ** e * wss_next
    if diff_next == 0.0:
        raise UndefinedIndex("zero successive WSS difference at K+1")
    return abs(diff_k) / abs(diff_next)


def _hartigan(pv: _PartitionView) -> float:
    if pv.bss == 0.0 or pv.pooled_wss == 0.0:
        raise UndefinedIndex("log of zero dispersion ratio")
    return math.log(pv.bss / pv.pooled_wss)


def _mcclain_rao(pv: _PartitionView) -> float:
    pc = pv.pair_counts
    if pc.n_within == 0 or pc.sum_between == 0.0:
        raise UndefinedIndex("no within pairs or zero between-pair distance sum")
    return (pc.n_between / pc.n_within) * (pc.sum_within / pc.sum_between)


def _pbm(pv: _PartitionView) -> float:
    pv.require_between()
    iu = np.triu_indices(pv.k, k=1)
    d_b = float(pv.barycenter_dists[iu].max())
    e_w = float(pv.own_center_dist.sum())
    if e_w == 0.0:
        raise UndefinedIndex("zero within-cluster distance sum")
    e_t = float(pv.ds.dist_to_global.sum())
    return (e_t * d_b / (pv.k * e_w)) ** 2


def _point_biserial(pv: _PartitionView) -> float:
    pc = pv.pair_counts
    if pc.n_within == 0 or pc.n_between == 0:
        raise UndefinedIndex("needs both within and between pairs")
    return (
        (pc.sum_within / pc.n_within - pc.sum_between / pc.n_between)
        * math.sqrt(pc.n_within * pc.n_between)
        / pc.n_total
    )


def _rmsstd(pv: _PartitionView) -> float:
    denom = pv.ds.dim * float(np.sum(pv.sizes - 1))
    if denom == 0.0:
        raise UndefinedIndex("all clusters are singletons")
    return math.sqrt(pv.pooled_wss / denom)


def _rs(pv: _PartitionView) -> float:
    if pv.ds.tss == 0.0:
        raise UndefinedIndex("zero total dispersion")
    return 1.0 - pv.pooled_wss / pv.ds.tss


def _ray_turi(pv: _PartitionView) -> float:
    pv.require_between()
    iu = np.triu_indices(pv.k, k=1)
    min_sep = float(pv.barycenter_dists[iu].min())
    if min_sep == 0.0:
        raise UndefinedIndex("coincident barycenters")
    return pv.pooled_wss / (pv.ds.n * min_sep**2)


def _s_dbw(pv: _PartitionView) -> float:
    pv.require_between()
    norm_full = float(np.linalg.norm(pv.ds.feature_variance))
    if norm_full == 0.0:
        raise UndefinedIndex("zero dataset variance")
    points = pv.ds.points
    cluster_members = [np.flatnonzero(pv.labels == c) for c in range(pv.k)]
    norms_k = np.array(
        [np.linalg.norm(points[m].var(axis=0)) for m in cluster_members]
    )
    scatter = float(norms_k.sum()) / (pv.k * norm_full)
    sigma = math.sqrt(float(norms_k.sum())) / pv.k
    # Density balls use plain Euclidean distance regardless of the active
    # metric; sigma is a feature-space magnitude, not a pair dissimilarity.
    total = 0.0
    for k1 in range(pv.k):
        for k2 in range(k1 + 1, pv.k):
            members = points[np.concatenate([cluster_members[k1], cluster_members[k2]])]
            b1, b2 = pv.barycenters[k1], pv.barycenters[k2]
            probes = np.stack([(b1 + b2) / 2.0, b1, b2])
            dists = cross_distances(probes, members, MetricSpec.euclidean())
            g_mid, g_1, g_2 = (dists <= sigma).sum(axis=1)
            denom = max(g_1, g_2)
            total += (g_mid / denom) if denom > 0 else 0.0
    return scatter + 2.0 * total / (pv.k * (pv.k - 1))


def _silhouette(pv: _PartitionView) -> float:
    pv.require_between()
    sums = pv.cluster_dist_sums
    n = pv.ds.n
    own_size = pv.sizes[pv.labels]
    with np.errstate(divide="ignore", invalid="ignore"):
        a = sums[np.arange(n), pv.labels] / (own_size - 1)
    mean_other = sums / pv.sizes[None, :]
    mean_other[np.arange(n), pv.labels] = np.inf
    b = mean_other.min(axis=1)
    denom = np.maximum(a, b)
    with np.errstate(invalid="ignore"):
        s = np.where(denom > 0, (b - a) / denom, 0.0)
    s = np.where(own_size == 1, 0.0, s)  # a(i) undefined for singletons
    per_cluster = np.bincount(pv.labels, weights=s, minlength=pv.k) / pv.sizes
    return float(per_cluster.mean())


def _tau(pv: _PartitionView) -> float:
    pc = pv.pair_counts
    denom_sq = pc.n_between * pc.n_within * (pc.n_total * (pc.n_total - 1) / 2.0)
    if denom_sq <= 0.0:
        raise UndefinedIndex("degenerate pair counts")
    return (pc.s_plus - pc.s_minus) / math.sqrt(denom_sq)


def _trace_w(pv: _PartitionView) -> float:
    return pv.pooled_wss


def _wemmert_gancarski(pv: _PartitionView) -> float:
    pv.require_between()
    n = pv.ds.n
    other = pv.center_dists.copy()
    other[np.arange(n), pv.labels] = np.inf
    nearest_other = other.min(axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.where(nearest_other > 0, pv.own_center_dist / nearest_other, np.inf)
    mean_r = np.bincount(pv.labels, weights=r, minlength=pv.k) / pv.sizes
    j = np.maximum(0.0, 1.0 - mean_r)
    return float(np.sum(pv.sizes * j) / n)


def _xie_beni(pv: _PartitionView) -> float:
    pv.require_between()
    sep = pv.min_between_pair
    if sep is None or sep == 0.0:
        raise UndefinedIndex("zero single-linkage separation")
    return pv.pooled_wss / (pv.ds.n * sep**2)


_FUNCS: dict[str, Callable[[_PartitionView], float]] = {
    "gamma": _gamma,
    "ball-hall": _ball_hall,
    "banfield-raftery": _banfield_raftery,
    "bic": _bic,
    "c-index": _c_index,
    "calinski-harabasz": _calinski_harabasz,
    "davies-bouldin": _davies_bouldin,
    "dunn": _dunn,
    "g-plus": _g_plus,
    "isolation": _isolation,
    "krzanowski-lai": _krzanowski_lai,
    "hartigan": _hartigan,
    "mcclain-rao": _mcclain_rao,
    "pbm": _pbm,
    "point-biserial": _point_biserial,
    "rmsstd": _rmsstd,
    "rs": _rs,
    "ray-turi": _ray_turi,
    "s-dbw": _s_dbw,
    "silhouette": _silhouette,
    "tau": _tau,
    "trace-w": _trace_w,
    "wemmert-gancarski": _wemmert_gancarski,
    "xie-beni": _xie_beni,
}

assert set(_FUNCS) == {row[0] for row in INDEX_TABLE}


def all_index_specs() -> list[IndexSpec]:
    """All 24 registry entries, in table order."""
    return [IndexSpec(*row) for row in INDEX_TABLE]


def _run_one(index_id: str, pv: _PartitionView) -> IndexValue:
    try:
        value = float(_FUNCS[index_id](pv))
    except UndefinedIndex as exc:
        return IndexValue(index_id, pv.k, None, exc.reason)
    except MetricDomainError as exc:
        return IndexValue(index_id, pv.k, None, str(exc))
    if not math.isfinite(value):
        return IndexValue(index_id, pv.k, None, "non-finite value")
    return IndexValue(index_id, pv.k, value)


def evaluate(
    spec: IndexSpec,
    dataset: Dataset,
    partition: Partition,
    metric: MetricSpec,
    *,
    neighbors: Optional[tuple[Optional[Partition], Optional[Partition]]] = None,
    isolation_neighbors: int = DEFAULT_ISOLATION_NEIGHBORS,
) -> IndexValue:
    """Evaluate one index on one partition.

    ``neighbors`` supplies the partitions at K-1 and K+1, which only
    Krzanowski-Lai consumes; without them it reports the undefined marker.
    """
    ds = _DatasetView(dataset, metric, isolation_neighbors)
    pv = _PartitionView(ds, partition)
    if spec.index_id == "krzanowski-lai" and neighbors is not None:
        prev_part, next_part = neighbors
        pv.kl_neighbor_wss = (
            None if prev_part is None else base_stats.pooled_wss(dataset, prev_part, metric),
            None if next_part is None else base_stats.pooled_wss(dataset, next_part, metric),
        )
    return _run_one(spec.index_id, pv)


def _make_views(
    dataset: Dataset,
    partitions: Sequence[Partition],
    metric: MetricSpec,
    isolation_neighbors: int,
) -> list[_PartitionView]:
    ks = [p.k for p in partitions]
    if any(k2 - k1 != 1 for k1, k2 in zip(ks, ks[1:])):
        raise ValueError(f"partitions must cover a contiguous ascending K range, got {ks}")
    ds = _DatasetView(dataset, metric, isolation_neighbors)
    views = [_PartitionView(ds, p) for p in partitions]
    for i, pv in enumerate(views):
        # The K-1 pooled WSS at K=2 is the total dispersion (single cluster).
        if i > 0:
            prev = views[i - 1].pooled_wss
        elif pv.k == 2:
            prev = ds.tss
        else:
            prev = None
        nxt = views[i + 1].pooled_wss if i + 1 < len(views) else None
        pv.kl_neighbor_wss = (prev, nxt)
    return views


def evaluate_curve(
    spec: IndexSpec,
    dataset: Dataset,
    partitions: Sequence[Partition],
    metric: MetricSpec,
    *,
    isolation_neighbors: int = DEFAULT_ISOLATION_NEIGHBORS,
) -> list[IndexValue]:
    """Evaluate one index across partitions over a contiguous K range."""
    views = _make_views(dataset, partitions, metric, isolation_neighbors)
    return [_run_one(spec.index_id, pv) for pv in views]


def evaluate_all(
    specs: Sequence[IndexSpec],
    dataset: Dataset,
    partitions: Sequence[Partition],
    metric: MetricSpec,
    *,
    isolation_neighbors: int = DEFAULT_ISOLATION_NEIGHBORS,
) -> dict[str, list[IndexValue]]:
    """Evaluate many indices over one K curve, sharing all cached statistics."""
    views = _make_views(dataset, partitions, metric, isolation_neighbors)
    return {
        spec.index_id: [_run_one(spec.index_id, pv) for pv in views] for spec in specs
    }
