"""Distance-concentration and hubness diagnostics, plus cluster deformation.

These quantify how strongly a point cloud feels the curse of dimensionality:
the nearest/farthest distance ratio, the skewness of k-occurrence counts
(hubness), and the max-to-mean centroid-distance ratio of a single cluster.
"""
from __future__ import annotations

from typing import Union

import numpy as np
from scipy import stats

from .core import Dataset, MetricSpec
from .datagen import Scheme, SchemeConfig, generate
from .metrics import cross_distances

__all__ = [
    "concentration_ratio",
    "occurrence_counts",
    "hubness",
    "deformation_ratio",
    "reference_distribution",
    "REFERENCE_DISTRIBUTIONS",
]

# Named distributions for the concentration/hubness comparison table.
REFERENCE_DISTRIBUTIONS = ("uniform", "gaussian", "clusters:20", "clusters:50")


def concentration_ratio(
    dataset: Dataset,
    metric: MetricSpec,
    *,
    max_reference: int = 2000,
    seed: int = 0,
) -> float:
    """Mean over reference points of D_max/D_min, the distances to the
    farthest and nearest other point.

    All points act as references up to ``max_reference``; beyond that a
    seeded subsample is used. Reference points whose nearest neighbor is a
    duplicate (D_min = 0) are excluded from the mean.
    """
    n = dataset.n_points
    if n <= max_reference:
        refs = np.arange(n)
    else:
        rng = np.random.default_rng(seed)
        refs = np.sort(rng.choice(n, size=max_reference, replace=False))
    dists = cross_distances(dataset.points[refs], dataset.points, metric)
    dists[np.arange(refs.size), refs] = np.nan  # mask self-distances
    d_min = np.nanmin(dists, axis=1)
    d_max = np.nanmax(dists, axis=1)
    keep = d_min > 0
    if not np.any(keep):
        raise ValueError("every reference point has a duplicate; ratio undefined")
    return float(np.mean(d_max[keep] / d_min[keep]))


def occurrence_counts(dataset: Dataset, n: int, metric: MetricSpec) -> np.ndarray:
    """How often each point appears among the n nearest neighbors of the
    other points. Neighbor ties are broken by point index."""
    if not 1 <= n < dataset.n_points:
        raise ValueError(f"neighborhood size {n} outside [1, {dataset.n_points})")
    dists = cross_distances(dataset.points, dataset.points, metric)
    np.fill_diagonal(dists, np.inf)
    order = np.argsort(dists, axis=1, kind="stable")[:, :n]
    return np.bincount(order.ravel(), minlength=dataset.n_points)


def hubness(dataset: Dataset, n: int = 5, metric: MetricSpec = MetricSpec.euclidean()) -> float:
    """Skewness (standardized third moment) of the n-occurrence counts."""
    counts = occurrence_counts(dataset, n, metric)
    if np.all(counts == counts[0]):
        return 0.0
    return float(stats.skew(counts))


def deformation_ratio(points: Union[Dataset, np.ndarray], metric: MetricSpec) -> float:
    """Max distance from the centroid relative to the mean distance, for the
    points of a single cluster. Equals 1 exactly on a hypersphere."""
    if isinstance(points, Dataset):
        points = points.points
    points = np.asarray(points, dtype=np.float64)
    center = points.mean(axis=0)
    d = cross_distances(points, center[None, :], metric)[:, 0]
    mean = d.mean()
    if mean == 0.0:
        raise ValueError("all points coincide with the centroid; ratio undefined")
    return float(d.max() / mean)


def reference_distribution(name: str, dim: int, n_points: int = 1000, seed: int = 0) -> Dataset:
    """Build one of the named comparison distributions at a given dimension.

    ``uniform`` is U[-10,10]^d, ``gaussian`` is N(0,1)^d, and ``clusters:K``
    is the univariate Gaussian scheme with K groups sized so the total point
    count is about ``n_points``.
    """
    rng = np.random.default_rng(seed)
    if name == "uniform":
        return Dataset(rng.uniform(-10.0, 10.0, size=(n_points, dim)))
    if name == "gaussian":
        return Dataset(rng.standard_normal((n_points, dim)))
    if name.startswith("clusters:"):
        try:
            k = int(name.split(":", 1)[1])
        except ValueError:
            raise ValueError(f"bad cluster count in distribution {name!r}") from None
        if k < 2:
            raise ValueError("clustered distribution needs at least 2 groups")
        mean_size = max(2.0, n_points / k)
        cfg = SchemeConfig(
            scheme=Scheme.UNIVARIATE_GAUSSIAN,
            k_star=k,
            dim=dim,
            cluster_size_mean=mean_size,
            cluster_size_sd=max(1.0, mean_size / 20.0),
        )
        return generate(cfg, seed)
    raise ValueError(f"unknown distribution {name!r}")
