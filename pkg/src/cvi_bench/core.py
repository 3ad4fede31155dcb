"""Shared domain types: datasets, partitions, metric and index identities.

Everything here is immutable after construction and safe to share across
threads. No I/O, no randomness.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np

__all__ = [
    "MetricKind",
    "MetricSpec",
    "OptimumType",
    "IndexClass",
    "IndexSpec",
    "INDEX_TABLE",
    "INDEX_IDS",
    "Dataset",
    "Partition",
]

# Relative consistency tolerance for stored barycenters.
_BARYCENTER_RTOL = 1e-9


class MetricKind(Enum):
    EUCLIDEAN = "euclidean"
    MINKOWSKI = "minkowski"
    COSINE = "cosine"


@dataclass(frozen=True)
class MetricSpec:
    """Identity of a distance function.

    ``p`` is the Minkowski exponent and is only meaningful for
    ``kind=MINKOWSKI``; Euclidean is exactly the ``p=2`` case. Cosine is the
    dissimilarity ``1 - cos(theta)`` in ``[0, 2]``.
    """

    kind: MetricKind = MetricKind.EUCLIDEAN
    p: float = 2.0

    def __post_init__(self) -> None:
        if not (self.p > 0):
            raise ValueError(f"Minkowski exponent must be positive, got {self.p}")

    @classmethod
    def euclidean(cls) -> "MetricSpec":
        return cls(MetricKind.EUCLIDEAN)

    @classmethod
    def minkowski(cls, p: float) -> "MetricSpec":
        return cls(MetricKind.MINKOWSKI, p=float(p))

    @classmethod
    def cosine(cls) -> "MetricSpec":
        return cls(MetricKind.COSINE)

    @classmethod
    def parse(cls, text: str) -> "MetricSpec":
        """Parse CLI syntax: ``euclidean``, ``cosine``, ``minkowski:p=0.5``."""
        name, _, arg = text.strip().partition(":")
        name = name.lower()
        if name == "euclidean":
            if arg:
                raise ValueError(f"euclidean takes no parameter: {text!r}")
            return cls.euclidean()
        if name == "cosine":
            if arg:
                raise ValueError(f"cosine takes no parameter: {text!r}")
            return cls.cosine()
        if name == "minkowski":
            if not arg.startswith("p="):
                raise ValueError(f"expected minkowski:p=<value>, got {text!r}")
            return cls.minkowski(float(arg[2:]))
        raise ValueError(f"unknown metric {text!r}")

    @property
    def label(self) -> str:
        """Canonical string form, also accepted by :meth:`parse`."""
        if self.kind is MetricKind.MINKOWSKI:
            return f"minkowski:p={self.p:g}"
        return self.kind.value


class OptimumType(Enum):
    MAX = "max"
    MIN = "min"
    KNEE = "knee"
    ELBOW = "elbow"


class IndexClass(Enum):
    W = "W"
    WB = "WB"
    WD = "WD"
    WBD = "WBD"


# The 24 supported validity indices: (id, optimum type, scale class).
INDEX_TABLE: tuple[tuple[str, OptimumType, IndexClass], ...] = (
    ("gamma", OptimumType.MAX, IndexClass.W),
    ("ball-hall", OptimumType.ELBOW, IndexClass.W),
    ("banfield-raftery", OptimumType.ELBOW, IndexClass.W),
    ("bic", OptimumType.ELBOW, IndexClass.W),
    ("c-index", OptimumType.MIN, IndexClass.WD),
    ("calinski-harabasz", OptimumType.MAX, IndexClass.WB),
    ("davies-bouldin", OptimumType.MIN, IndexClass.WB),
    ("dunn", OptimumType.MAX, IndexClass.WB),
    ("g-plus", OptimumType.MIN, IndexClass.WD),
    ("isolation", OptimumType.KNEE, IndexClass.WB),
    ("krzanowski-lai", OptimumType.MAX, IndexClass.W),
    ("hartigan", OptimumType.KNEE, IndexClass.WB),
    ("mcclain-rao", OptimumType.ELBOW, IndexClass.WB),
    ("pbm", OptimumType.MAX, IndexClass.WBD),
    ("point-biserial", OptimumType.MAX, IndexClass.WB),
    ("rmsstd", OptimumType.ELBOW, IndexClass.W),
    ("rs", OptimumType.KNEE, IndexClass.WD),
    ("ray-turi", OptimumType.ELBOW, IndexClass.WB),
    ("s-dbw", OptimumType.ELBOW, IndexClass.WB),
    ("silhouette", OptimumType.MAX, IndexClass.WB),
    ("tau", OptimumType.MAX, IndexClass.WD),
    ("trace-w", OptimumType.ELBOW, IndexClass.W),
    ("wemmert-gancarski", OptimumType.MAX, IndexClass.WB),
    ("xie-beni", OptimumType.ELBOW, IndexClass.WB),
)

INDEX_IDS: tuple[str, ...] = tuple(row[0] for row in INDEX_TABLE)

_TABLE_BY_ID = {row[0]: row for row in INDEX_TABLE}


@dataclass(frozen=True)
class IndexSpec:
    """Identity of a validity index; must match a row of :data:`INDEX_TABLE`."""

    index_id: str
    optimum_type: OptimumType
    index_class: IndexClass

    def __post_init__(self) -> None:
        row = _TABLE_BY_ID.get(self.index_id)
        if row is None:
            raise ValueError(f"unknown index id {self.index_id!r}")
        if (self.index_id, self.optimum_type, self.index_class) != row:
            raise ValueError(
                f"index triple {(self.index_id, self.optimum_type, self.index_class)} "
                f"does not match the registry row {row}"
            )

    @classmethod
    def from_id(cls, index_id: str) -> "IndexSpec":
        row = _TABLE_BY_ID.get(index_id)
        if row is None:
            raise ValueError(f"unknown index id {index_id!r}")
        return cls(*row)


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class Dataset:
    """An ``N x d`` point matrix with optional ground-truth group labels.

    ``truth_labels`` uses arbitrary integer ids; generators use ``-1`` for
    noise points that belong to no group.
    """

    points: np.ndarray
    truth_labels: Optional[np.ndarray] = None

    def __post_init__(self) -> None:
        pts = np.array(self.points, dtype=np.float64, order="C", copy=True)
        if pts.ndim != 2:
            raise ValueError(f"points must be 2-d, got shape {pts.shape}")
        n, d = pts.shape
        if n < 2:
            raise ValueError(f"need at least 2 points, got {n}")
        if d < 1:
            raise ValueError("need at least 1 feature")
        if not np.all(np.isfinite(pts)):
            raise ValueError("all coordinates must be finite")
        object.__setattr__(self, "points", _freeze(pts))
        if self.truth_labels is not None:
            labels = np.array(self.truth_labels, dtype=np.int64, copy=True)
            if labels.shape != (n,):
                raise ValueError(
                    f"truth_labels must have length {n}, got shape {labels.shape}"
                )
            object.__setattr__(self, "truth_labels", _freeze(labels))

    @property
    def n_points(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]


@dataclass(frozen=True, eq=False)
class Partition:
    """Assignment of N points into K non-empty clusters, with barycenters.

    Barycenters are stored eagerly (coordinate means of the member points)
    and every index reads them instead of recomputing; consistency is
    verified at construction to 1e-9 relative.
    """

    labels: np.ndarray
    k: int
    barycenters: np.ndarray
    cluster_sizes: np.ndarray

    def __post_init__(self) -> None:
        labels = np.array(self.labels, dtype=np.int64, copy=True)
        bary = np.array(self.barycenters, dtype=np.float64, copy=True)
        sizes = np.array(self.cluster_sizes, dtype=np.int64, copy=True)
        n = labels.shape[0]
        if labels.ndim != 1:
            raise ValueError("labels must be 1-d")
        if self.k < 1:
            raise ValueError("cluster count must be at least 1")
        if labels.min(initial=0) < 0 or labels.max(initial=-1) >= self.k:
            raise ValueError(f"labels must lie in [0, {self.k})")
        counts = np.bincount(labels, minlength=self.k)
        if np.any(counts == 0):
            raise ValueError("every cluster must be non-empty")
        if sizes.shape != (self.k,) or not np.array_equal(counts, sizes):
            raise ValueError("cluster_sizes inconsistent with labels")
        if bary.ndim != 2 or bary.shape[0] != self.k:
            raise ValueError("barycenters must be a K x d matrix")
        object.__setattr__(self, "labels", _freeze(labels))
        object.__setattr__(self, "barycenters", _freeze(bary))
        object.__setattr__(self, "cluster_sizes", _freeze(sizes))

    def verify_barycenters(self, points: np.ndarray) -> None:
        """Check stored barycenters against coordinate means of ``points``."""
        expected = _label_means(points, self.labels, self.k)
        if not np.allclose(
            self.barycenters, expected, rtol=_BARYCENTER_RTOL, atol=1e-12
        ):
            raise ValueError("barycenters do not match coordinate means")

    @classmethod
    def from_labels(cls, dataset: Dataset, labels: np.ndarray) -> "Partition":
        """Build a partition from labels alone, computing barycenters."""
        labels = np.asarray(labels, dtype=np.int64)
        if labels.shape != (dataset.n_points,):
            raise ValueError("labels must have one entry per point")
        if labels.min() < 0:
            raise ValueError("labels must be non-negative cluster ids")
        k = int(labels.max()) + 1
        bary = _label_means(dataset.points, labels, k)
        sizes = np.bincount(labels, minlength=k)
        return cls(labels=labels, k=k, barycenters=bary, cluster_sizes=sizes)

    @classmethod
    def single_cluster(cls, dataset: Dataset) -> "Partition":
        """The trivial K=1 partition (used as the K-1 neighbor at K=2)."""
        return cls.from_labels(dataset, np.zeros(dataset.n_points, dtype=np.int64))


def _label_means(points: np.ndarray, labels: np.ndarray, k: int) -> np.ndarray:
    out = np.empty((k, points.shape[1]))
    for c in range(k):
        out[c] = points[labels == c].mean(axis=0)
    return out
