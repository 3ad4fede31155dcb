"""Seeded generators for the synthetic clustered-data schemes.

All randomness flows through ``numpy.random.Generator`` (PCG64) seeded from
the caller's integer seed; Gaussian draws use numpy's ziggurat transform of
that stream. Draw order is fixed (group sizes, then centroids, then one
cluster at a time), so a given (config, seed) pair is bit-reproducible.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np

from .core import Dataset

__all__ = ["Scheme", "SchemeConfig", "GenerationDetails", "NOISE_LABEL",
           "generate", "generate_detailed", "to_csv"]

# Truth label assigned to uniform noise points; never a ground-truth group.
NOISE_LABEL = -1

_SIZE_REDRAWS = 100


class Scheme(Enum):
    UNIVARIATE_GAUSSIAN = "univariate-gaussian"
    MULTIVARIATE_GAUSSIAN = "multivariate-gaussian"
    UNIFORM_NOISE = "uniform-noise"
    IRRELEVANT_FEATURES = "irrelevant-features"


@dataclass(frozen=True)
class SchemeConfig:
    """Parameters of one synthetic data scheme.

    ``noise_fraction`` applies to the uniform-noise scheme only and
    ``irrelevant_fraction`` to the irrelevant-features scheme only; both are
    fractions in [0, 1). Group sizes are drawn from
    Normal(cluster_size_mean, cluster_size_sd), rounded, minimum 2.
    """

    scheme: Scheme = Scheme.UNIVARIATE_GAUSSIAN
    k_star: int = 5
    dim: int = 10
    noise_fraction: float = 0.0
    irrelevant_fraction: float = 0.0
    centroid_range: tuple[float, float] = (-10.0, 10.0)
    cluster_size_mean: float = 200.0
    cluster_size_sd: float = 10.0

    def __post_init__(self) -> None:
        if self.k_star < 2:
            raise ValueError("need at least two groups")
        if self.dim < 1:
            raise ValueError("need at least one feature")
        if not 0.0 <= self.noise_fraction < 1.0:
            raise ValueError("noise_fraction must lie in [0, 1)")
        if not 0.0 <= self.irrelevant_fraction < 1.0:
            raise ValueError("irrelevant_fraction must lie in [0, 1)")
        lo, hi = self.centroid_range
        if not lo < hi:
            raise ValueError("centroid_range must be a non-empty interval")


@dataclass(frozen=True)
class GenerationDetails:
    """What the generator actually drew; useful for statistical tests."""

    centroids: np.ndarray
    sizes: np.ndarray
    cluster_sds: Optional[np.ndarray]
    irrelevant_features: Optional[tuple[np.ndarray, ...]]
    n_noise: int


def _draw_sizes(cfg: SchemeConfig, rng: np.random.Generator) -> np.ndarray:
    sizes = np.empty(cfg.k_star, dtype=np.int64)
    for g in range(cfg.k_star):
        for _ in range(_SIZE_REDRAWS):
            size = int(np.rint(rng.normal(cfg.cluster_size_mean, cfg.cluster_size_sd)))
            if size >= 2:
                sizes[g] = size
                break
        else:
            raise ValueError("could not draw a group size of at least 2")
    return sizes


def generate_detailed(cfg: SchemeConfig, seed: int) -> tuple[Dataset, GenerationDetails]:
    """Generate a dataset plus the latent quantities that produced it."""
    rng = np.random.default_rng(seed)
    lo, hi = cfg.centroid_range
    sizes = _draw_sizes(cfg, rng)
    centroids = rng.uniform(lo, hi, size=(cfg.k_star, cfg.dim))

    blocks: list[np.ndarray] = []
    labels: list[np.ndarray] = []
    cluster_sds = None
    irrelevant: Optional[list[np.ndarray]] = None

    if cfg.scheme is Scheme.MULTIVARIATE_GAUSSIAN:
        cluster_sds = np.empty((cfg.k_star, cfg.dim))
    if cfg.scheme is Scheme.IRRELEVANT_FEATURES:
        irrelevant = []

    for g in range(cfg.k_star):
        n_g = int(sizes[g])
        if cfg.scheme is Scheme.MULTIVARIATE_GAUSSIAN:
            sds = rng.uniform(0.5, 1.5, size=cfg.dim)
            cluster_sds[g] = sds
            block = centroids[g] + rng.standard_normal((n_g, cfg.dim)) * sds
        else:
            block = centroids[g] + rng.standard_normal((n_g, cfg.dim))
        if cfg.scheme is Scheme.IRRELEVANT_FEATURES:
            n_irr = math.ceil(cfg.irrelevant_fraction * cfg.dim)
            feats = np.sort(rng.choice(cfg.dim, size=n_irr, replace=False))
            irrelevant.append(feats)
            if n_irr:
                block[:, feats] = rng.uniform(lo, hi, size=(n_g, n_irr))
        blocks.append(block)
        labels.append(np.full(n_g, g, dtype=np.int64))

    n_noise = 0
    if cfg.scheme is Scheme.UNIFORM_NOISE and cfg.noise_fraction > 0:
        n_noise = math.ceil(cfg.noise_fraction * int(sizes.sum()))
        blocks.append(rng.uniform(lo, hi, size=(n_noise, cfg.dim)))
        labels.append(np.full(n_noise, NOISE_LABEL, dtype=np.int64))

    dataset = Dataset(np.vstack(blocks), np.concatenate(labels))
    details = GenerationDetails(
        centroids=centroids,
        sizes=sizes,
        cluster_sds=cluster_sds,
        irrelevant_features=None if irrelevant is None else tuple(irrelevant),
        n_noise=n_noise,
    )
    return dataset, details


def generate(cfg: SchemeConfig, seed: int) -> Dataset:
    """Generate one realization of the scheme; deterministic given ``seed``."""
    return generate_detailed(cfg, seed)[0]


def to_csv(dataset: Dataset, path) -> None:
    """Write a headered CSV with columns f0..f{d-1} and, when present, label."""
    with open(path, "w", newline="\n") as fh:
        header = [f"f{j}" for j in range(dataset.dim)]
        if dataset.truth_labels is not None:
            header.append("label")
        fh.write(",".join(header) + "\n")
        for i in range(dataset.n_points):
            row = [repr(float(v)) for v in dataset.points[i]]
            if dataset.truth_labels is not None:
                row.append(str(int(dataset.truth_labels[i])))
            fh.write(",".join(row) + "\n")
