"""Experiment engine: sensitivity, K selection, and the dimension sweep.

Knee- and elbow-type index curves are converted into maximization problems
by the successive-difference transform before selection and sensitivity.
Sensitivity is the height (or depth) of the curve at the true group count
relative to the nearest competing neighbor value.

Realizations are independent work units; the sweep may run them on a small
thread pool (capped by ``CVI_BENCH_THREADS``) and aggregates in realization
order, so parallelism cannot change any result.
"""
from __future__ import annotations

import dataclasses
import json
import os
import platform
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import scipy

from . import base_stats, datagen, indices as indices_mod
from .core import Dataset, IndexSpec, MetricSpec, OptimumType, Partition
from .datagen import SchemeConfig
from .indices import DEFAULT_ISOLATION_NEIGHBORS, IndexValue
from .kmeans import KMeansOptions, kmeans_sweep

__all__ = [
    "ExperimentConfig",
    "RawRecord",
    "CellStats",
    "SweepResult",
    "difference_transform",
    "select_k",
    "sensitivity",
    "adjusted_rand_index",
    "s_minus_probe",
    "run_sweep",
    "write_sweep_csv",
    "write_raw_csv",
    "write_metadata",
    "run_and_export",
    "derive_seed",
]

THREADS_ENV_VAR = "CVI_BENCH_THREADS"

# Full-protocol defaults; the CLI scales these down to desk scale.
FULL_DIMS = (5, 7, 10, 20, 35, 70, 100, 135, 180, 250, 350)


@dataclass(frozen=True)
class ExperimentConfig:
    """One sweep: a scheme template crossed with dimensions and realizations.

    ``scheme.dim`` is overridden by each entry of ``dims``. ``k_range`` is an
    inclusive (lo, hi) interval of cluster counts; the default is
    (2, k*+3) so a selection faces genuine alternatives. ``indices=None``
    means the full registry.
    """

    scheme: SchemeConfig = SchemeConfig()
    dims: tuple[int, ...] = FULL_DIMS
    realizations: int = 100
    k_range: Optional[tuple[int, int]] = None
    metrics: tuple[MetricSpec, ...] = (MetricSpec.euclidean(),)
    indices: Optional[tuple[IndexSpec, ...]] = None
    master_seed: int = 0
    kmeans_options: KMeansOptions = KMeansOptions()
    isolation_neighbors: int = DEFAULT_ISOLATION_NEIGHBORS

    def __post_init__(self) -> None:
        if any(d2 <= d1 for d1, d2 in zip(self.dims, self.dims[1:])) or not self.dims:
            raise ValueError("dims must be a non-empty strictly increasing list")
        if self.realizations < 1:
            raise ValueError("need at least one realization")
        lo, hi = self.resolved_k_range
        k = self.scheme.k_star
        if lo < 2:
            raise ValueError("K range must start at 2 or above")
        if not (lo <= k - 1 and hi >= k + 1):
            raise ValueError(f"K range [{lo}, {hi}] must contain k*-1..k*+1 around k*={k}")
        if not self.metrics:
            raise ValueError("need at least one metric")

    @property
    def resolved_k_range(self) -> tuple[int, int]:
        if self.k_range is not None:
            return self.k_range
        return (2, self.scheme.k_star + 3)

    @property
    def resolved_indices(self) -> tuple[IndexSpec, ...]:
        if self.indices is not None:
            return self.indices
        return tuple(indices_mod.all_index_specs())


@dataclass(frozen=True)
class RawRecord:
    """Per-(realization, metric, index) outcome of the sweep."""

    index_id: str
    metric_label: str
    dim: int
    realization: int
    seed: int
    selected_k: Optional[int]
    sensitivity: Optional[float]


@dataclass(frozen=True)
class CellStats:
    """Aggregate over realizations for one (index, metric, dim) cell."""

    index_id: str
    metric_label: str
    dim: int
    mean_sensitivity: Optional[float]
    relative_sensitivity: Optional[float]
    accuracy: float
    n_defined: int


@dataclass(frozen=True)
class SweepResult:
    config: ExperimentConfig
    cells: tuple[CellStats, ...]
    raw: tuple[RawRecord, ...]

    def cell(self, index_id: str, metric_label: str, dim: int) -> CellStats:
        for c in self.cells:
            if (c.index_id, c.metric_label, c.dim) == (index_id, metric_label, dim):
                return c
        raise KeyError((index_id, metric_label, dim))


def difference_transform(
    ks: Sequence[int], values: Sequence[Optional[float]]
) -> tuple[list[int], list[Optional[float]]]:
    """Successive-difference transform turning knee/elbow curves into
    maximization problems: m'(K) = |(m(K-1) - m(K)) / (m(K) - m(K+1))|.

    Endpoints are dropped; a zero denominator or an undefined input in the
    stencil yields an undefined output at that K.
    """
    if len(ks) != len(values):
        raise ValueError("ks and values must have equal length")
    if len(ks) < 3:
        raise ValueError("difference transform needs a K range of length >= 3")
    out_ks = list(ks[1:-1])
    out: list[Optional[float]] = []
    for i in range(1, len(ks) - 1):
        prev, cur, nxt = values[i - 1], values[i], values[i + 1]
        if prev is None or cur is None or nxt is None:
            out.append(None)
            continue
        denom = cur - nxt
        if denom == 0.0:
            out.append(None)
            continue
        out.append(abs((prev - cur) / denom))
    return out_ks, out


def _effective_curve(
    spec: IndexSpec, ks: Sequence[int], values: Sequence[Optional[float]]
) -> tuple[Sequence[int], Sequence[Optional[float]], OptimumType]:
    if spec.optimum_type in (OptimumType.KNEE, OptimumType.ELBOW):
        tks, tvals = difference_transform(ks, values)
        return tks, tvals, OptimumType.MAX
    return ks, values, spec.optimum_type


def select_k(
    spec: IndexSpec, ks: Sequence[int], values: Sequence[Optional[float]]
) -> Optional[int]:
    """The K preferred by an index curve: arg-optimum for Max/Min indices,
    argmax of the difference transform for knee/elbow ones. Ties break
    toward smaller K; returns None when no curve point is defined."""
    eks, evals, direction = _effective_curve(spec, ks, values)
    best_k, best_v = None, None
    for k, v in zip(eks, evals):
        if v is None:
            continue
        if best_v is None or (v > best_v if direction is OptimumType.MAX else v < best_v):
            best_k, best_v = k, v
    return best_k


def sensitivity(
    spec: IndexSpec,
    ks: Sequence[int],
    values: Sequence[Optional[float]],
    k_star: int,
) -> Optional[float]:
    """Height (or depth) of the curve at ``k_star`` against its neighbors:
    |m(k*) - opt(m(k*-1), m(k*+1))| with opt the neighbor value nearest the
    optimum (max of the neighbors for maximized curves, min for minimized).

    Knee/elbow curves are transformed first. Returns None when any stencil
    value is undefined."""
    eks, evals, direction = _effective_curve(spec, ks, values)
    by_k = dict(zip(eks, evals))
    stencil = [by_k.get(k_star - 1), by_k.get(k_star), by_k.get(k_star + 1)]
    if any(v is None for v in stencil):
        return None
    lo, mid, hi = stencil
    competitor = max(lo, hi) if direction is OptimumType.MAX else min(lo, hi)
    return abs(mid - competitor)


def adjusted_rand_index(labels_a: np.ndarray, labels_b: np.ndarray) -> float:
    """Chance-corrected agreement between two labelings, computed exactly
    (integer arithmetic), so identical partitions give exactly 1.0."""
    labels_a = np.asarray(labels_a).ravel()
    labels_b = np.asarray(labels_b).ravel()
    if labels_a.shape != labels_b.shape:
        raise ValueError("labelings must have equal length")
    n = labels_a.shape[0]
    _, ia = np.unique(labels_a, return_inverse=True)
    _, ib = np.unique(labels_b, return_inverse=True)
    table = np.zeros((ia.max() + 1, ib.max() + 1), dtype=np.int64)
    np.add.at(table, (ia, ib), 1)

    def comb2(x: int) -> int:
        return x * (x - 1) // 2

    sum_cells = sum(comb2(int(v)) for v in table.ravel() if v > 1)
    sum_rows = sum(comb2(int(v)) for v in table.sum(axis=1))
    sum_cols = sum(comb2(int(v)) for v in table.sum(axis=0))
    total = comb2(n)
    expected = Fraction(sum_rows * sum_cols, total) if total else Fraction(0)
    denom = Fraction(sum_rows + sum_cols, 2) - expected
    if denom == 0:
        return 1.0
    return float((sum_cells - expected) / denom)


def s_minus_probe(
    dataset: Dataset,
    partitions: Sequence[Partition],
    metric: MetricSpec = MetricSpec.euclidean(),
) -> tuple[int, ...]:
    """Discordant-pair counts at the partitions around k* (k*-1, k*, k*+1)."""
    if len(partitions) != 3:
        raise ValueError("expected partitions at k*-1, k*, k*+1")
    return tuple(
        base_stats.pair_counts(dataset, p, metric).s_minus for p in partitions
    )


def derive_seed(master_seed: int, dim: int, realization: int) -> int:
    """Per-realization seed: any single sweep cell is reproducible alone."""
    ss = np.random.SeedSequence([int(master_seed), int(dim), int(realization)])
    return int(ss.generate_state(1, np.uint64)[0])


def _resolve_threads() -> int:
    cap = os.environ.get(THREADS_ENV_VAR)
    avail = os.cpu_count() or 1
    if cap is None:
        return min(avail, 8)
    try:
        return max(1, min(avail, int(cap)))
    except ValueError:
        raise ValueError(f"{THREADS_ENV_VAR} must be an integer, got {cap!r}") from None


def _run_unit(cfg: ExperimentConfig, dim: int, realization: int) -> list[RawRecord]:
    seed = derive_seed(cfg.master_seed, dim, realization)
    scheme = dataclasses.replace(cfg.scheme, dim=dim)
    dataset = datagen.generate(scheme, seed)
    lo, hi = cfg.resolved_k_range
    ks = list(range(lo, hi + 1))
    partitions = kmeans_sweep(dataset, ks, seed, cfg.kmeans_options)
    k_star = cfg.scheme.k_star
    records: list[RawRecord] = []
    for metric in cfg.metrics:
        curves = indices_mod.evaluate_all(
            cfg.resolved_indices, dataset, partitions, metric,
            isolation_neighbors=cfg.isolation_neighbors,
        )
        for spec in cfg.resolved_indices:
            values = [iv.value for iv in curves[spec.index_id]]
            records.append(
                RawRecord(
                    index_id=spec.index_id,
                    metric_label=metric.label,
                    dim=dim,
                    realization=realization,
                    seed=seed,
                    selected_k=select_k(spec, ks, values),
                    sensitivity=sensitivity(spec, ks, values, k_star),
                )
            )
    return records


def run_sweep(cfg: ExperimentConfig) -> SweepResult:
    """Run the full (dim x realization) grid and aggregate.

    Fully deterministic given the config and master seed, regardless of the
    thread count: each unit depends only on its own derived seed and results
    are reduced in (dim, realization) order.
    """
    units = [(dim, r) for dim in cfg.dims for r in range(cfg.realizations)]
    threads = _resolve_threads()
    if threads > 1 and len(units) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            unit_records = list(pool.map(lambda u: _run_unit(cfg, *u), units))
    else:
        unit_records = [_run_unit(cfg, *u) for u in units]
    raw = tuple(rec for unit in unit_records for rec in unit)
    return SweepResult(config=cfg, cells=tuple(_aggregate(cfg, raw)), raw=raw)


def _aggregate(cfg: ExperimentConfig, raw: Sequence[RawRecord]) -> list[CellStats]:
    k_star = cfg.scheme.k_star
    grouped: dict[tuple[str, str, int], list[RawRecord]] = {}
    for rec in raw:
        grouped.setdefault((rec.index_id, rec.metric_label, rec.dim), []).append(rec)

    means: dict[tuple[str, str, int], Optional[float]] = {}
    for key, recs in grouped.items():
        defined = [r.sensitivity for r in recs if r.sensitivity is not None]
        means[key] = float(np.mean(defined)) if defined else None

    cells = []
    base_dim = cfg.dims[0]
    for spec in cfg.resolved_indices:
        for metric in cfg.metrics:
            for dim in cfg.dims:
                key = (spec.index_id, metric.label, dim)
                recs = grouped.get(key, [])
                mean_s = means[key]
                base_s = means[(spec.index_id, metric.label, base_dim)]
                relative = (
                    mean_s / base_s
                    if (mean_s is not None and base_s is not None and base_s > 0)
                    else None
                )
                accuracy = sum(1 for r in recs if r.selected_k == k_star) / cfg.realizations
                cells.append(
                    CellStats(
                        index_id=spec.index_id,
                        metric_label=metric.label,
                        dim=dim,
                        mean_sensitivity=mean_s,
                        relative_sensitivity=relative,
                        accuracy=accuracy,
                        n_defined=sum(1 for r in recs if r.sensitivity is not None),
                    )
                )
    return cells


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_sweep_csv(result: SweepResult, path) -> None:
    """Aggregate table; one row per (index, metric, dim) cell."""
    scheme = result.config.scheme.scheme.value
    with open(path, "w", newline="\n") as fh:
        fh.write("index,metric,scheme,dim,mean_sensitivity,relative_sensitivity,accuracy,n_defined\n")
        for c in result.cells:
            fh.write(
                ",".join(
                    [
                        c.index_id,
                        c.metric_label,
                        scheme,
                        str(c.dim),
                        _fmt(c.mean_sensitivity),
                        _fmt(c.relative_sensitivity),
                        _fmt(c.accuracy),
                        str(c.n_defined),
                    ]
                )
                + "\n"
            )


def write_raw_csv(result: SweepResult, path) -> None:
    """Per-realization table backing the aggregates."""
    scheme = result.config.scheme.scheme.value
    with open(path, "w", newline="\n") as fh:
        fh.write("index,metric,scheme,dim,realization,seed,selected_k,sensitivity\n")
        for r in result.raw:
            fh.write(
                ",".join(
                    [
                        r.index_id,
                        r.metric_label,
                        scheme,
                        str(r.dim),
                        str(r.realization),
                        str(r.seed),
                        _fmt(r.selected_k),
                        _fmt(r.sensitivity),
                    ]
                )
                + "\n"
            )


def write_metadata(result: SweepResult, path) -> None:
    """Echo of the configuration, seed rule, and library versions."""
    cfg = result.config
    meta = {
        "scheme": {
            "name": cfg.scheme.scheme.value,
            "k_star": cfg.scheme.k_star,
            "noise_fraction": cfg.scheme.noise_fraction,
            "irrelevant_fraction": cfg.scheme.irrelevant_fraction,
            "centroid_range": list(cfg.scheme.centroid_range),
            "cluster_size_mean": cfg.scheme.cluster_size_mean,
            "cluster_size_sd": cfg.scheme.cluster_size_sd,
        },
        "dims": list(cfg.dims),
        "realizations": cfg.realizations,
        "k_range": list(cfg.resolved_k_range),
        "metrics": [m.label for m in cfg.metrics],
        "indices": [s.index_id for s in cfg.resolved_indices],
        "master_seed": cfg.master_seed,
        "seed_rule": "SeedSequence([master_seed, dim, realization]) -> first uint64",
        "rng": "numpy PCG64; Gaussian draws via numpy ziggurat",
        "kmeans": {
            "restarts": cfg.kmeans_options.restarts,
            "tol": cfg.kmeans_options.tol,
            "max_iter": cfg.kmeans_options.max_iter,
            "restart_stream": "SeedSequence([seed, K, restart])",
        },
        "isolation_neighbors": cfg.isolation_neighbors,
        "versions": {
            "python": platform.python_version(),
            "numpy": np.__version__,
            "scipy": scipy.__version__,
        },
    }
    with open(path, "w", newline="\n") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")


def run_and_export(cfg: ExperimentConfig, out_dir) -> SweepResult:
    """Run a sweep and write sweep.csv, raw.csv, and metadata.json."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    result = run_sweep(cfg)
    write_sweep_csv(result, out / "sweep.csv")
    write_raw_csv(result, out / "raw.csv")
    write_metadata(result, out / "metadata.json")
    return result
