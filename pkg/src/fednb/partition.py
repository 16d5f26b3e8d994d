"""Stratified splitting, Dirichlet Non-IID partitioning, JSD heterogeneity."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Dataset
from .errors import MetricError, PartitionError, StratificationError


@dataclass(frozen=True)
class SplitConfig:
    train_frac: float
    val_frac: float
    test_frac: float
    seed: int

    def __post_init__(self):
        fracs = (self.train_frac, self.val_frac, self.test_frac)
        if any(f <= 0 for f in fracs):
            raise ValueError("split fractions must be positive")
        if abs(sum(fracs) - 1.0) > 1e-9:
            raise ValueError(f"split fractions sum to {sum(fracs)}, not 1")


def largest_remainder(total: int, proportions) -> np.ndarray:
    """Apportion `total` into integer counts proportional to `proportions`.

    Floors first, then hands remaining units to the largest fractional
    parts (ties broken by lower index, for determinism).
    """
    p = np.asarray(proportions, dtype=np.float64)
    exact = p / p.sum() * total
    counts = np.floor(exact).astype(np.int64)
    short = total - int(counts.sum())
    if short > 0:
        frac = exact - counts
        order = np.lexsort((np.arange(len(p)), -frac))
        counts[order[:short]] += 1
    return counts


def stratified_split(dataset: Dataset, config: SplitConfig):
    """Per-class proportional train/val/test split, deterministic in seed."""
    rng = np.random.default_rng(config.seed)
    fracs = (config.train_frac, config.val_frac, config.test_frac)
    parts: list[list[np.ndarray]] = [[], [], []]
    for cls in range(dataset.schema.n_classes):
        idx = np.flatnonzero(dataset.labels == cls)
        if 0 < len(idx) < 3:
            raise StratificationError(f"class {cls} has only {len(idx)} samples")
        rng.shuffle(idx)
        counts = largest_remainder(len(idx), fracs)
        start = 0
        for s in range(3):
            parts[s].append(idx[start : start + counts[s]])
            start += counts[s]
    splits = tuple(np.concatenate(p) if p else np.array([], dtype=np.int64) for p in parts)
    return tuple(dataset.subset(s) for s in splits)


@dataclass
class Partition:
    """Disjoint per-node row-index lists covering the full index set."""

    node_indices: list[np.ndarray]
    alpha: float

    @property
    def k(self) -> int:
        return len(self.node_indices)

    def sizes(self) -> list[int]:
        return [len(ix) for ix in self.node_indices]

    def class_counts(self, labels: np.ndarray, n_classes: int) -> np.ndarray:
        out = np.zeros((self.k, n_classes), dtype=np.int64)
        for i, ix in enumerate(self.node_indices):
            out[i] = np.bincount(labels[ix], minlength=n_classes)
        return out


def dirichlet_partition(labels, k: int, alpha: float, seed: int) -> Partition:
    """Per-class Dirichlet(alpha) proportions, integerized by largest remainder.

    Retries with fresh sub-seeds (up to 100) if any node comes out empty.
    """
    if k < 1:
        raise PartitionError("k must be >= 1")
    if alpha <= 0:
        raise PartitionError("alpha must be positive")
    labels = np.asarray(labels, dtype=np.int64)
    n = len(labels)
    if k == 1:
        return Partition([np.arange(n, dtype=np.int64)], alpha)
    classes = np.unique(labels)
    for attempt in range(100):
        rng = np.random.default_rng(np.random.SeedSequence([int(seed) & 0xFFFFFFFF, attempt]))
        node_lists: list[list[np.ndarray]] = [[] for _ in range(k)]
        for cls in classes:
            idx = np.flatnonzero(labels == cls)
            rng.shuffle(idx)
            p = rng.dirichlet(np.full(k, alpha))
            counts = largest_remainder(len(idx), p)
            start = 0
            for node in range(k):
                node_lists[node].append(idx[start : start + counts[node]])
                start += counts[node]
        node_indices = [
            np.concatenate(chunks) if chunks else np.array([], dtype=np.int64)
            for chunks in node_lists
        ]
        if all(len(ix) > 0 for ix in node_indices):
            return Partition(node_indices, alpha)
    raise PartitionError(f"empty node persisted across 100 retries (alpha={alpha}, k={k})")


def _entropy2(p: np.ndarray) -> float:
    nz = p[p > 0]
    return float(-(nz * np.log2(nz)).sum())


def jsd_heterogeneity(per_node_class_counts) -> float:
    """Generalized Jensen-Shannon divergence of per-node class distributions.

    Equal node weights, base-2 entropy, normalized by log2(K) into [0, 1].
    """
    counts = np.asarray(per_node_class_counts, dtype=np.float64)
    if counts.ndim != 2 or counts.shape[0] < 2:
        raise MetricError("need a K x n_classes count matrix with K >= 2")
    totals = counts.sum(axis=1)
    if (totals == 0).any():
        raise MetricError("empty node: class distribution undefined")
    dists = counts / totals[:, None]
    mixture = dists.mean(axis=0)
    jsd = _entropy2(mixture) - float(np.mean([_entropy2(d) for d in dists]))
    jsd /= np.log2(counts.shape[0])
    return float(min(max(jsd, 0.0), 1.0))
