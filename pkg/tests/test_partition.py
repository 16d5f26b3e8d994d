import numpy as np
import pytest

from fednb.data import SynthSpec, synth_generate
from fednb.errors import MetricError, PartitionError, StratificationError
from fednb.partition import (
    SplitConfig,
    dirichlet_partition,
    jsd_heterogeneity,
    largest_remainder,
    stratified_split,
)


def _balanced_dataset(n=100, n_classes=2, seed=0):
    return synth_generate(SynthSpec(n, n_classes, 1, 1, (0.0,)), seed)


def test_split_sizes_exact_divisibility():
    ds = _balanced_dataset(100)
    train, val, test = stratified_split(ds, SplitConfig(0.6, 0.2, 0.2, seed=5))
    assert (train.n_rows, val.n_rows, test.n_rows) == (60, 20, 20)
    for part in (train, val, test):
        counts = np.bincount(part.labels, minlength=2)
        assert counts[0] == counts[1]


def test_split_deterministic():
    ds = _balanced_dataset(100)
    a = stratified_split(ds, SplitConfig(0.6, 0.2, 0.2, seed=5))
    b = stratified_split(ds, SplitConfig(0.6, 0.2, 0.2, seed=5))
    for x, y in zip(a, b):
        assert np.array_equal(x.labels, y.labels)
        assert np.array_equal(x.numerical, y.numerical)


def test_split_small_class_error():
    ds = _balanced_dataset(100)
    ds.labels[:] = 0
    ds.labels[:2] = 1
    with pytest.raises(StratificationError):
        stratified_split(ds, SplitConfig(0.6, 0.2, 0.2, seed=5))


def test_split_config_validation():
    with pytest.raises(ValueError):
        SplitConfig(0.5, 0.2, 0.2, seed=0)
    with pytest.raises(ValueError):
        SplitConfig(0.8, 0.2, -0.0, seed=0)


def test_largest_remainder_conserves_total():
    rng = np.random.default_rng(2)
    for _ in range(100):
        p = rng.dirichlet(np.ones(4))
        total = int(rng.integers(1, 500))
        counts = largest_remainder(total, p)
        assert counts.sum() == total
        assert (counts >= 0).all()


def test_partition_single_node():
    labels = np.array([0, 1, 0, 1, 1])
    part = dirichlet_partition(labels, 1, 0.05, seed=3)
    assert part.k == 1
    assert sorted(part.node_indices[0].tolist()) == [0, 1, 2, 3, 4]


def test_partition_conserves_label_multiset():
    labels = np.random.default_rng(4).integers(0, 3, size=500)
    part = dirichlet_partition(labels, 3, 0.2, seed=9)
    merged = np.concatenate(part.node_indices)
    assert sorted(merged.tolist()) == list(range(500))
    pooled = np.sort(np.concatenate([labels[ix] for ix in part.node_indices]))
    assert np.array_equal(pooled, np.sort(labels))


def test_partition_deterministic():
    labels = np.random.default_rng(4).integers(0, 2, size=300)
    a = dirichlet_partition(labels, 3, 0.1, seed=7)
    b = dirichlet_partition(labels, 3, 0.1, seed=7)
    for x, y in zip(a.node_indices, b.node_indices):
        assert np.array_equal(x, y)


def test_partition_bad_args():
    labels = np.array([0, 1])
    with pytest.raises(PartitionError):
        dirichlet_partition(labels, 0, 0.1, seed=1)
    with pytest.raises(PartitionError):
        dirichlet_partition(labels, 2, -1.0, seed=1)


def test_low_alpha_more_heterogeneous():
    labels = np.concatenate([np.zeros(5000, dtype=int), np.ones(5000, dtype=int)])
    means = {}
    for alpha in (0.05, 1.0):
        vals = []
        for seed in range(20):
            part = dirichlet_partition(labels, 3, alpha, seed=seed)
            counts = part.class_counts(labels, 2)
            vals.append(jsd_heterogeneity(counts))
        means[alpha] = np.mean(vals)
    assert means[0.05] > means[1.0]


def test_jsd_identical_distributions():
    counts = np.array([[50, 50], [20, 20], [5, 5]])
    assert jsd_heterogeneity(counts) == pytest.approx(0.0, abs=1e-12)


def test_jsd_disjoint_three_nodes():
    counts = np.eye(3, dtype=int) * 10
    assert jsd_heterogeneity(counts) == pytest.approx(1.0, abs=1e-12)


def test_jsd_two_point_maximum():
    counts = np.array([[10, 0], [0, 10]])
    assert jsd_heterogeneity(counts) == pytest.approx(1.0, abs=1e-12)


def test_jsd_permutation_symmetric():
    counts = np.array([[30, 10, 5], [2, 40, 8], [7, 7, 7]])
    base = jsd_heterogeneity(counts)
    rng = np.random.default_rng(0)
    for _ in range(10):
        perm = rng.permutation(3)
        assert jsd_heterogeneity(counts[perm]) == pytest.approx(base, abs=1e-12)


def test_jsd_empty_node_error():
    with pytest.raises(MetricError):
        jsd_heterogeneity(np.array([[0, 0], [5, 5]]))
