"""Tabular dataset representation, CSV ingestion and synthetic data generation.

A dataset is split by measurement type: categorical columns are stored as
dense integer codes, numerical columns as floats, and there is exactly one
integer label column. Categorical codes are assigned in first-seen order
while building a CategoryMap; values unseen by the map are encoded with the
reserved out-of-distribution code ``n_cats`` (one past the last known
category).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import LabelError, ParseError, SchemaError, SynthSpecError

KIND_CATEGORICAL = "categorical"
KIND_NUMERICAL = "numerical"
KIND_LABEL = "label"
_KINDS = (KIND_CATEGORICAL, KIND_NUMERICAL, KIND_LABEL)


@dataclass(frozen=True)
class FeatureSchema:
    """Ordered column typing plus the number of label classes."""

    columns: tuple[tuple[str, str], ...]
    n_classes: int

    def __post_init__(self):
        for name, kind in self.columns:
            if kind not in _KINDS:
                raise SchemaError(f"unknown column kind {kind!r} for column {name!r}")
        n_labels = sum(1 for _, k in self.columns if k == KIND_LABEL)
        if n_labels != 1:
            raise SchemaError(f"schema needs exactly one label column, got {n_labels}")
        n_feat = len(self.columns) - 1
        if n_feat < 1:
            raise SchemaError("schema needs at least one feature column")
        if self.n_classes < 2:
            raise SchemaError(f"n_classes must be >= 2, got {self.n_classes}")

    @property
    def categorical_names(self) -> tuple[str, ...]:
        return tuple(n for n, k in self.columns if k == KIND_CATEGORICAL)

    @property
    def numerical_names(self) -> tuple[str, ...]:
        return tuple(n for n, k in self.columns if k == KIND_NUMERICAL)

    @property
    def label_name(self) -> str:
        return next(n for n, k in self.columns if k == KIND_LABEL)


@dataclass
class CategoryMap:
    """Raw-text-to-code mapping for categorical columns, plus the label universe.

    Built from training data only. ``encode`` maps unknown raw values to the
    OOD code ``n_cats`` for that column.
    """

    mappings: tuple[dict, ...]
    label_values: tuple[str, ...]

    @property
    def n_cats(self) -> tuple[int, ...]:
        return tuple(len(m) for m in self.mappings)

    def encode(self, col: int, raw: str) -> int:
        m = self.mappings[col]
        return m.get(raw, len(m))

    def decode(self, col: int, code: int) -> str:
        m = self.mappings[col]
        if code >= len(m):
            return "__OOD__"
        for raw, c in m.items():
            if c == code:
                return raw
        raise KeyError(code)

    def encode_label(self, raw: str) -> int:
        try:
            return self.label_values.index(raw)
        except ValueError:
            raise LabelError(f"unknown label value {raw!r}") from None

    @staticmethod
    def identity(n_cats: tuple[int, ...], n_classes: int) -> "CategoryMap":
        """Map where raw values are the string form of their own codes."""
        mappings = tuple({str(c): c for c in range(n)} for n in n_cats)
        return CategoryMap(mappings, tuple(str(c) for c in range(n_classes)))


@dataclass
class Dataset:
    """Column-typed tabular data with aligned row counts."""

    schema: FeatureSchema
    categorical: np.ndarray  # (n, n_cat_cols) int64 codes
    numerical: np.ndarray  # (n, n_num_cols) float64
    labels: np.ndarray  # (n,) int64 in [0, n_classes)
    n_cats: tuple[int, ...] = field(default=())  # category arity per categorical column

    def __post_init__(self):
        n = len(self.labels)
        if self.categorical.shape[0] != n or self.numerical.shape[0] != n:
            raise SchemaError("categorical/numerical/label row counts differ")
        if n and (self.labels.min() < 0 or self.labels.max() >= self.schema.n_classes):
            raise LabelError("label outside [0, n_classes)")

    @property
    def n_rows(self) -> int:
        return len(self.labels)

    def subset(self, indices) -> "Dataset":
        idx = np.asarray(indices, dtype=np.int64)
        return Dataset(
            self.schema,
            self.categorical[idx],
            self.numerical[idx],
            self.labels[idx],
            self.n_cats,
        )


def load_csv(path, schema: FeatureSchema, category_map: CategoryMap | None = None):
    """Read a comma-separated file against a schema.

    Returns (Dataset, CategoryMap). If no map is supplied, one is built from
    the file (first-seen categorical codes, labels sorted by raw value); if
    one is supplied, unseen categorical values get the OOD code and unseen
    labels are an error.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path}: empty file") from None
        names = [n for n, _ in schema.columns]
        if set(header) != set(names):
            missing = set(names) - set(header)
            extra = set(header) - set(names)
            raise SchemaError(
                f"{path}: header mismatch (missing {sorted(missing)}, extra {sorted(extra)})"
            )
        col_of = {name: header.index(name) for name in names}
        cat_names = schema.categorical_names
        num_names = schema.numerical_names
        raw_cat: list[list[str]] = []
        num_rows: list[list[float]] = []
        raw_labels: list[str] = []
        for i, row in enumerate(reader):
            if len(row) != len(header):
                raise ParseError(f"{path}: row {i} has {len(row)} fields, expected {len(header)}")
            raw_cat.append([row[col_of[n]] for n in cat_names])
            vals = []
            for n in num_names:
                cell = row[col_of[n]]
                try:
                    vals.append(float(cell))
                except ValueError:
                    raise ParseError(
                        f"{path}: row {i}, column {n!r}: not numeric: {cell!r}"
                    ) from None
            num_rows.append(vals)
            raw_labels.append(row[col_of[schema.label_name]])

    if category_map is None:
        mappings = []
        for j in range(len(cat_names)):
            m: dict = {}
            for r in raw_cat:
                if r[j] not in m:
                    m[r[j]] = len(m)
            mappings.append(m)
        label_values = tuple(sorted(set(raw_labels)))
        if len(label_values) > schema.n_classes:
            raise LabelError(
                f"{path}: {len(label_values)} distinct labels exceed n_classes={schema.n_classes}"
            )
        category_map = CategoryMap(tuple(mappings), label_values)

    n = len(raw_labels)
    cat = np.zeros((n, len(cat_names)), dtype=np.int64)
    for i, r in enumerate(raw_cat):
        for j, raw in enumerate(r):
            cat[i, j] = category_map.encode(j, raw)
    num = np.array(num_rows, dtype=np.float64).reshape(n, len(num_names))
    labels = np.array([category_map.encode_label(r) for r in raw_labels], dtype=np.int64)
    ds = Dataset(schema, cat, num, labels, category_map.n_cats)
    return ds, category_map


def write_csv(dataset: Dataset, path, category_map: CategoryMap | None = None) -> None:
    """Write a dataset back to CSV (inverse of load_csv given the same map)."""
    schema = dataset.schema
    cat_names = schema.categorical_names
    num_names = schema.numerical_names
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(cat_names) + list(num_names) + [schema.label_name])
        for i in range(dataset.n_rows):
            row = []
            for j in range(len(cat_names)):
                code = int(dataset.categorical[i, j])
                row.append(category_map.decode(j, code) if category_map else str(code))
            for j in range(len(num_names)):
                row.append(repr(float(dataset.numerical[i, j])))
            lab = int(dataset.labels[i])
            row.append(category_map.label_values[lab] if category_map else str(lab))
            writer.writerow(row)


@dataclass(frozen=True)
class SynthSpec:
    """Synthetic generator settings with a per-node quality gradient.

    ``node_noise`` is a side channel: the generated dataset itself is clean;
    the experiment runner degrades node-local training copies with
    ``degrade_copy`` using these levels (label flips + feature noise).
    """

    n_rows: int
    n_classes: int
    n_categorical: int
    n_numerical: int
    node_noise: tuple[float, ...]
    n_categories: int = 4
    class_sep: float = 3.0
    name: str = "synthetic"

    def __post_init__(self):
        if self.n_rows < 1:
            raise SynthSpecError("n_rows must be positive")
        if self.n_classes < 2:
            raise SynthSpecError("n_classes must be >= 2")
        if self.n_categorical < 0 or self.n_numerical < 0:
            raise SynthSpecError("negative feature counts")
        if self.n_categorical + self.n_numerical < 1:
            raise SynthSpecError("need at least one feature column")
        if self.n_categorical and self.n_categories < 2:
            raise SynthSpecError("n_categories must be >= 2")
        for nz in self.node_noise:
            if not 0.0 <= nz < 1.0:
                raise SynthSpecError(f"noise level {nz} outside [0, 1)")

    def schema(self) -> FeatureSchema:
        cols = [(f"cat{j}", KIND_CATEGORICAL) for j in range(self.n_categorical)]
        cols += [(f"num{j}", KIND_NUMERICAL) for j in range(self.n_numerical)]
        cols.append(("label", KIND_LABEL))
        return FeatureSchema(tuple(cols), self.n_classes)


def synth_generate(spec: SynthSpec, seed: int) -> Dataset:
    """Class-conditional Gaussian + multinomial data, deterministic in (spec, seed)."""
    rng = np.random.default_rng(seed)
    n, c = spec.n_rows, spec.n_classes

    labels = np.arange(n, dtype=np.int64) % c  # balanced by construction
    rng.shuffle(labels)

    num = np.empty((n, spec.n_numerical), dtype=np.float64)
    for j in range(spec.n_numerical):
        means = spec.class_sep * np.arange(c, dtype=np.float64)
        num[:, j] = rng.normal(loc=means[labels], scale=1.0)

    cat = np.empty((n, spec.n_categorical), dtype=np.int64)
    m = spec.n_categories
    for j in range(spec.n_categorical):
        for cls in range(c):
            mask = labels == cls
            probs = np.full(m, 0.45 / (m - 1))
            probs[(cls + j) % m] = 0.55
            cat[mask, j] = rng.choice(m, size=int(mask.sum()), p=probs)

    return Dataset(spec.schema(), cat, num, labels, (m,) * spec.n_categorical)


def degrade_copy(dataset: Dataset, noise: float, seed: int) -> Dataset:
    """Node-local quality degradation: label flips w.p. noise, feature noise
    at ``noise`` times the per-column std. noise=0 returns an identical copy."""
    if noise <= 0.0:
        return dataset.subset(np.arange(dataset.n_rows))
    rng = np.random.default_rng(seed)
    labels = dataset.labels.copy()
    n_classes = dataset.schema.n_classes
    flip = rng.random(dataset.n_rows) < noise
    if flip.any():
        # flip to a uniformly random *other* class
        shift = rng.integers(1, n_classes, size=int(flip.sum()))
        labels[flip] = (labels[flip] + shift) % n_classes
    num = dataset.numerical.copy()
    if num.shape[1]:
        std = num.std(axis=0)
        std[std == 0.0] = 1.0
        num += rng.normal(0.0, noise * std, size=num.shape)
    return Dataset(dataset.schema, dataset.categorical.copy(), num, labels, dataset.n_cats)
