"""Per-node hybrid Naive Bayes classifier.

Categorical features get Laplace-smoothed per-class tables with a reserved
out-of-distribution slot at index n_cats; numerical features get per-class
Gaussians on standardized values. The joint per-class score is

    log_prior(c) + sum_j log P_cat(code_j | c) + sum_j log N(z_j; mean, var)

i.e. the two sub-model joint scores with the class prior counted once.
Classes absent from a node's training data score the explicit -inf sentinel.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .data import Dataset
from .errors import FitError, ShapeError

NEG_INF = float("-inf")
_LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass
class ScalerParams:
    """Per-column standardization; zero-spread columns use scale 1."""

    mean: np.ndarray
    scale: np.ndarray

    def transform(self, x: np.ndarray) -> np.ndarray:
        return (x - self.mean) / self.scale

    def inverse(self, z: np.ndarray) -> np.ndarray:
        return z * self.scale + self.mean


@dataclass
class HybridModel:
    scaler: ScalerParams
    cat_log_prob: list[np.ndarray]  # per cat column: (n_classes, n_cats+1)
    gauss_mean: np.ndarray  # (n_classes, n_num)
    gauss_var: np.ndarray  # (n_classes, n_num)
    log_prior: np.ndarray  # (n_classes,), -inf for absent classes
    classes_present: frozenset
    n_train: int
    n_classes: int
    n_cats: tuple[int, ...]
    smoothing: float = 1.0


def fit_hybrid(train: Dataset, smoothing: float = 1.0) -> HybridModel:
    if train.n_rows == 0:
        raise FitError("cannot fit on an empty dataset")
    n_classes = train.schema.n_classes
    n_cats = train.n_cats
    if len(n_cats) != train.categorical.shape[1]:
        raise FitError("dataset is missing category arities (n_cats)")

    class_counts = np.bincount(train.labels, minlength=n_classes)
    present = frozenset(int(c) for c in np.flatnonzero(class_counts))
    log_prior = np.full(n_classes, NEG_INF)
    for c in present:
        log_prior[c] = np.log(class_counts[c] / train.n_rows)

    num = train.numerical
    mean = num.mean(axis=0) if num.shape[1] else np.zeros(0)
    std = num.std(axis=0) if num.shape[1] else np.zeros(0)
    scale = np.where(std > 0, std, 1.0)
    scaler = ScalerParams(mean, scale)
    z = scaler.transform(num) if num.shape[1] else num

    cat_log_prob = []
    for j, m in enumerate(n_cats):
        table = np.full((n_classes, m + 1), 1.0 / (m + 1))
        for c in present:
            cnt = np.bincount(train.categorical[train.labels == c, j], minlength=m + 1)
            probs = (cnt + smoothing) / (class_counts[c] + smoothing * (m + 1))
            table[c] = probs
        cat_log_prob.append(np.log(table))

    n_num = num.shape[1]
    gauss_mean = np.zeros((n_classes, n_num))
    gauss_var = np.ones((n_classes, n_num))
    if n_num:
        col_var = z.var(axis=0)
        floor = 1e-9 * np.maximum(col_var, 1.0)
        for c in present:
            zc = z[train.labels == c]
            gauss_mean[c] = zc.mean(axis=0)
            gauss_var[c] = zc.var(axis=0) + floor

    return HybridModel(
        scaler=scaler,
        cat_log_prob=cat_log_prob,
        gauss_mean=gauss_mean,
        gauss_var=gauss_var,
        log_prior=log_prior,
        classes_present=present,
        n_train=train.n_rows,
        n_classes=n_classes,
        n_cats=n_cats,
        smoothing=smoothing,
    )


def joint_log_scores_batch(model: HybridModel, data: Dataset) -> np.ndarray:
    """(n_rows, n_classes) joint log-scores; absent classes are -inf columns."""
    cat, num = data.categorical, data.numerical
    return _scores(model, cat, num)


def joint_log_scores(model: HybridModel, cat_codes, num_values) -> np.ndarray:
    """Per-class joint log-score vector for one encoded sample."""
    cat = np.asarray(cat_codes, dtype=np.int64).reshape(1, -1)
    num = np.asarray(num_values, dtype=np.float64).reshape(1, -1)
    return _scores(model, cat, num)[0]


def _scores(model: HybridModel, cat: np.ndarray, num: np.ndarray) -> np.ndarray:
    if cat.shape[1] != len(model.n_cats):
        raise ShapeError(f"expected {len(model.n_cats)} categorical columns, got {cat.shape[1]}")
    if num.shape[1] != model.gauss_mean.shape[1]:
        raise ShapeError(
            f"expected {model.gauss_mean.shape[1]} numerical columns, got {num.shape[1]}"
        )
    n = cat.shape[0]
    scores = np.tile(model.log_prior, (n, 1))
    for j, m in enumerate(model.n_cats):
        codes = cat[:, j]
        if codes.min(initial=0) < 0 or codes.max(initial=0) > m:
            raise ShapeError(f"categorical column {j}: code outside [0, {m}]")
        scores = scores + model.cat_log_prob[j][:, codes].T
    if num.shape[1]:
        z = model.scaler.transform(num)
        diff = z[:, None, :] - model.gauss_mean[None, :, :]
        ll = -0.5 * (_LOG_2PI + np.log(model.gauss_var) + diff**2 / model.gauss_var)
        scores = scores + ll.sum(axis=2)
    absent = [c for c in range(model.n_classes) if c not in model.classes_present]
    if absent:
        scores[:, absent] = NEG_INF
    return scores


def predict_local(model: HybridModel, data: Dataset) -> np.ndarray:
    """Argmax class per row; ties go to the smallest class index."""
    return np.argmax(joint_log_scores_batch(model, data), axis=1)


def model_to_dict(model: HybridModel) -> dict:
    return {
        "scaler_mean": model.scaler.mean.tolist(),
        "scaler_scale": model.scaler.scale.tolist(),
        "cat_log_prob": [t.tolist() for t in model.cat_log_prob],
        "gauss_mean": model.gauss_mean.tolist(),
        "gauss_var": model.gauss_var.tolist(),
        "log_prior": ["-inf" if not np.isfinite(v) else v for v in model.log_prior],
        "classes_present": sorted(model.classes_present),
        "n_train": model.n_train,
        "n_classes": model.n_classes,
        "n_cats": list(model.n_cats),
        "smoothing": model.smoothing,
    }


def model_from_dict(d: dict) -> HybridModel:
    log_prior = np.array([NEG_INF if v == "-inf" else float(v) for v in d["log_prior"]])
    return HybridModel(
        scaler=ScalerParams(np.array(d["scaler_mean"]), np.array(d["scaler_scale"])),
        cat_log_prob=[np.array(t) for t in d["cat_log_prob"]],
        gauss_mean=np.array(d["gauss_mean"]),
        gauss_var=np.array(d["gauss_var"]),
        log_prior=log_prior,
        classes_present=frozenset(d["classes_present"]),
        n_train=int(d["n_train"]),
        n_classes=int(d["n_classes"]),
        n_cats=tuple(d["n_cats"]),
        smoothing=float(d["smoothing"]),
    )


def save_model(model: HybridModel, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model_to_dict(model), fh)


def load_model(path) -> HybridModel:
    with open(path, encoding="utf-8") as fh:
        return model_from_dict(json.load(fh))
