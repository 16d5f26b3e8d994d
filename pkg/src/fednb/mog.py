"""Mixture-of-Gaussians server: weighted combination of local joint scores.

The server never averages model parameters. Per class, it evaluates

    logsumexp_k( log w_k + joint_log_scores_k(row)[c] )

with max-subtraction for stability. Nodes lacking a class contribute the
-inf sentinel and thus drop out of the sum without weight renormalization;
a class absent from every node stays at the sentinel. ANLL clamps sentinel
contributions at a fixed 50-nat penalty so the optimizer objective remains
finite under extreme partitions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Dataset
from .errors import EnsembleError, MetricError, NormalizationError
from .local_model import NEG_INF, HybridModel, joint_log_scores_batch

SENTINEL_ANLL_PENALTY = 50.0  # nats charged when the true class exists in no node


def check_weights(w, k: int, floor: float | None = None) -> np.ndarray:
    w = np.asarray(w, dtype=np.float64)
    if w.shape != (k,):
        raise EnsembleError(f"weight vector has shape {w.shape}, expected ({k},)")
    if (w < 0).any():
        raise EnsembleError("negative weight")
    if abs(w.sum() - 1.0) > 1e-9:
        raise EnsembleError(f"weights sum to {w.sum()}, not 1")
    if floor is not None and (w < floor - 1e-12).any():
        raise EnsembleError(f"weight below floor {floor}")
    return w


@dataclass
class MoGEnsemble:
    models: list[HybridModel]
    weights: np.ndarray

    def __post_init__(self):
        if not self.models:
            raise EnsembleError("ensemble needs at least one model")
        first = self.models[0]
        for m in self.models[1:]:
            if m.n_classes != first.n_classes or m.n_cats != first.n_cats:
                raise EnsembleError("models disagree on schema or class universe")
        self.weights = check_weights(self.weights, len(self.models))

    @property
    def k(self) -> int:
        return len(self.models)


def stack_scores(models, data: Dataset) -> np.ndarray:
    """(K, n_rows, n_classes) joint log-score tensor, one slice per node."""
    return np.stack([joint_log_scores_batch(m, data) for m in models])


def mix_scores(weights: np.ndarray, stacked: np.ndarray) -> np.ndarray:
    """logsumexp over nodes of (log w_k + score_k), sentinel-safe."""
    with np.errstate(divide="ignore"):
        logw = np.log(np.asarray(weights, dtype=np.float64))
    a = logw[:, None, None] + stacked
    m = a.max(axis=0)
    out = np.full(m.shape, NEG_INF)
    finite = np.isfinite(m)
    if finite.any():
        shifted = np.exp(np.where(finite[None], a - np.where(finite, m, 0.0)[None], NEG_INF))
        out[finite] = m[finite] + np.log(shifted.sum(axis=0)[finite])
    return out


def mog_log_scores_batch(ensemble: MoGEnsemble, data: Dataset) -> np.ndarray:
    return mix_scores(ensemble.weights, stack_scores(ensemble.models, data))


def mog_log_scores(ensemble: MoGEnsemble, cat_codes, num_values) -> np.ndarray:
    """Per-class mixture log-scores for a single encoded sample."""
    cat = np.asarray(cat_codes, dtype=np.int64).reshape(1, -1)
    num = np.asarray(num_values, dtype=np.float64).reshape(1, -1)
    one = _single_row_dataset(ensemble.models[0], cat, num)
    return mog_log_scores_batch(ensemble, one)[0]


def _single_row_dataset(model: HybridModel, cat, num) -> Dataset:
    # schema-free wrapper: scoring only touches the arrays and n_cats
    ds = Dataset.__new__(Dataset)
    ds.categorical = cat
    ds.numerical = num
    ds.labels = np.zeros(1, dtype=np.int64)
    ds.n_cats = model.n_cats
    ds.schema = None
    return ds


def log_softmax(v: np.ndarray) -> np.ndarray:
    """Row-wise v - logsumexp(v); -inf sentinels pass through unchanged."""
    v = np.asarray(v, dtype=np.float64)
    single = v.ndim == 1
    a = v.reshape(1, -1) if single else v
    m = a.max(axis=1)
    if not np.isfinite(m).all():
        raise NormalizationError("log_softmax input has no finite entry")
    shifted = a - m[:, None]
    lse = m + np.log(np.exp(shifted).sum(axis=1))
    out = a - lse[:, None]
    return out[0] if single else out


def anll_from_stacked(weights, stacked: np.ndarray, labels: np.ndarray) -> float:
    """Fast ANLL given a precomputed score tensor (used by the optimizer)."""
    norm = log_softmax(mix_scores(np.asarray(weights), stacked))
    ll = norm[np.arange(len(labels)), labels]
    ll = np.where(np.isfinite(ll), ll, -SENTINEL_ANLL_PENALTY)
    return float(-ll.mean())


def anll(ensemble: MoGEnsemble, data: Dataset) -> float:
    """Mean negative log-softmax score of the true labels; always finite."""
    if data.n_rows == 0:
        raise MetricError("ANLL on empty data")
    return anll_from_stacked(ensemble.weights, stack_scores(ensemble.models, data), data.labels)


def predict_mog(ensemble: MoGEnsemble, data: Dataset) -> np.ndarray:
    """Row-wise argmax of the mixture scores; ties to the smallest class."""
    return np.argmax(mog_log_scores_batch(ensemble, data), axis=1)
