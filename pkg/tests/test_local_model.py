import math

import numpy as np
import pytest

from fednb.data import Dataset, FeatureSchema, SynthSpec, synth_generate
from fednb.errors import FitError, ShapeError
from fednb.local_model import (
    NEG_INF,
    ScalerParams,
    fit_hybrid,
    joint_log_scores,
    joint_log_scores_batch,
    load_model,
    predict_local,
    save_model,
)


def _make_dataset(cat, num, labels, n_classes, n_cats):
    n_cat_cols = cat.shape[1]
    n_num_cols = num.shape[1]
    cols = [(f"c{j}", "categorical") for j in range(n_cat_cols)]
    cols += [(f"x{j}", "numerical") for j in range(n_num_cols)]
    cols.append(("y", "label"))
    schema = FeatureSchema(tuple(cols), n_classes)
    return Dataset(schema, cat, num, labels, n_cats)


def oracle_scores(cat, num, labels, n_cats, n_classes, row_cat, row_num, smoothing=1.0):
    """Independent brute-force joint log-score: plain loops and math.log."""
    n = len(labels)
    out = []
    # scaler fitted on training data, population std, zero std -> 1
    means = [sum(num[i][j] for i in range(n)) / n for j in range(len(row_num))]
    stds = []
    for j in range(len(row_num)):
        var = sum((num[i][j] - means[j]) ** 2 for i in range(n)) / n
        stds.append(math.sqrt(var) if var > 0 else 1.0)
    z = [[(num[i][j] - means[j]) / stds[j] for j in range(len(row_num))] for i in range(n)]
    zrow = [(row_num[j] - means[j]) / stds[j] for j in range(len(row_num))]
    # per-column variance floor reference: variance of standardized column
    col_floor = []
    for j in range(len(row_num)):
        zm = sum(z[i][j] for i in range(n)) / n
        zv = sum((z[i][j] - zm) ** 2 for i in range(n)) / n
        col_floor.append(1e-9 * max(zv, 1.0))

    for c in range(n_classes):
        rows_c = [i for i in range(n) if labels[i] == c]
        if not rows_c:
            out.append(NEG_INF)
            continue
        score = math.log(len(rows_c) / n)
        for j, m in enumerate(n_cats):
            cnt = sum(1 for i in rows_c if cat[i][j] == row_cat[j])
            score += math.log((cnt + smoothing) / (len(rows_c) + smoothing * (m + 1)))
        for j in range(len(row_num)):
            mu = sum(z[i][j] for i in rows_c) / len(rows_c)
            var = sum((z[i][j] - mu) ** 2 for i in rows_c) / len(rows_c) + col_floor[j]
            score += -0.5 * math.log(2 * math.pi * var) - (zrow[j] - mu) ** 2 / (2 * var)
        out.append(score)
    return out


def test_laplace_smoothing_hand_example():
    # one column, one class, counts (2, 1, OOD=0) over 3 slots -> (3/6, 2/6, 1/6)
    cat = np.array([[0], [0], [1]])
    num = np.zeros((3, 0))
    labels = np.zeros(3, dtype=np.int64)
    schema = FeatureSchema((("c0", "categorical"), ("y", "label")), 2)
    ds = Dataset(schema, cat, num, labels, (2,))
    model = fit_hybrid(ds)
    probs = np.exp(model.cat_log_prob[0][0])
    assert np.allclose(probs, [3 / 6, 2 / 6, 1 / 6])


def test_constant_column_variance_floor():
    cat = np.zeros((4, 0), dtype=np.int64)
    num = np.array([[1.0], [1.0], [2.0], [3.0]])
    labels = np.array([0, 0, 1, 1])
    ds = _make_dataset(cat, num, labels, 2, ())
    model = fit_hybrid(ds)
    assert model.gauss_var[0, 0] > 0
    scores = joint_log_scores_batch(model, ds)
    assert np.isfinite(scores[:, 0]).all()


def test_class_priors_are_frequencies():
    cat = np.zeros((4, 1), dtype=np.int64)
    num = np.zeros((4, 0))
    labels = np.array([0, 0, 1, 1])
    ds = _make_dataset(cat, num, labels, 2, (1,))
    model = fit_hybrid(ds)
    assert np.allclose(np.exp(model.log_prior), [0.5, 0.5])


def test_fit_empty_dataset_error():
    ds = _make_dataset(np.zeros((0, 1), dtype=np.int64), np.zeros((0, 0)), np.zeros(0, dtype=np.int64), 2, (2,))
    with pytest.raises(FitError):
        fit_hybrid(ds)


def test_categorical_tables_normalize():
    ds = synth_generate(SynthSpec(200, 3, 2, 1, (0.0,)), 11)
    model = fit_hybrid(ds)
    for table in model.cat_log_prob:
        sums = np.exp(table).sum(axis=1)
        assert np.allclose(sums, 1.0, atol=1e-9)
        assert table.shape[1] == 5  # 4 categories + OOD slot


def test_ood_slot_used_not_last_category():
    ds = synth_generate(SynthSpec(300, 2, 1, 0, (0.0,)), 12)
    model = fit_hybrid(ds)
    m = ds.n_cats[0]
    s_ood = joint_log_scores(model, [m], [])
    s_last = joint_log_scores(model, [m - 1], [])
    for c in model.classes_present:
        assert s_ood[c] != s_last[c]
        assert s_ood[c] == pytest.approx(model.log_prior[c] + model.cat_log_prob[0][c, m])


def test_unseen_category_does_not_contaminate_known_probs():
    # the known-category probabilities must be bitwise identical whether or
    # not an OOD value appears at inference time
    ds = synth_generate(SynthSpec(300, 2, 1, 1, (0.0,)), 13)
    model = fit_hybrid(ds)
    before = [t.copy() for t in model.cat_log_prob]
    _ = joint_log_scores(model, [ds.n_cats[0]], [0.0])
    for a, b in zip(before, model.cat_log_prob):
        assert np.array_equal(a, b)
    known = joint_log_scores(model, [0], [0.0])
    _ = joint_log_scores(model, [ds.n_cats[0]], [0.0])
    assert np.array_equal(known, joint_log_scores(model, [0], [0.0]))


def test_oracle_equivalence_random_instances():
    rng = np.random.default_rng(42)
    for trial in range(120):
        n_classes = int(rng.integers(2, 4))
        n_cat = int(rng.integers(0, 3))
        n_num = int(rng.integers(0, 3))
        if n_cat + n_num == 0:
            n_num = 1
        n = int(rng.integers(4, 50))
        n_cats = tuple(int(rng.integers(2, 4)) for _ in range(n_cat))
        cat = np.column_stack(
            [rng.integers(0, m, size=n) for m in n_cats]
        ) if n_cat else np.zeros((n, 0), dtype=np.int64)
        num = rng.normal(size=(n, n_num))
        labels = rng.integers(0, n_classes, size=n)
        labels[0] = 0  # at least one class present
        ds = _make_dataset(cat.astype(np.int64), num, labels.astype(np.int64), n_classes, n_cats)
        model = fit_hybrid(ds)
        row_cat = [int(rng.integers(0, m + 1)) for m in n_cats]  # may hit OOD
        row_num = list(rng.normal(size=n_num))
        got = joint_log_scores(model, row_cat, row_num)
        want = oracle_scores(cat.tolist(), num.tolist(), labels.tolist(), n_cats, n_classes, row_cat, row_num)
        for c in range(n_classes):
            if want[c] == NEG_INF:
                assert got[c] == NEG_INF
            else:
                assert got[c] == pytest.approx(want[c], abs=1e-9, rel=1e-9)


def test_standardization_round_trip():
    rng = np.random.default_rng(5)
    scaler = ScalerParams(rng.normal(size=4), rng.uniform(0.5, 2.0, size=4))
    x = rng.normal(size=(20, 4))
    assert np.allclose(scaler.transform(scaler.inverse(x)), x, atol=1e-9)


def test_predict_separable_training_accuracy():
    ds = synth_generate(SynthSpec(500, 2, 0, 2, (0.0,), class_sep=6.0), 21)
    model = fit_hybrid(ds)
    assert (predict_local(model, ds) == ds.labels).all()


def test_single_class_always_predicted():
    cat = np.zeros((5, 1), dtype=np.int64)
    num = np.random.default_rng(0).normal(size=(5, 1))
    labels = np.ones(5, dtype=np.int64)
    ds = _make_dataset(cat, num, labels, 3, (1,))
    model = fit_hybrid(ds)
    assert (predict_local(model, ds) == 1).all()
    scores = joint_log_scores_batch(model, ds)
    assert (scores[:, 0] == NEG_INF).all() and (scores[:, 2] == NEG_INF).all()


def test_tie_breaks_to_smaller_class():
    # perfectly symmetric two-class data -> identical scores for a midpoint row
    cat = np.zeros((4, 0), dtype=np.int64)
    num = np.array([[-1.0], [-2.0], [1.0], [2.0]])
    labels = np.array([0, 0, 1, 1])
    ds = _make_dataset(cat, num, labels, 2, ())
    model = fit_hybrid(ds)
    mid = _make_dataset(np.zeros((1, 0), dtype=np.int64), np.array([[0.0]]), np.array([0]), 2, ())
    scores = joint_log_scores_batch(model, mid)
    assert scores[0, 0] == pytest.approx(scores[0, 1], abs=1e-12)
    assert predict_local(model, mid)[0] == 0


def test_shape_error_on_dimension_mismatch():
    ds = synth_generate(SynthSpec(100, 2, 1, 2, (0.0,)), 31)
    model = fit_hybrid(ds)
    with pytest.raises(ShapeError):
        joint_log_scores(model, [0, 0], [0.0, 0.0])
    with pytest.raises(ShapeError):
        joint_log_scores(model, [0], [0.0])


def test_model_serialization_round_trip(tmp_path):
    ds = synth_generate(SynthSpec(300, 3, 2, 2, (0.0,)), 17)
    model = fit_hybrid(ds)
    path = tmp_path / "model.json"
    save_model(model, path)
    back = load_model(path)
    assert np.allclose(joint_log_scores_batch(back, ds), joint_log_scores_batch(model, ds))
    assert back.classes_present == model.classes_present
