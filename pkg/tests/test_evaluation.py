import numpy as np
import pytest

from fednb.errors import ShapeError
from fednb.evaluation import chi2_sf_1df, f1_macro, mcnemar_yates


def test_f1_perfect():
    assert f1_macro([0, 1, 2, 0], [0, 1, 2, 0], 3) == 1.0


def test_f1_hand_example():
    # class0: P=1, R=1/2 -> 2/3; class1: P=2/3, R=1 -> 0.8
    assert f1_macro([0, 0, 1, 1], [0, 1, 1, 1], 2) == pytest.approx(0.73333, abs=1e-4)


def test_f1_all_wrong_binary():
    assert f1_macro([0, 0, 1, 1], [1, 1, 0, 0], 2) == 0.0


def test_f1_absent_class_counts_zero():
    # class 2 never appears in truth or prediction -> contributes 0
    assert f1_macro([0, 1], [0, 1], 3) == pytest.approx(2 / 3)


def test_f1_joint_permutation_invariant():
    rng = np.random.default_rng(0)
    y = rng.integers(0, 3, 50)
    p = rng.integers(0, 3, 50)
    base = f1_macro(y, p, 3)
    for _ in range(10):
        perm = rng.permutation(50)
        assert f1_macro(y[perm], p[perm], 3) == pytest.approx(base, abs=1e-12)


def test_f1_length_mismatch():
    with pytest.raises(ShapeError):
        f1_macro([0, 1], [0], 2)


def test_chi2_sf_reference_values():
    assert chi2_sf_1df(0.0) == 1.0
    assert chi2_sf_1df(3.841) == pytest.approx(0.0500, abs=5e-4)
    assert chi2_sf_1df(6.635) == pytest.approx(0.0100, abs=5e-4)


def test_chi2_sf_strictly_decreasing():
    xs = np.linspace(0, 30, 200)
    vals = [chi2_sf_1df(x) for x in xs]
    assert all(a > b for a, b in zip(vals, vals[1:]))
    assert all(0 < v <= 1 for v in vals)


def test_chi2_sf_negative_error():
    with pytest.raises(ValueError):
        chi2_sf_1df(-0.1)


def _preds_with_discordance(b, c):
    """y_true all zeros; construct A/B prediction vectors with b and c counts."""
    n = b + c + 5
    y = np.zeros(n, dtype=int)
    a = np.zeros(n, dtype=int)
    bb = np.zeros(n, dtype=int)
    a[:c] = 1  # A wrong, B correct
    bb[c : c + b] = 1  # A correct, B wrong
    return a, bb, y


def test_mcnemar_hand_example():
    a, b, y = _preds_with_discordance(10, 2)
    res = mcnemar_yates(a, b, y)
    assert (res.b, res.c) == (10, 2)
    assert res.chi2 == pytest.approx(49 / 12, abs=1e-9)
    assert res.p_value == pytest.approx(0.0433, abs=1e-3)
    assert res.significant


def test_mcnemar_equal_discordance():
    a, b, y = _preds_with_discordance(5, 5)
    res = mcnemar_yates(a, b, y)
    assert res.chi2 == 0.0
    assert res.p_value == 1.0
    assert not res.significant


def test_mcnemar_identical_predictions():
    y = np.array([0, 1, 0, 1])
    preds = np.array([0, 1, 1, 1])
    res = mcnemar_yates(preds, preds, y)
    assert (res.b, res.c) == (0, 0)
    assert res.p_value == 1.0


def test_mcnemar_yates_clamped_at_small_gap():
    a, b, y = _preds_with_discordance(3, 2)
    res = mcnemar_yates(a, b, y)
    assert res.chi2 == 0.0  # |b - c| = 1 -> corrected statistic clamps to 0


def test_mcnemar_antisymmetric():
    a, b, y = _preds_with_discordance(8, 3)
    fwd = mcnemar_yates(a, b, y)
    rev = mcnemar_yates(b, a, y)
    assert (fwd.b, fwd.c) == (rev.c, rev.b)
    assert fwd.chi2 == rev.chi2
    assert fwd.p_value == rev.p_value


def test_mcnemar_length_mismatch():
    with pytest.raises(ShapeError):
        mcnemar_yates([0, 1], [0], [0, 1])
