import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from irad.evaltheory import (
    ThresholdRule,
    UndefinedMetricError,
    auroc,
    jacobi_eigh,
    js_distance_bernoulli,
    lemma_jsd_check,
    pca_2d,
    theorem1_check,
    threshold_sweep,
)
from irad.numkit import ShapeError

prob = st.floats(0.0, 1.0, allow_nan=False)


def pairwise_auroc(s, y):
    pos, neg = s[y == 1], s[y == 0]
    wins = sum((p > n) + 0.5 * (p == n) for p in pos for n in neg)
    return wins / (len(pos) * len(neg))


def jsd_direct(p, q):
    def kl(a, b):
        return sum(ai * math.log2(ai / bi) for ai, bi in zip(a, b) if ai > 0)

    P, Q = (p, 1 - p), (q, 1 - q)
    M = tuple((a + b) / 2 for a, b in zip(P, Q))
    return math.sqrt(0.5 * kl(P, M) + 0.5 * kl(Q, M))


# -- AUROC -------------------------------------------------------------------


def test_auroc_examples():
    assert auroc([0.9, 0.1], [1, 0]) == 1.0
    assert auroc([0.3] * 6, [0, 1, 0, 1, 1, 0]) == 0.5
    assert auroc([0.1, 0.9], [1, 0]) == 0.0


@settings(max_examples=200, deadline=None)
@given(st.integers(2, 50), st.integers(0, 2**31))
def test_auroc_matches_pairwise_oracle_exactly(n, seed):
    rng = np.random.default_rng(seed)
    y = rng.integers(0, 2, n)
    y[0], y[1] = 0, 1
    s = rng.integers(0, 5, n).astype(float)  # coarse grid forces ties
    assert auroc(s, y) == pairwise_auroc(s, y)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**31))
def test_auroc_invariant_to_increasing_transform(seed):
    rng = np.random.default_rng(seed)
    s = rng.normal(size=30)
    y = np.r_[np.zeros(15), np.ones(15)]
    assert auroc(np.exp(3 * s) + 2, y) == auroc(s, y)


def test_auroc_single_class_is_undefined():
    with pytest.raises(UndefinedMetricError):
        auroc([0.1, 0.2], [0, 0])


def test_auroc_length_mismatch():
    with pytest.raises(ShapeError):
        auroc([0.1, 0.2, 0.3], [0, 1])


# -- JS distance -------------------------------------------------------------


def test_js_examples():
    assert js_distance_bernoulli(0.3, 0.3) == 0.0
    assert js_distance_bernoulli(0.0, 1.0) == 1.0
    assert js_distance_bernoulli(0.1, 0.3) == pytest.approx(jsd_direct(0.1, 0.3), rel=1e-12)


@settings(max_examples=200)
@given(prob, prob, prob)
def test_js_is_a_metric(p, q, r):
    d = js_distance_bernoulli
    assert 0.0 <= d(p, q) <= 1.0
    assert d(p, q) == pytest.approx(d(q, p), abs=1e-15)
    assert d(p, r) <= d(p, q) + d(q, r) + 1e-12


def test_js_rejects_out_of_range():
    with pytest.raises(ValueError):
        js_distance_bernoulli(-0.1, 0.5)


# -- bound checks ------------------------------------------------------------


def test_theorem1_examples():
    r = theorem1_check([0, 1], [0, 1], [1, 0], [1, 0])
    assert (r.lhs, r.rhs, r.holds) == (0.0, 0.0, True)
    r = theorem1_check([0, 0, 0], [0, 0, 0], [0, 0], [1, 1])
    assert r.lhs == 1.0 and r.rhs == 0.5 and r.holds


def test_theorem1_needs_invariant_prediction_marginal():
    # perfect predictors whose output rates differ: the bound is not implied
    r = theorem1_check([0, 0], [0, 0], [1, 1], [1, 1])
    assert r.lhs == 0.0 and r.rhs == 0.5 and not r.holds


def test_theorem1_rejects_bad_input():
    with pytest.raises(ValueError):
        theorem1_check([0, 2], [0, 1], [0], [1])
    with pytest.raises(ShapeError):
        theorem1_check([0, 1], [0], [0], [1])


@settings(max_examples=300, deadline=None)
@given(st.integers(1, 8), st.integers(0, 8), st.integers(0, 2**31))
def test_theorem1_random_invariant_instances(n, k, seed):
    rng = np.random.default_rng(seed)
    k = min(k, n)
    pred_s = np.zeros(n, int)
    pred_t = np.zeros(n, int)
    pred_s[rng.choice(n, k, replace=False)] = 1
    pred_t[rng.choice(n, k, replace=False)] = 1
    assert theorem1_check(pred_s, rng.integers(0, 2, n), pred_t, rng.integers(0, 2, n)).holds


def test_lemma_examples():
    assert lemma_jsd_check([0, 1, 1], [0, 1, 1]) == (0.0, 0.0, True)
    d, root, ok = lemma_jsd_check([1, 0, 1, 0], [0, 1, 0, 1])
    assert d == 0.0 and root == 1.0 and ok


@settings(max_examples=300, deadline=None)
@given(st.integers(1, 10), st.integers(0, 2**31))
def test_lemma_random(n, seed):
    rng = np.random.default_rng(seed)
    assert lemma_jsd_check(rng.integers(0, 2, n), rng.integers(0, 2, n))[2]


def test_threshold_rule_is_monotone():
    rule = ThresholdRule(0.5)
    assert list(rule([0.1, 0.5, 0.9])) == [0, 1, 1]


def test_threshold_sweep_covers_every_distinct_score():
    s_s, s_t = np.array([0.1, 0.4, 0.4]), np.array([0.2, 0.9, 0.3])
    rows = threshold_sweep(s_s, [0, 1, 1], s_t, [0, 1, 1])
    assert [t for t, _ in rows] == [0.1, 0.2, 0.3, 0.4, 0.9]
    assert all(r.holds and r.rhs == 0.0 for _, r in rows)


def test_threshold_sweep_reports_perfect_split_with_shifted_label_rates():
    rows = dict(threshold_sweep([0.1, 0.4, 0.4], [0, 1, 1], [0.2, 0.9], [0, 1]))
    r = rows[0.4]
    assert r.lhs == 0.0 and r.rhs > 0 and not r.holds


# -- PCA ---------------------------------------------------------------------


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 8), st.integers(0, 2**31))
def test_jacobi_matches_dense_eigensolver(n, seed):
    a = np.random.default_rng(seed).normal(size=(n, n))
    a = a + a.T
    w, v = jacobi_eigh(a)
    ref = np.linalg.eigvalsh(a)[::-1]
    assert np.allclose(w, ref, atol=1e-10)
    assert np.allclose(v.T @ v, np.eye(n), atol=1e-10)
    assert np.allclose(a @ v, v * w, atol=1e-9)


def test_pca_axis_aligned():
    x = np.array([[5.0, 0.0], [-5.0, 0.0], [0.0, 1.0], [0.0, -1.0], [3.0, 0.0], [-3.0, 0.0]])
    p = pca_2d(x)
    assert np.allclose(np.abs(p), np.abs(x), atol=1e-12)


def test_pca_collinear_second_component_vanishes():
    t = np.linspace(-1, 1, 50)
    _, var = pca_2d(np.column_stack([t, 2 * t, -t]), return_variance=True)
    assert var[1] <= 1e-10


def test_pca_explained_variance_matches_oracle():
    rng = np.random.default_rng(1)
    x = rng.normal(size=(300, 16)) @ rng.normal(size=(16, 16))
    proj, var = pca_2d(x, return_variance=True)
    ref = np.linalg.eigvalsh(np.cov(x, rowvar=False))[::-1][:2]
    assert np.allclose(var, ref, rtol=0, atol=1e-8 * ref[0])
    assert np.allclose(proj.var(axis=0, ddof=1), ref, rtol=1e-8)


def test_pca_sign_convention():
    rng = np.random.default_rng(2)
    x = rng.normal(size=(100, 3)) * [3, 2, 1]
    a, b = pca_2d(x), pca_2d(-x)
    assert np.allclose(a, -b, atol=1e-10)  # loadings pinned, so negated data flips the projection


def test_pca_rank_zero_warns():
    with warnings.catch_warnings(record=True) as w:
        warnings.simplefilter("always")
        p = pca_2d(np.ones((5, 3)))
    assert not p.any() and any("rank 0" in str(m.message) for m in w)


def test_pca_preconditions():
    with pytest.raises(ShapeError):
        pca_2d(np.ones((1, 3)))
    with pytest.raises(ShapeError):
        pca_2d(np.ones((4, 1)))
