"""Attention kernels: the removal and insertion math, oracle-first."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sgedit.attention import (
    AllMasked,
    CorrespondenceMatrix,
    DegenerateRow,
    LambdaSchedule,
    NegativeLambda,
    OutOfRange,
    ShapeMismatch,
    UnmappedToken,
    attention,
    build_correspondence,
    insertion_bias,
    lambda_schedule,
    modulated_attention,
    removal_attention,
    removal_bias,
    scaled_scores,
    softmax,
)
from sgedit.regions import SegmentMap

seeds = st.integers(0, 2**32 - 1)


def random_qkv(rng, n_q=None, n_k=None, d=None):
    n_q = n_q or int(rng.integers(1, 17))
    n_k = n_k or int(rng.integers(2, 17))
    d = d or int(rng.integers(1, 9))
    return rng.normal(size=(n_q, d)), rng.normal(size=(n_k, d)), rng.normal(size=(n_k, 3))


# --- softmax and plain attention -------------------------------------------------


def test_softmax_hand_oracle():
    out = softmax(np.array([[0.0, np.log(2.0)]]))
    np.testing.assert_allclose(out, [[1 / 3, 2 / 3]], atol=1e-12)


def test_softmax_neg_inf_gets_zero_weight():
    out = softmax(np.array([[0.0, -np.inf]]))
    np.testing.assert_array_equal(out, [[1.0, 0.0]])


def test_attention_hand_oracle_d1():
    # d=1 so the scaling is 1: weights [1/3, 2/3] over values [1, 2] -> 5/3
    q = np.array([[1.0]])
    k = np.array([[0.0], [np.log(2.0)]])
    v = np.array([[1.0], [2.0]])
    np.testing.assert_allclose(attention(q, k, v), [[5 / 3]], atol=1e-12)


def test_attention_bias_is_raw_domain():
    # adding sqrt(d)*c to a raw score must equal adding c post-scaling
    rng = np.random.default_rng(0)
    q, k, v = random_qkv(rng, n_q=3, n_k=4, d=4)
    bias = np.full((3, 4), 2.0 * np.sqrt(4))
    base = softmax(scaled_scores(q, k) + 2.0) @ v
    np.testing.assert_allclose(attention(q, k, v, bias), base, atol=1e-12)


def test_attention_shape_and_bias_validation():
    rng = np.random.default_rng(1)
    q, k, v = random_qkv(rng, n_q=2, n_k=3, d=2)
    with pytest.raises(ShapeMismatch):
        attention(q, k, v[:2])
    with pytest.raises(ShapeMismatch):
        attention(q, k, v, bias=np.zeros((2, 2)))
    with pytest.raises(ValueError):
        attention(q, k, v, bias=np.full((2, 3), np.inf))
    with pytest.raises(DegenerateRow):
        attention(q, k, v, bias=np.array([[0.0, 0.0, 0.0], [-np.inf] * 3]))


# --- removal ----------------------------------------------------------------------


def test_removal_bias_columns():
    bias = removal_bias(np.array([0, 1, 0, 1]), n_q=2)
    assert bias.shape == (2, 4)
    assert np.isneginf(bias[:, [1, 3]]).all()
    assert (bias[:, [0, 2]] == 0).all()


def test_removal_bias_all_masked_raises():
    with pytest.raises(AllMasked):
        removal_bias(np.ones(4), n_q=2)


@given(seeds)
@settings(max_examples=50, deadline=None)
def test_removal_invariants(seed):
    rng = np.random.default_rng(seed)
    q, k, v = random_qkv(rng)
    removed = rng.integers(0, 2, size=k.shape[0])
    removed[rng.integers(0, k.shape[0])] = 0  # keep one key alive

    weights = softmax(scaled_scores(q, k) + removal_bias(removed, q.shape[0]) / np.sqrt(q.shape[1]))
    assert (weights[:, removed.astype(bool)] == 0.0).all()
    np.testing.assert_allclose(weights.sum(axis=1), 1.0, atol=1e-9)

    out = removal_attention(q, k, v, removed)
    k2, v2 = k.copy(), v.copy()
    k2[removed.astype(bool)] += rng.normal(size=(int(removed.sum()), k.shape[1])) * 100
    v2[removed.astype(bool)] += rng.normal(size=(int(removed.sum()), v.shape[1])) * 100
    np.testing.assert_array_equal(removal_attention(q, k2, v2, removed), out)


# --- correspondence ----------------------------------------------------------------


def test_self_correspondence_oracle():
    seg = SegmentMap(2, 2, np.array([[0, 1], [1, 1]]))
    corr = build_correspondence(seg)
    labels = np.array([0, 1, 1, 1])
    np.testing.assert_array_equal(corr.r, (labels[:, None] == labels[None, :]).astype(np.uint8))
    np.testing.assert_allclose(corr.s[:, 0], 0.25)  # key 0 is the non-object segment
    np.testing.assert_allclose(corr.s[:, 1:], 0.75)


def test_cross_correspondence_oracle():
    seg = SegmentMap(2, 2, np.array([[0, 1], [1, 1]]))
    corr = build_correspondence(seg, "cross", token_segments={0: 0, 1: 1, 2: 1})
    np.testing.assert_array_equal(corr.r, [[1, 0, 0], [0, 1, 1], [0, 1, 1], [0, 1, 1]])
    np.testing.assert_allclose(corr.s[0], [0.25, 0.75, 0.75])


def test_cross_correspondence_errors():
    seg = SegmentMap(2, 2, np.array([[0, 1], [1, 1]]))
    with pytest.raises(UnmappedToken):
        build_correspondence(seg, "cross")
    with pytest.raises(UnmappedToken):
        build_correspondence(seg, "cross", token_segments={0: 0, 2: 1})  # index 1 missing
    with pytest.raises(UnmappedToken):
        build_correspondence(seg, "cross", token_segments={0: 0, 1: 7})  # absent segment
    with pytest.raises(ValueError):
        build_correspondence(seg, "diagonal")


def test_correspondence_matrix_validation():
    with pytest.raises(ShapeMismatch):
        CorrespondenceMatrix(np.zeros((2, 2)), np.zeros((2, 3)))
    with pytest.raises(ValueError):
        CorrespondenceMatrix(np.full((2, 2), 2), np.zeros((2, 2)))
    with pytest.raises(ValueError):
        CorrespondenceMatrix(np.zeros((2, 2)), np.full((2, 2), 1.5))


# --- insertion modulation -----------------------------------------------------------


def test_insertion_bias_hand_oracle():
    scores = np.array([[1.0, 3.0]])
    corr = CorrespondenceMatrix(np.array([[1, 0]]), np.full((1, 2), 0.5))
    np.testing.assert_allclose(insertion_bias(scores, corr, 1.0), [[1.0, -1.0]])


def test_insertion_bias_rejects_negative_lambda_and_shape():
    scores = np.zeros((2, 2))
    corr = CorrespondenceMatrix(np.zeros((2, 2), dtype=int), np.zeros((2, 2)))
    with pytest.raises(NegativeLambda):
        insertion_bias(scores, corr, -0.1)
    with pytest.raises(ShapeMismatch):
        insertion_bias(np.zeros((2, 3)), corr, 0.5)


@given(seeds, st.floats(0.0, 1.0))
@settings(max_examples=50, deadline=None)
def test_insertion_sign_and_range_properties(seed, lam):
    rng = np.random.default_rng(seed)
    n_q, n_k = int(rng.integers(1, 17)), int(rng.integers(2, 17))
    scores = rng.normal(size=(n_q, n_k)) * 3
    r = rng.integers(0, 2, size=(n_q, n_k))
    s = np.broadcast_to(rng.uniform(0, 1, size=n_k), (n_q, n_k)).copy()
    corr = CorrespondenceMatrix(r, s)

    x = insertion_bias(scores, corr, lam)
    assert (x[r == 1] >= 0).all()
    assert (x[r == 0] <= 0).all()

    modulated = scores + x  # lam*(1-S) <= 1, so rows stay inside [min, max]
    lo = scores.min(axis=1, keepdims=True)
    hi = scores.max(axis=1, keepdims=True)
    assert (modulated >= lo - 1e-12).all() and (modulated <= hi + 1e-12).all()


def test_modulated_attention_equals_bias_form():
    rng = np.random.default_rng(7)
    q, k, v = random_qkv(rng, n_q=4, n_k=4, d=8)
    seg = SegmentMap(2, 2, np.array([[0, 1], [2, 2]]))
    corr = build_correspondence(seg)
    x = insertion_bias(scaled_scores(q, k), corr, 0.6)
    expect = attention(q, k, v, bias=np.sqrt(q.shape[1]) * x)
    np.testing.assert_allclose(modulated_attention(q, k, v, corr, 0.6), expect, atol=1e-12)


# --- strength schedule ----------------------------------------------------------------


def test_lambda_schedule_endpoints_and_shape():
    assert lambda_schedule(0.0, 5.0) == 0.0
    assert lambda_schedule(1.0, 5.0) == 5.0
    assert lambda_schedule(0.5, 1.0) == pytest.approx(0.5**4)
    ts = np.linspace(0, 1, 11)
    vals = [lambda_schedule(float(t)) for t in ts]
    assert all(b >= a for a, b in zip(vals, vals[1:]))


def test_lambda_schedule_domain_errors():
    with pytest.raises(OutOfRange):
        lambda_schedule(1.5)
    with pytest.raises(NegativeLambda):
        lambda_schedule(0.5, -1.0)


def test_lambda_schedule_wire():
    sched = LambdaSchedule(max=2.5)
    assert sched.to_wire() == {"name": "poly4", "max": 2.5}
    assert LambdaSchedule.from_wire(sched.to_wire()) == sched
    assert sched.value(1.0) == 2.5
    with pytest.raises(ValueError):
        LambdaSchedule(name="linear")
