import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_chain, random_interior
from rwexponent import make_ring, make_star, sparsity_radius, validate
from rwexponent.errors import IndexOutOfRange, InstanceTooLarge, LengthMismatch
from rwexponent.markov import SparsityPattern
from rwexponent.measure import EdgeMeasure
from rwexponent.typeclass import (
    TransitionCounts,
    count_type_class,
    enumerate_sequences,
    gauss_markov_type,
    log_whittle_bounds,
    markov_type,
    rate_function,
    transition_counts,
    type_class_counts,
    walk_count,
    whittle_bounds,
)


def complete_pattern(n):
    return sparsity_radius(validate(np.full((n, n), 1.0 / n)))


def test_transition_counts_examples():
    np.testing.assert_array_equal(transition_counts([0, 1, 0, 1], 2).k, [[0, 2], [2, 0]])
    np.testing.assert_array_equal(transition_counts([0, 0, 0], 1).k, [[3]])
    # the closing transition 2 -> 0 is counted
    np.testing.assert_array_equal(transition_counts([0, 1, 2], 3).k, [[0, 1, 0], [0, 0, 1], [1, 0, 0]])


def test_transition_counts_errors():
    with pytest.raises(IndexOutOfRange):
        transition_counts([0, 2], 2)
    with pytest.raises(IndexOutOfRange):
        transition_counts([-1, 0], 2)
    with pytest.raises(IndexOutOfRange):
        transition_counts([0.5, 1.0], 2)
    with pytest.raises(LengthMismatch):
        transition_counts([], 2)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.integers(0, 4), min_size=1, max_size=60))
def test_counts_balance(seq):
    c = transition_counts(seq, 5)
    assert c.k.sum() == len(seq)
    np.testing.assert_array_equal(c.k.sum(axis=1), c.k.sum(axis=0))
    np.testing.assert_array_equal(c.visits, np.bincount(seq, minlength=5))


def test_markov_type_examples():
    np.testing.assert_array_equal(markov_type([0, 1, 0, 1], 2), [[0, 0.5], [0.5, 0]])
    np.testing.assert_array_equal(markov_type([0, 0], 1), [[1.0]])
    np.testing.assert_array_equal(markov_type([0, 1, 1, 0], 2), [[0.25, 0.25], [0.25, 0.25]])


def test_gauss_markov_type_examples():
    gm = gauss_markov_type([0, 1, 0], [1.0, 2.0, 3.0], 2)
    np.testing.assert_allclose(gm.xi, [4 / 3, 2 / 3])
    np.testing.assert_allclose(gm.visit_average, [2.0, 2.0])
    np.testing.assert_array_equal(gauss_markov_type([0, 1, 0], [0.0, 0.0, 0.0], 3).xi, 0.0)
    np.testing.assert_array_equal(gauss_markov_type([0, 0], [5.0, -5.0], 1).xi, [0.0])
    with pytest.raises(LengthMismatch):
        gauss_markov_type([0, 1], [1.0], 2)


def test_gauss_markov_type_unvisited_node():
    gm = gauss_markov_type([0, 0, 2], [1.0, 1.0, 1.0], 3)
    assert gm.theta_bar[1] == 0 and gm.xi[1] == 0 and gm.visit_average[1] == 0


def test_enumeration_examples():
    pattern = complete_pattern(2)
    assert enumerate_sequences(pattern, 2) == [(0, 0), (0, 1), (1, 0), (1, 1)]
    assert len(enumerate_sequences(pattern, 3)) == 8 == walk_count(pattern, 3)


def test_enumeration_star_against_matrix_power():
    pattern = sparsity_radius(make_star(3))
    for t in range(1, 9):
        ones = np.ones(3, dtype=np.int64)
        expected = int(ones @ np.linalg.matrix_power(pattern.p0.astype(np.int64), t - 1) @ ones)
        seqs = enumerate_sequences(pattern, t)
        assert len(seqs) == expected == walk_count(pattern, t)
        assert seqs == sorted(seqs) and len(set(seqs)) == len(seqs)
        assert all(pattern.p0[a, b] for s in seqs for a, b in zip(s, s[1:]))


def test_walk_count_exact_for_large_t():
    # 3**199 does not fit in a float mantissa
    assert walk_count(complete_pattern(3), 200) == 3**200


def test_enumeration_guard():
    with pytest.raises(InstanceTooLarge):
        enumerate_sequences(complete_pattern(2), 13)
    with pytest.raises(InstanceTooLarge):
        enumerate_sequences(sparsity_radius(make_ring(6)), 3)
    with pytest.raises(InstanceTooLarge):
        enumerate_sequences(complete_pattern(2), 0)
    with pytest.raises(InstanceTooLarge):
        count_type_class(np.full((5, 5), 1 / 25), 12)


def test_count_type_class_examples():
    assert count_type_class(np.array([[0, 0.5], [0.5, 0]]), 2) == 2
    assert count_type_class(np.array([[0.3, 0.2], [0.2, 0.3]]), 2) == 0
    assert count_type_class(np.array([[1.0]]), 4) == 1
    chain = validate(np.full((2, 2), 0.5))
    theta = EdgeMeasure.from_dense(np.array([[0, 0.5], [0.5, 0]]), chain.edges)
    assert count_type_class(theta, 2, sparsity_radius(chain)) == 2


def test_count_type_class_respects_pattern():
    # on the ring the 0 -> 2 jump of a 4-ring does not exist
    pattern = sparsity_radius(make_ring(4))
    dense = np.zeros((4, 4))
    dense[0, 2] = dense[2, 0] = 0.5
    assert count_type_class(dense, 2, pattern) == 0
    assert count_type_class(dense, 2) == 2


def test_count_type_class_filters_like_enumeration():
    pattern = complete_pattern(3)
    seqs = enumerate_sequences(pattern, 5)
    target = markov_type(seqs[17], 3)
    brute = sum(np.array_equal(markov_type(s, 3), target) for s in seqs)
    assert count_type_class(target, 5, pattern) == brute


def test_whittle_examples():
    assert whittle_bounds(TransitionCounts(np.array([[0, 2], [2, 0]]), 4)) == (0.25, 2.0)
    lo, hi = whittle_bounds(TransitionCounts(np.array([[3]]), 3))
    assert lo == pytest.approx(1 / 3, rel=1e-15) and hi == 1.0


def test_whittle_log_and_linear_agree():
    rng = np.random.default_rng(40)
    for _ in range(50):
        seq = rng.integers(0, 3, size=int(rng.integers(1, 21)))
        c = transition_counts(seq, 3)
        lo, hi = whittle_bounds(c)
        llo, lhi = log_whittle_bounds(c)
        assert math.log(lo) == pytest.approx(llo, abs=1e-12)
        assert math.log(hi) == pytest.approx(lhi, abs=1e-12)


def test_whittle_long_sequence_uses_logs():
    seq = np.random.default_rng(41).integers(0, 3, size=2000)
    c = transition_counts(seq, 3)
    llo, lhi = log_whittle_bounds(c)
    assert np.isfinite(llo) and llo < lhi
    assert whittle_bounds(c)[1] == math.inf


@pytest.mark.parametrize("n", [1, 2, 3])
def test_type_counts_sum_to_walk_count(n):
    pattern = complete_pattern(n)
    for t in range(1, 9):
        classes = type_class_counts(pattern, t)
        assert sum(c for _, c in classes.values()) == walk_count(pattern, t)
        for counts, c in classes.values():
            lo, hi = whittle_bounds(counts)
            assert lo <= c <= hi


def test_rate_function_examples():
    pattern = complete_pattern(2)
    uniform = np.full((2, 2), 0.25)
    assert abs(rate_function(uniform, np.zeros(2), pattern)) <= 1e-15
    assert rate_function(np.array([[0.5, 0.3], [0.1, 0.1]]), np.zeros(2), pattern) == math.inf
    one_node = np.array([[0.0, 0.0], [0.0, 1.0]])
    assert rate_function(one_node, np.array([0.1, 0.0]), pattern) == math.inf
    # J > H
    assert rate_function(uniform, np.array([2.0, 2.0]), pattern) == math.inf


def test_rate_function_nonnegative_where_finite():
    rng = np.random.default_rng(42)
    finite = 0
    for _ in range(300):
        chain = random_chain(rng, int(rng.integers(2, 7)))
        pattern = sparsity_radius(chain)
        theta = EdgeMeasure.on_chain(chain, random_interior(rng, chain)).dense()
        xi = rng.normal(scale=0.2, size=chain.n) * theta.sum(axis=1)
        value = rate_function(theta, xi, pattern)
        if np.isfinite(value):
            finite += 1
            assert value >= -1e-12
    assert finite > 100


def test_rate_function_shape_mismatch():
    pattern = complete_pattern(2)
    assert rate_function(np.full((3, 3), 1 / 9), np.zeros(3), pattern) == math.inf
    assert isinstance(pattern, SparsityPattern)
