import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from percodyn.brute_oracle import (
    OracleError,
    TinyTree,
    config_weights,
    count_connected,
    pivotal_prob,
    root_connection_table,
    static_prob,
    two_time_both_prob,
    two_time_prob,
)
from percodyn.tree_model import homogeneous

BINARY1 = TinyTree((0, 0), (0.5, 0.5))
PATH2 = TinyTree((0, 1), (0.5, 0.8))


def conn_event(tree, level):
    table = root_connection_table(tree, level)
    return lambda mask: bool(table[mask])


class TestStaticProb:
    def test_binary_depth1(self):
        assert static_prob(BINARY1, conn_event(BINARY1, 1)) == pytest.approx(0.75, abs=1e-15)

    def test_binary_depth2_matches_hand_recursion(self):
        tree = TinyTree.from_profile(homogeneous(2, 0.5, 2))
        assert static_prob(tree, conn_event(tree, 2)) == pytest.approx(39 / 64, abs=1e-14)

    def test_normalization(self):
        assert static_prob(PATH2, lambda i: True) == pytest.approx(1.0, abs=1e-14)

    def test_too_many_edges(self):
        big = TinyTree(tuple([0] * 17), tuple([0.5] * 17))
        with pytest.raises(OracleError):
            static_prob(big, lambda i: True)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**31))
def test_normalization_on_random_trees(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 7))
    parent = tuple(int(rng.integers(0, e + 1)) for e in range(n))
    probs = tuple(rng.uniform(0.1, 0.9, n))
    tree = TinyTree(parent, probs)
    assert static_prob(tree, lambda i: True) == pytest.approx(1.0, abs=1e-14)
    # complement additivity on an arbitrary event
    bit = 1 << int(rng.integers(0, n))
    p_a = static_prob(tree, lambda i: bool(i & bit))
    p_b = static_prob(tree, lambda i: not (i & bit))
    assert p_a + p_b == pytest.approx(1.0, abs=1e-14)


class TestTwoTime:
    def test_single_edge_both_open(self):
        tree = TinyTree((0,), (0.5,))
        val = two_time_prob(tree, math.log(2), lambda i, j: bool(i & 1) and bool(j & 1))
        assert val == pytest.approx(3 / 8, abs=1e-15)

    def test_binary_connection_at_both_times(self):
        ev = conn_event(BINARY1, 1)
        val = two_time_prob(BINARY1, math.log(2), lambda i, j: ev(i) and ev(j))
        assert val == pytest.approx(41 / 64, abs=1e-14)
        assert two_time_both_prob(BINARY1, math.log(2), ev) == pytest.approx(val, abs=1e-14)

    def test_t_zero_degenerates_to_static(self):
        ev = conn_event(PATH2, 2)
        val = two_time_prob(PATH2, 0.0, lambda i, j: ev(i) and ev(j))
        assert val == pytest.approx(static_prob(PATH2, ev), abs=1e-14)

    def test_time_swap_symmetry(self):
        # asymmetric event: open at 0, closed at t for edge 0
        f = lambda i, j: bool(i & 1) and not (j & 1)
        g = lambda i, j: f(j, i)
        a = two_time_prob(PATH2, 0.7, f)
        b = two_time_prob(PATH2, 0.7, g)
        assert a == pytest.approx(b, abs=1e-14)

    def test_edge_guard(self):
        big = TinyTree(tuple([0] * 11), tuple([0.5] * 11))
        with pytest.raises(OracleError):
            two_time_prob(big, 1.0, lambda i, j: True)


class TestPivotal:
    def test_single_edge(self):
        tree = TinyTree((0,), (0.3,))
        assert pivotal_prob(tree, 0, conn_event(tree, 1)) == pytest.approx(1.0, abs=1e-15)

    def test_binary_sibling_must_be_closed(self):
        assert pivotal_prob(BINARY1, 0, conn_event(BINARY1, 1)) == pytest.approx(0.5, abs=1e-15)

    def test_path_other_edge_must_be_open(self):
        assert pivotal_prob(PATH2, 0, conn_event(PATH2, 2)) == pytest.approx(0.8, abs=1e-15)
        assert pivotal_prob(PATH2, 1, conn_event(PATH2, 2)) == pytest.approx(0.5, abs=1e-15)

    def test_monotone_event_conditional_identity(self):
        tree = TinyTree.from_profile(homogeneous(2, 0.6, 2))
        ev = conn_event(tree, 2)
        for e in range(tree.n_edges):
            bit = 1 << e
            p = tree.probs[e]
            p_open = static_prob(tree, lambda i: ev(i | bit)) / 1.0
            p_closed = static_prob(tree, lambda i: ev(i & ~bit))
            assert pivotal_prob(tree, e, ev) == pytest.approx(abs(p_open - p_closed), abs=1e-12)


def test_count_connected_moments():
    tree = TinyTree.from_profile(homogeneous(2, 0.5, 2))
    w = config_weights(tree)
    counts = count_connected(tree, 2)
    mean = float(np.sum(w * counts))
    assert mean == pytest.approx(1.0, abs=1e-14)  # w_2 = (2 * 0.5)^2
