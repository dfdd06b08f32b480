import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from percodyn.brute_oracle import (
    TinyTree,
    config_weights,
    count_connected,
    pivotal_prob,
    root_connection_table,
    static_prob,
    two_time_both_prob,
)
from percodyn.exact_engine import (
    EngineError,
    connect_probs,
    correlation_ratio,
    default_t_grid,
    influence_table,
    leftmost_child_prob,
    lyons_check,
    one_arm,
    regime_report,
    survival_and_moments,
    survival_sweep,
    two_time_edge_joint,
    two_time_survival,
)
from percodyn.tree_model import ProfileSpec, TreeProfile, build_profile, homogeneous


class TestConnectProbs:
    def test_binary_one_level(self):
        assert connect_probs(homogeneous(2, 0.5, 1), 1)[0] == pytest.approx(0.75)

    def test_binary_two_levels(self):
        a = connect_probs(homogeneous(2, 0.5, 2), 2)
        assert a[1] == pytest.approx(0.75)
        assert a[0] == pytest.approx(39 / 64)

    def test_path(self):
        prof = TreeProfile((1, 1, 1), (0.7, 0.7, 0.7))
        assert connect_probs(prof, 3)[0] == pytest.approx(0.7**3)

    def test_out_of_range(self):
        with pytest.raises(EngineError):
            connect_probs(homogeneous(2, 0.5, 3), 4)


class TestSurvivalAndMoments:
    def test_binary_n1(self):
        t = survival_and_moments(homogeneous(2, 0.5, 1), 1)
        assert t.p_one == pytest.approx(0.5, abs=1e-15)
        assert t.ratio2 == pytest.approx(1.5, abs=1e-15)
        # two-sided sandwich: 2/3 <= 3/4 <= 4/3
        assert 1 / t.ratio2 <= t.p_positive <= 2 / t.ratio2

    def test_lemma_product_binary_n1(self):
        t = survival_and_moments(homogeneous(2, 0.5, 1), 1)
        assert t.mean_w * t.p_one <= t.p_positive**2 + 1e-15

    def test_single_edge(self):
        prof = TreeProfile((1,), (0.37,))
        t = survival_and_moments(prof, 1)
        assert t.p_one == pytest.approx(0.37)
        assert t.ratio2 == pytest.approx(1 / 0.37)

    def test_sweep_matches_single_targets(self):
        prof = TreeProfile((2, 3, 1, 2), (0.55, 0.3, 0.8, 0.45))
        sweep = survival_sweep(prof, 4)
        for n in range(1, 5):
            t = survival_and_moments(prof, n)
            assert sweep.p_positive[n - 1] == pytest.approx(t.p_positive, rel=1e-13)
            assert math.exp(sweep.log_p_one[n - 1]) == pytest.approx(t.p_one, rel=1e-12)
            assert sweep.ratio2[n - 1] == pytest.approx(t.ratio2, rel=1e-13)


def random_tiny_profile(rng):
    while True:
        depth = int(rng.integers(1, 4))
        degrees = [int(rng.integers(1, 4)) for _ in range(depth)]
        edges, level = 0, 1
        for d in degrees:
            level *= d
            edges += level
        if edges <= 8:
            break
    probs = [float(rng.uniform(0.2, 0.8)) for _ in range(depth)]
    return TreeProfile(tuple(degrees), tuple(probs))


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**31))
def test_engine_matches_oracle_on_random_tiny_trees(seed):
    rng = np.random.default_rng(seed)
    prof = random_tiny_profile(rng)
    n = prof.depth
    tree = TinyTree.from_profile(prof)
    table = root_connection_table(tree, n)
    ev = lambda i: bool(table[i])  # noqa: E731

    t = survival_and_moments(prof, n)
    assert t.p_positive == pytest.approx(static_prob(tree, ev), abs=1e-12)
    w = config_weights(tree)
    counts = count_connected(tree, n)
    p_one = math.fsum(w[i] for i in range(w.size) if counts[i] == 1)
    assert t.p_one == pytest.approx(p_one, abs=1e-12)

    inf = influence_table(prof, n)
    for e in range(tree.n_edges):
        lvl = tree.level[e + 1]
        assert inf.influence[lvl - 1] == pytest.approx(pivotal_prob(tree, e, ev), abs=1e-12)

    t_probe = float(rng.uniform(0.0, 2.0))
    tab = two_time_survival(prof, 0, n, t_probe)
    assert tab.q_t == pytest.approx(two_time_both_prob(tree, t_probe, ev), abs=1e-12)


class TestLyons:
    def test_supercritical_value(self):
        # independent iteration of a <- 1 - (1 - 0.6 a)^2 fifty times gives
        # A(0) = 0.5555585705150807; times sum_{k<=50} 1.2^-k = 4.999450575904419
        r = lyons_check(homogeneous(2, 0.6, 60), [50])
        assert r[0] == pytest.approx(2.777487615310256, rel=1e-12)
        assert 0.5 <= r[0] <= 4.0

    def test_critical_binary_band(self):
        r = lyons_check(homogeneous(2, 0.5, 1000), [10, 100, 1000])
        assert np.all(r >= 0.5) and np.all(r <= 4.0)


class TestOneArm:
    def test_supercritical_fixed_point(self):
        res = one_arm(homogeneous(2, 0.6, 600), 0, tol=1e-6)
        assert res.value == pytest.approx(5 / 9, abs=1e-9)
        assert res.converged

    def test_one_step(self):
        prof = TreeProfile((3, 2), (0.4, 0.6))
        res = one_arm(prof, 1, 2)
        assert res.value == pytest.approx(1 - (1 - 0.6) ** 2)

    def test_not_converged_flag(self):
        res = one_arm(homogeneous(2, 0.5, 200), 0, tol=1e-9)
        assert not res.converged
        assert res.rel_gap > 1e-9


class TestTwoTimeEdgeJoint:
    def test_perfect_correlation_at_zero(self):
        law = two_time_edge_joint(0.5, 0.0)
        assert law.p11 == pytest.approx(0.5)
        assert law.p10 == pytest.approx(0.0)

    def test_independence_limit(self):
        law = two_time_edge_joint(0.5, 80.0)
        assert law.p11 == pytest.approx(0.25, abs=1e-12)

    def test_log2_value(self):
        assert two_time_edge_joint(0.5, math.log(2)).p11 == pytest.approx(3 / 8)

    @settings(max_examples=60, deadline=None)
    @given(p=st.floats(0.01, 0.99), t=st.floats(0.0, 100.0))
    def test_law_is_a_distribution_with_correct_marginals(self, p, t):
        law = two_time_edge_joint(p, t)
        total = law.p11 + law.p10 + law.p01 + law.p00
        assert total == pytest.approx(1.0, abs=1e-12)
        assert law.p11 + law.p10 == pytest.approx(p, abs=1e-12)
        for v in (law.p11, law.p10, law.p01, law.p00):
            assert -1e-15 <= v <= 1.0


class TestTwoTimeSurvival:
    def test_t_zero_matches_one_arm(self):
        prof = homogeneous(3, 0.4, 30)
        a = connect_probs(prof, 30)
        tab = two_time_survival(prof, 0, 30, 0.0)
        assert tab.q_t == pytest.approx(a[0], abs=1e-12)
        assert tab.q_tilde_t == pytest.approx(1 - a[0], abs=1e-12)

    def test_large_t_matches_square(self):
        prof = homogeneous(3, 0.4, 30)
        a = connect_probs(prof, 30)
        tab = two_time_survival(prof, 0, 30, 50.0)
        assert tab.q_t == pytest.approx(a[0] ** 2, abs=1e-9)

    def test_binary_example(self):
        tab = two_time_survival(homogeneous(2, 0.5, 1), 0, 1, math.log(2))
        assert tab.q_t == pytest.approx(41 / 64, abs=1e-14)

    def test_path_closed_form(self):
        prof = TreeProfile((1, 1), (0.5, 0.8))
        t = 0.37
        tab = two_time_survival(prof, 0, 2, t)
        expect = two_time_edge_joint(0.5, t).p11 * two_time_edge_joint(0.8, t).p11
        assert tab.q_t == pytest.approx(expect, abs=1e-12)

    def test_monotone_in_t_and_bracketed(self):
        prof = homogeneous(2, 0.55, 50)
        q = connect_probs(prof, 50)[0]
        prev = q
        for t in (0.01, 0.1, 0.5, 1.0, 5.0):
            tab = two_time_survival(prof, 0, 50, t)
            assert q * q - 1e-12 <= tab.q_t <= prev + 1e-12
            assert tab.q_tilde_t >= tab.q_tilde**2 - 1e-15
            prev = tab.q_t


class TestCorrelationRatio:
    def test_lower_barrier_at_t_one(self):
        prof = homogeneous(2, 0.55, 100)
        res = correlation_ratio(prof, 5, 100, [1.0])
        assert res.c_emp >= 1.0 - 1e-12

    def test_default_grid_spans_crossover(self):
        grid = default_t_grid(100)
        assert min(grid) == pytest.approx(0.01) and max(grid) == 1.0

    def test_rejects_bad_grid(self):
        with pytest.raises(EngineError):
            correlation_ratio(homogeneous(2, 0.55, 50), 5, 50, [0.0, 2.0])


class TestLeftmost:
    def test_supercritical_fixed_point(self):
        res = leftmost_child_prob(homogeneous(2, 0.6, 600), 5, 600)
        assert res.b == pytest.approx(0.6 * 5 / 9, abs=1e-9)

    def test_path_degenerate(self):
        prof = TreeProfile((1,) * 6, (0.7,) * 6)
        res = leftmost_child_prob(prof, 2, 6)
        assert res.b == pytest.approx(0.7 * 0.7**3, abs=1e-12)

    def test_product_ratio_stable_in_n(self):
        prof = build_profile(ProfileSpec(kind="target_growth", depth=4000,
                                         target_kind="power", exponent=1.5))
        r1 = leftmost_child_prob(prof, 100, 4000)
        r2 = leftmost_child_prob(prof, 1000, 4000)
        assert r1.product_ratio == pytest.approx(r2.product_ratio, rel=0.5)
        assert r1.conduit_product == pytest.approx(r2.conduit_product, rel=0.5)

    def test_conduit_mean_formula(self):
        prof = homogeneous(2, 0.6, 200)
        res = leftmost_child_prob(prof, 8, 200)
        b7 = leftmost_child_prob(prof, 7, 200).b
        assert res.mean_conduits == pytest.approx(b7 * prof.w[7] * 2, rel=1e-10)


class TestInfluence:
    def test_lone_edge(self):
        prof = TreeProfile((1,), (0.5,))
        tab = influence_table(prof, 1)
        assert tab.influence[0] == pytest.approx(1.0)
        assert tab.u[0] == pytest.approx(1.0)
        assert tab.expected_boundary == pytest.approx(0.5)

    def test_binary_one_level(self):
        tab = influence_table(homogeneous(2, 0.5, 1), 1)
        assert tab.influence[0] == pytest.approx(0.5)
        assert tab.u[0] == pytest.approx(1.0)
        assert tab.expected_boundary == pytest.approx(0.5)

    def test_two_level_path(self):
        prof = TreeProfile((1, 1), (0.5, 0.8))
        tab = influence_table(prof, 2)
        assert tab.influence[0] == pytest.approx(0.8)
        assert tab.influence[1] == pytest.approx(0.5)
        assert tab.flip_intensity == pytest.approx(0.56)

    def test_flip_intensity_equals_boundary(self):
        prof = build_profile(ProfileSpec(kind="target_growth", depth=500,
                                         target_kind="power", exponent=1.5))
        tab = influence_table(prof, 400)
        assert tab.flip_intensity == pytest.approx(tab.expected_boundary, rel=1e-12)

    def test_tail_bound_constant_finite(self):
        prof = build_profile(ProfileSpec(kind="target_growth", depth=2000,
                                         target_kind="poly_log", exponent=2.0))
        tab = influence_table(prof, 1000)
        assert 0 < tab.tail_bound_constant < 100.0


class TestRegimeReport:
    def test_grid_guard(self):
        prof = homogeneous(2, 0.5, 1000)
        with pytest.raises(EngineError):
            regime_report(prof, [900])

    def test_power3_converges(self):
        prof = build_profile(ProfileSpec(kind="target_growth", depth=4000,
                                         target_kind="power", exponent=3.0))
        rep = regime_report(prof, [50, 100, 500, 1000], cauchy_tol=1e-3)
        assert rep.classification == "finite-components"
        assert rep.flip_proxy_growth == "bounded"

    def test_power15_flips(self):
        prof = build_profile(ProfileSpec(kind="target_growth", depth=4000,
                                         target_kind="power", exponent=1.5))
        rep = regime_report(prof, [50, 100, 500, 1000])
        assert rep.classification == "infinite-flips"

    def test_supercritical_homogeneous(self):
        rep = regime_report(homogeneous(2, 0.55, 1000), [10, 100, 500])
        assert rep.classification == "finite-components"
