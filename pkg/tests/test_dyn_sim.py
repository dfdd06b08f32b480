import math

import numpy as np
import pytest

from percodyn.dyn_sim import (
    SimConfig,
    SimError,
    build_layout,
    monte_carlo,
    simulate_timeline,
    timeline_stats,
)
from percodyn.exact_engine import connect_probs, influence_table
from percodyn.tree_model import TreeProfile, homogeneous

SINGLE = TreeProfile((1,), (0.5,))


class TestLayout:
    def test_binary_layout(self):
        lay = build_layout(homogeneous(2, 0.5, 3), 3)
        assert lay.n_vertices == 1 + 2 + 4 + 8
        assert lay.n_edges == 14
        assert lay.parent[1] == 0 and lay.parent[2] == 0
        assert lay.parent[3] == 1 and lay.parent[6] == 2
        assert lay.level[7] == 3

    def test_edge_guard(self):
        prof = homogeneous(2, 0.5, 30)
        with pytest.raises(SimError):
            SimConfig(profile=prof, depth=30, replicas=2)


class TestSimulateTimeline:
    def test_zero_horizon(self):
        tl = simulate_timeline(SimConfig(profile=SINGLE, depth=1, horizon=0.0,
                                         replicas=1, seed=5), 0)
        assert len(tl.event_times) == 0
        stats = timeline_stats(tl)
        assert stats.components == (1 if tl.initial_status else 0)
        assert stats.time_avg_connected == float(tl.initial_status)

    def test_deterministic_given_seed(self):
        a = simulate_timeline(SimConfig(profile=homogeneous(2, 0.5, 4), depth=4,
                                        replicas=1, seed=9), 3)
        b = simulate_timeline(SimConfig(profile=homogeneous(2, 0.5, 4), depth=4,
                                        replicas=1, seed=9), 3)
        assert np.array_equal(a.event_times, b.event_times)
        assert np.array_equal(a.toggle_times, b.toggle_times)
        assert a.time_on == b.time_on

    def test_events_strictly_ordered(self):
        tl = simulate_timeline(SimConfig(profile=homogeneous(3, 0.4, 4), depth=4,
                                         replicas=1, seed=17), 0)
        assert np.all(np.diff(tl.event_times) > 0)
        assert tl.consistency_violations == 0

    def test_status_intervals_match_time_on(self):
        tl = simulate_timeline(SimConfig(profile=homogeneous(2, 0.55, 5), depth=5,
                                         horizon=2.0, replicas=1, seed=23), 1)
        total = sum(b - a for a, b in tl.status_intervals())
        assert total == pytest.approx(tl.time_on, abs=1e-12)

    def test_pivotality_against_recomputation(self):
        profile = TreeProfile((2, 1, 3), (0.55, 0.3, 0.7))
        layout = build_layout(profile, 3)

        def w_of(open_):
            cr = np.zeros(layout.n_vertices, np.int64)
            for v in range(layout.n_vertices - 1, 0, -1):
                if layout.level[v] == 3:
                    cr[v] += 1
                if open_[v - 1] and cr[v] > 0:
                    cr[layout.parent[v]] += cr[v]
            return cr[0]

        for rep in range(25):
            tl = simulate_timeline(SimConfig(profile=profile, depth=3, horizon=2.0,
                                             replicas=1, seed=71), rep)
            open_ = tl.initial_open.copy()
            assert w_of(open_) == tl.initial_w
            for k in range(len(tl.event_times)):
                e = int(tl.event_edges[k])
                before = w_of(open_)
                open_[e] = not open_[e]
                after = w_of(open_)
                assert after == tl.event_w[k]
                assert bool(tl.event_pivotal[k]) == ((before > 0) != (after > 0))
            assert tl.consistency_violations == 0


class TestTimelineStats:
    def _manual_timeline(self, dirs, times, initial, horizon=1.0):
        dirs = np.asarray(dirs, dtype=np.int8)
        times = np.asarray(times, dtype=np.float64)
        time_on = 0.0
        status, start = initial, 0.0
        for t, d in zip(times, dirs):
            if d < 0 and status:
                time_on += t - start
                status = False
            elif d > 0 and not status:
                start = t
                status = True
        if status:
            time_on += horizon - start
        return dict(replica_index=0, horizon=horizon, n_levels=1, n_edges=1,
                    initial_open=np.zeros(1, bool), initial_w=int(initial),
                    initial_status=initial, refresh_count=len(times),
                    switch_count=len(times), off_flips=int((dirs < 0).sum()),
                    on_flips=int((dirs > 0).sum()), consistency_violations=0,
                    switches_by_level=np.zeros(2, np.int64),
                    flips_by_level=np.zeros(2, np.int64),
                    toggle_times=times, toggle_dirs=dirs, time_on=time_on,
                    min_w=0, max_w=1, event_times=times,
                    event_edges=np.zeros(len(times), np.int64),
                    event_old=np.zeros(len(times), np.uint8),
                    event_pivotal=np.ones(len(times), np.uint8),
                    event_w=np.zeros(len(times), np.int64))

    def test_close_then_open(self):
        from percodyn.dyn_sim import Timeline

        tl = Timeline(**self._manual_timeline([-1, 1], [0.4, 0.7], True))
        stats = timeline_stats(tl)
        assert stats.components == 2
        assert stats.boundary == 2
        assert not stats.full_interval
        assert stats.time_avg_connected == pytest.approx(0.7)
        assert tl.status_intervals() == [(0.0, 0.4), (0.7, 1.0)]

    def test_full_interval(self):
        from percodyn.dyn_sim import Timeline

        tl = Timeline(**self._manual_timeline([], [], True))
        stats = timeline_stats(tl)
        assert stats.components == 1 and stats.full_interval

    def test_component_boundary_inequality(self):
        for rep in range(20):
            tl = simulate_timeline(SimConfig(profile=homogeneous(2, 0.5, 6), depth=6,
                                             horizon=1.0, replicas=1, seed=5), rep)
            s = timeline_stats(tl)
            assert s.components <= s.boundary // 2 + 1


class TestMonteCarlo:
    def test_single_edge_switch_and_flip_rates(self):
        stats = monte_carlo(SimConfig(profile=SINGLE, depth=1, horizon=1.0,
                                      replicas=30000, seed=42))
        assert stats.mean["switches"] == pytest.approx(0.5, abs=3 * stats.se["switches"])
        assert stats.mean["flips"] == pytest.approx(0.5, abs=3 * stats.se["flips"])
        assert stats.consistency_violations == 0

    def test_binary_depth1_flip_intensity(self):
        prof = homogeneous(2, 0.5, 1)
        exact = influence_table(prof, 1).flip_intensity
        stats = monte_carlo(SimConfig(profile=prof, depth=1, horizon=1.0,
                                      replicas=30000, seed=7))
        assert stats.mean["flips"] == pytest.approx(exact, abs=3 * stats.se["flips"])

    def test_boundary_matches_expectation_depth8(self):
        prof = homogeneous(2, 0.5, 8)
        exact = influence_table(prof, 8).expected_boundary
        stats = monte_carlo(SimConfig(profile=prof, depth=8, horizon=1.0,
                                      replicas=8000, seed=11))
        assert stats.mean["boundary"] == pytest.approx(exact, abs=3 * stats.se["boundary"])

    def test_stationarity(self):
        prof = homogeneous(2, 0.55, 6)
        a0 = connect_probs(prof, 6)[0]
        stats = monte_carlo(SimConfig(profile=prof, depth=6, horizon=1.0,
                                      replicas=8000, seed=13))
        assert stats.mean["time_avg_connected"] == pytest.approx(
            a0, abs=3 * stats.se["time_avg_connected"])
        assert stats.mean["initial_connected"] == pytest.approx(
            a0, abs=3 * stats.se["initial_connected"])

    def test_reversibility_flip_directions(self):
        prof = homogeneous(2, 0.5, 6)
        stats = monte_carlo(SimConfig(profile=prof, depth=6, horizon=1.0,
                                      replicas=8000, seed=17))
        se = math.hypot(stats.se["off_flips"], stats.se["on_flips"])
        assert abs(stats.mean["off_flips"] - stats.mean["on_flips"]) <= 3 * se

    def test_bit_identical_reruns_and_parallel(self):
        cfg = dict(profile=homogeneous(2, 0.5, 5), depth=5, horizon=1.0,
                   replicas=500, seed=3)
        a = monte_carlo(SimConfig(**cfg))
        b = monte_carlo(SimConfig(**cfg))
        c = monte_carlo(SimConfig(**cfg, n_jobs=3))
        assert a.mean == b.mean == c.mean
        assert a.se == b.se == c.se

    def test_replica_floor(self):
        with pytest.raises(SimError):
            monte_carlo(SimConfig(profile=SINGLE, depth=1, replicas=1))

    def test_bounds_on_w(self):
        stats = monte_carlo(SimConfig(profile=homogeneous(2, 0.5, 4), depth=4,
                                      replicas=200, seed=1, n_jobs=1),
                            keep_per_replica=True)
        assert np.all(stats.per_replica["min_w"] >= 0)
        assert np.all(stats.per_replica["max_w"] <= 16)
        assert np.all(stats.per_replica["time_avg_connected"] <= 1.0)
