"""Event-driven dynamical percolation on a depth-truncated tree.

Dynamics use the refresh representation: each edge carries a rate-1 Poisson
clock and on each ring resamples to open with probability p_e, realized as a
single rate-|E| stream with uniform edge choice.  The product measure is then
stationary by construction, and a refresh changes the edge state with
probability 2 p (1-p).

Per event the simulator maintains, for every vertex v, the number of
target-level vertices reachable from v through open edges inside v's subtree
(count_reach).  W_t is count_reach[root]; the root percolates iff W_t > 0.
The same upward pass that propagates a toggle decides whether the switching
edge is pivotal for {root <-> T_n}: the edge's lower endpoint must reach the
target below, the path to the root must be open, and no path vertex may own
an alternative live branch.  Every pivotal switch toggles the status, so the
recorded toggle times are exactly the boundary points of the percolating
time set; with the closed-set convention both switch directions are flip
times, and the two directions are counted separately.

Replicas draw from independent PCG64 streams keyed by (seed, replica_index),
so results are bit-identical under any parallel schedule.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .tree_model import TreeProfile
from .util import jit_kernel, poisson_event_times, replica_rng, sample_mean_se

MAX_EDGES = 1 << 26


class SimError(ValueError):
    pass


@dataclass(frozen=True)
class SimConfig:
    profile: TreeProfile
    depth: int
    horizon: float = 1.0
    replicas: int = 1
    seed: int = 0
    n_jobs: int = 1

    def __post_init__(self):
        if not (1 <= self.depth <= self.profile.depth):
            raise SimError(f"depth must lie in [1, {self.profile.depth}]")
        if self.horizon < 0.0:
            raise SimError("horizon must be nonnegative")
        if self.profile.edge_count(self.depth) > MAX_EDGES:
            raise SimError(f"edge count exceeds guard 2^26 at depth {self.depth}")


@dataclass(frozen=True)
class TreeLayout:
    """Flat arrays for the truncated tree: vertices in level order."""

    n_levels: int
    n_vertices: int
    n_edges: int
    parent: np.ndarray
    level: np.ndarray
    edge_prob: np.ndarray  # probability of edge e (joins parent[e+1] -> e+1)


def build_layout(profile: TreeProfile, depth: int) -> TreeLayout:
    counts = [1]
    for j in range(depth):
        counts.append(counts[-1] * profile.degree(j))
    offsets = np.concatenate([[0], np.cumsum(counts)])
    n_vertices = int(offsets[depth + 1])
    parent = np.empty(n_vertices, dtype=np.int64)
    level = np.empty(n_vertices, dtype=np.int64)
    parent[0], level[0] = -1, 0
    prob_chunks = []
    for k in range(1, depth + 1):
        idx = np.arange(counts[k], dtype=np.int64)
        parent[offsets[k] : offsets[k + 1]] = offsets[k - 1] + idx // profile.degree(k - 1)
        level[offsets[k] : offsets[k + 1]] = k
        prob_chunks.append(np.full(counts[k], profile.prob(k)))
    return TreeLayout(
        n_levels=depth,
        n_vertices=n_vertices,
        n_edges=n_vertices - 1,
        parent=parent,
        level=level,
        edge_prob=np.concatenate(prob_chunks) if prob_chunks else np.empty(0),
    )


def _sim_core(parent, level, edge_prob, n_levels, initial_open,
              ev_times, ev_edges, ev_us, horizon, record):
    """Single-replica event loop; numba-compiled when available.

    Returns counters, pivotal toggle times/directions, and (optionally) the
    full state-changing event record.
    """
    n_vertices = parent.size
    n_events = ev_times.size
    open_state = initial_open.copy()
    count_reach = np.zeros(n_vertices, dtype=np.int64)
    for v in range(n_vertices - 1, 0, -1):
        if level[v] == n_levels:
            count_reach[v] += 1
        if open_state[v - 1] and count_reach[v] > 0:
            count_reach[parent[v]] += count_reach[v]

    w = count_reach[0]
    w0 = w
    status = w > 0
    status0 = status
    min_w, max_w = w, w
    time_on = 0.0
    t_on_start = 0.0
    switch_count = 0
    off_flips = 0
    on_flips = 0
    violations = 0
    switches_by_level = np.zeros(n_levels + 1, dtype=np.int64)
    flips_by_level = np.zeros(n_levels + 1, dtype=np.int64)
    toggle_times = np.empty(n_events, dtype=np.float64)
    toggle_dirs = np.empty(n_events, dtype=np.int8)
    n_toggles = 0
    rec_n = n_events if record else 0
    rec_time = np.empty(rec_n, dtype=np.float64)
    rec_edge = np.empty(rec_n, dtype=np.int64)
    rec_old = np.empty(rec_n, dtype=np.uint8)
    rec_piv = np.empty(rec_n, dtype=np.uint8)
    rec_w = np.empty(rec_n, dtype=np.int64)
    n_rec = 0

    for i in range(n_events):
        e = ev_edges[i]
        new = ev_us[i] < edge_prob[e]
        old = open_state[e]
        if new == old:
            continue
        t = ev_times[i]
        v = e + 1

        # pivotality from the pre-toggle state of the OTHER edges
        piv = count_reach[v] > 0
        if piv:
            w_vert = v
            open_w = old
            while True:
                u = parent[w_vert]
                contrib = count_reach[w_vert] if open_w else 0
                if count_reach[u] - contrib > 0:
                    piv = False
                    break
                if u == 0:
                    break
                if not open_state[u - 1]:
                    piv = False
                    break
                open_w = True
                w_vert = u

        open_state[e] = new
        if count_reach[v] > 0:
            delta = count_reach[v] if new else -count_reach[v]
            w_vert = v
            while True:
                u = parent[w_vert]
                count_reach[u] += delta
                if u == 0:
                    break
                if not open_state[u - 1]:
                    break
                w_vert = u
        w = count_reach[0]

        switch_count += 1
        switches_by_level[level[v]] += 1
        status_after = w > 0
        if (status_after != status) != piv:
            violations += 1
        if piv:
            flips_by_level[level[v]] += 1
            if status:
                off_flips += 1
                time_on += t - t_on_start
                toggle_dirs[n_toggles] = -1
            else:
                on_flips += 1
                t_on_start = t
                toggle_dirs[n_toggles] = 1
            toggle_times[n_toggles] = t
            n_toggles += 1
            status = status_after
        if w < min_w:
            min_w = w
        if w > max_w:
            max_w = w
        if record:
            rec_time[n_rec] = t
            rec_edge[n_rec] = e
            rec_old[n_rec] = 1 if old else 0
            rec_piv[n_rec] = 1 if piv else 0
            rec_w[n_rec] = w
            n_rec += 1

    if status:
        time_on += horizon - t_on_start
    return (
        switch_count,
        off_flips,
        on_flips,
        violations,
        switches_by_level,
        flips_by_level,
        toggle_times[:n_toggles],
        toggle_dirs[:n_toggles],
        time_on,
        min_w,
        max_w,
        w0,
        status0,
        rec_time[:n_rec],
        rec_edge[:n_rec],
        rec_old[:n_rec],
        rec_piv[:n_rec],
        rec_w[:n_rec],
    )


_sim_core_jit = jit_kernel(_sim_core)


@dataclass(frozen=True)
class Timeline:
    """One simulated trajectory.

    The event list holds the state-changing refreshes only (time, edge, old
    state, pivotal flag, W after the switch); refresh_count includes the
    silent ones.  Toggle times are the pivotal switches, i.e. the boundary
    of the percolating time set; status intervals are closed at their
    endpoints per the on-at-switch-times convention.
    """

    replica_index: int
    horizon: float
    n_levels: int
    n_edges: int
    initial_open: np.ndarray = field(repr=False)
    initial_w: int
    initial_status: bool
    refresh_count: int
    switch_count: int
    off_flips: int
    on_flips: int
    consistency_violations: int
    switches_by_level: np.ndarray
    flips_by_level: np.ndarray
    toggle_times: np.ndarray
    toggle_dirs: np.ndarray
    time_on: float
    min_w: int
    max_w: int
    event_times: np.ndarray = field(repr=False)
    event_edges: np.ndarray = field(repr=False)
    event_old: np.ndarray = field(repr=False)
    event_pivotal: np.ndarray = field(repr=False)
    event_w: np.ndarray = field(repr=False)

    @property
    def flip_count(self) -> int:
        return self.off_flips + self.on_flips

    def status_intervals(self) -> list:
        """Maximal closed intervals of {root <-> T_n} within [0, horizon]."""
        intervals = []
        status = self.initial_status
        start = 0.0
        for t, d in zip(self.toggle_times, self.toggle_dirs):
            if d > 0:
                start = t
                status = True
            else:
                if status:
                    intervals.append((start, float(t)))
                status = False
        if status:
            intervals.append((start, self.horizon))
        return intervals


def _replica_draws(layout: TreeLayout, config: SimConfig, replica_index: int):
    rng = replica_rng(config.seed, replica_index)
    initial = rng.random(layout.n_edges) < layout.edge_prob
    times = poisson_event_times(rng, float(layout.n_edges), config.horizon)
    edges = rng.integers(0, layout.n_edges, times.size, dtype=np.int64)
    us = rng.random(times.size)
    return initial, times, edges, us


def simulate_timeline(config: SimConfig, replica_index: int = 0) -> Timeline:
    """Run one replica, recording the full state-changing event list."""
    layout = build_layout(config.profile, config.depth)
    initial, times, edges, us = _replica_draws(layout, config, replica_index)
    out = _sim_core_jit(
        layout.parent, layout.level, layout.edge_prob, layout.n_levels,
        initial, times, edges, us, config.horizon, True,
    )
    (switches, off_flips, on_flips, violations, sw_lvl, fl_lvl, tog_t, tog_d,
     time_on, min_w, max_w, w0, status0, rt, re, ro, rp, rw) = out
    return Timeline(
        replica_index=replica_index,
        horizon=config.horizon,
        n_levels=layout.n_levels,
        n_edges=layout.n_edges,
        initial_open=initial,
        initial_w=int(w0),
        initial_status=bool(status0),
        refresh_count=int(times.size),
        switch_count=int(switches),
        off_flips=int(off_flips),
        on_flips=int(on_flips),
        consistency_violations=int(violations),
        switches_by_level=np.asarray(sw_lvl),
        flips_by_level=np.asarray(fl_lvl),
        toggle_times=np.asarray(tog_t),
        toggle_dirs=np.asarray(tog_d),
        time_on=float(time_on),
        min_w=int(min_w),
        max_w=int(max_w),
        event_times=np.asarray(rt),
        event_edges=np.asarray(re),
        event_old=np.asarray(ro),
        event_pivotal=np.asarray(rp),
        event_w=np.asarray(rw),
    )


METRICS = (
    "flips", "off_flips", "on_flips", "switches", "boundary", "components",
    "full_interval", "time_avg_connected", "min_w", "max_w", "initial_connected",
)


def _stats_from_toggles(initial_status: bool, toggle_dirs: np.ndarray, horizon: float,
                        time_on: float) -> tuple:
    """(components, boundary, full_interval, time_average) of the closed on-set.

    Components are maximal on-runs; every +1 toggle starts a new run and runs
    cannot merge.  Interval endpoints at 0 or horizon are not boundary points.
    """
    n_on = int(np.sum(toggle_dirs > 0))
    components = (1 if initial_status else 0) + n_on
    boundary = int(toggle_dirs.size)
    full = bool(initial_status and boundary == 0)
    time_avg = float(initial_status) if horizon == 0.0 else time_on / horizon
    return components, boundary, full, time_avg


@dataclass(frozen=True)
class ReplicaStats:
    replica_index: int
    flips: int
    off_flips: int
    on_flips: int
    switches: int
    boundary: int
    components: int
    full_interval: bool
    time_avg_connected: float
    min_w: int
    max_w: int
    initial_connected: bool
    consistency_violations: int


def timeline_stats(timeline: Timeline) -> ReplicaStats:
    components, boundary, full, time_avg = _stats_from_toggles(
        timeline.initial_status, timeline.toggle_dirs, timeline.horizon, timeline.time_on
    )
    if components > boundary // 2 + 1:
        raise SimError("component count exceeds boundary/2 + 1; corrupt timeline")
    return ReplicaStats(
        replica_index=timeline.replica_index,
        flips=timeline.flip_count,
        off_flips=timeline.off_flips,
        on_flips=timeline.on_flips,
        switches=timeline.switch_count,
        boundary=boundary,
        components=components,
        full_interval=full,
        time_avg_connected=time_avg,
        min_w=timeline.min_w,
        max_w=timeline.max_w,
        initial_connected=timeline.initial_status,
        consistency_violations=timeline.consistency_violations,
    )


@dataclass(frozen=True)
class SimStats:
    """Replica aggregate: per-metric sample mean and standard error."""

    replicas: int
    depth: int
    horizon: float
    seed: int
    mean: dict
    se: dict
    consistency_violations: int
    per_replica: Optional[dict] = field(default=None, repr=False, compare=False)

    def to_json_dict(self) -> dict:
        return {
            "replicas": self.replicas,
            "depth": self.depth,
            "horizon": self.horizon,
            "seed": self.seed,
            "metrics": {
                k: {"mean": self.mean[k], "se": self.se[k]} for k in sorted(self.mean)
            },
        }


def monte_carlo(config: SimConfig, keep_per_replica: bool = False) -> SimStats:
    """Replica sweep with deterministic, schedule-independent aggregation."""
    if config.replicas < 2:
        raise SimError("need at least 2 replicas")
    layout = build_layout(config.profile, config.depth)
    values = {m: np.empty(config.replicas) for m in METRICS}
    violations = np.empty(config.replicas, dtype=np.int64)

    def run_one(r: int) -> None:
        initial, times, edges, us = _replica_draws(layout, config, r)
        out = _sim_core_jit(
            layout.parent, layout.level, layout.edge_prob, layout.n_levels,
            initial, times, edges, us, config.horizon, False,
        )
        (switches, off_flips, on_flips, viol, _sw, _fl, tog_t, tog_d,
         time_on, min_w, max_w, _w0, status0, *_rest) = out
        components, boundary, full, time_avg = _stats_from_toggles(
            bool(status0), np.asarray(tog_d), config.horizon, float(time_on)
        )
        values["flips"][r] = off_flips + on_flips
        values["off_flips"][r] = off_flips
        values["on_flips"][r] = on_flips
        values["switches"][r] = switches
        values["boundary"][r] = boundary
        values["components"][r] = components
        values["full_interval"][r] = float(full)
        values["time_avg_connected"][r] = time_avg
        values["min_w"][r] = min_w
        values["max_w"][r] = max_w
        values["initial_connected"][r] = float(status0)
        violations[r] = viol

    if config.n_jobs > 1:
        with ThreadPoolExecutor(max_workers=config.n_jobs) as pool:
            list(pool.map(run_one, range(config.replicas)))
    else:
        for r in range(config.replicas):
            run_one(r)

    mean, se = {}, {}
    for m in METRICS:
        mean[m], se[m] = sample_mean_se(values[m])
    return SimStats(
        replicas=config.replicas,
        depth=config.depth,
        horizon=config.horizon,
        seed=config.seed,
        mean=mean,
        se=se,
        consistency_violations=int(violations.sum()),
        per_replica={m: v.copy() for m, v in values.items()} if keep_per_replica else None,
    )
