"""Two-block bridge gadgets: static and dynamical connectivity estimation.

A gadget of index j is two copies of a multi-edge square-grid box joined by
9 * 2^j disjoint bridge paths of j edges each.  The box is the grid square of
a given radius centered on the midpoint of the attachment row A_j = {(i, 0) :
1 <= i <= 9 * 2^j}; each grid adjacency carries m parallel edges; terminals
x, y are the two copies of (0, 0).  At p = 1/2 around nine bridges are open
at any instant regardless of j, but each open bridge dies at rate ~ j/2, so
connections become temporally unstable as j grows while p < 1/2 starves the
bridges entirely.

Monte Carlo here is plain BFS connectivity per replica (static), and an
event-driven pass with a witness-path certificate (dynamical): connectivity
persists between events, a specific open x-y path certifies it, and only the
death of a witness edge (with no open parallel partner) forces a BFS rebuild.
A replica fails at the first event leaving x, y disconnected.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .util import jit_kernel, poisson_event_times, replica_rng, sample_mean_se


class GadgetError(ValueError):
    pass


@dataclass(frozen=True)
class GadgetGraph:
    """Explicit multigraph with marked terminals and bridge metadata.

    Edges are ordered [block-1 bundles, block-2 bundles, bridges]; parallel
    edges of one adjacency are consecutive, so block edge e belongs to bundle
    e // m.  Bridge edges are singletons ordered bridge-major, slot-minor.
    """

    j: int
    m: int
    box_radius: int
    center: int
    n_vertices: int
    edge_u: np.ndarray = field(repr=False)
    edge_v: np.ndarray = field(repr=False)
    x: int
    y: int
    n_block_edges: int  # both copies; bundle-aligned
    n_bridges: int
    bridge_len: int
    default_p: float = 0.5

    @property
    def n_edges(self) -> int:
        return self.edge_u.size

    def bridge_edge_index(self, bridge: int, slot: int) -> int:
        return self.n_block_edges + bridge * self.bridge_len + slot


def _block_edges(x0: int, x1: int, r: int, m: int):
    """Grid box [x0, x1] x [-r, r] with m parallel edges per adjacency."""
    width, height = x1 - x0 + 1, 2 * r + 1

    def vid(x, y):
        return (x - x0) * height + (y + r)

    us, vs = [], []
    for x in range(x0, x1 + 1):
        for y in range(-r, r + 1):
            if x < x1:
                us.append(vid(x, y))
                vs.append(vid(x + 1, y))
            if y < r:
                us.append(vid(x, y))
                vs.append(vid(x, y + 1))
    u = np.repeat(np.asarray(us, dtype=np.int64), m)
    v = np.repeat(np.asarray(vs, dtype=np.int64), m)
    return width * height, u, v, vid


def build_gadget(j: int, m: int, box_radius: int, center: Optional[int] = None,
                 default_p: float = 0.5) -> GadgetGraph:
    """Assemble the index-j gadget.

    The box must contain the attachment row: with the default center at
    9 * 2^(j-1) this forces box_radius >= 9 * 2^(j-1).
    """
    if j < 1 or m < 1:
        raise GadgetError("need j >= 1 and m >= 1")
    n_attach = 9 * (1 << j)
    center = (n_attach // 2) if center is None else center
    x0, x1 = center - box_radius, center + box_radius
    if x0 > 0 or x1 < n_attach:
        raise GadgetError(
            f"box too small for the attachment row: need x-range [0, {n_attach}], "
            f"got [{x0}, {x1}]"
        )
    nb, bu, bv, vid = _block_edges(x0, x1, box_radius, m)
    edge_u = [bu, bu + nb]
    edge_v = [bv, bv + nb]
    next_vertex = 2 * nb
    br_u, br_v = [], []
    for i in range(1, n_attach + 1):
        a, b = vid(i, 0), vid(i, 0) + nb
        chain = [a] + list(range(next_vertex, next_vertex + j - 1)) + [b]
        next_vertex += j - 1
        for s in range(j):
            br_u.append(chain[s])
            br_v.append(chain[s + 1])
    edge_u.append(np.asarray(br_u, dtype=np.int64))
    edge_v.append(np.asarray(br_v, dtype=np.int64))
    return GadgetGraph(
        j=j,
        m=m,
        box_radius=box_radius,
        center=center,
        n_vertices=next_vertex,
        edge_u=np.concatenate(edge_u),
        edge_v=np.concatenate(edge_v),
        x=vid(0, 0),
        y=vid(0, 0) + nb,
        n_block_edges=2 * bu.size,
        n_bridges=n_attach,
        bridge_len=j,
        default_p=default_p,
    )


def expected_counts(j: int, m: int, box_radius: int) -> tuple[int, int]:
    """Closed-form (|V|, |E|) for structural cross-checks."""
    side = 2 * box_radius + 1
    n_attach = 9 * (1 << j)
    n_v = 2 * side * side + n_attach * (j - 1)
    n_e = 2 * m * 2 * side * (side - 1) + n_attach * j
    return n_v, n_e


@dataclass(frozen=True)
class Csr:
    indptr: np.ndarray
    nbr_vertex: np.ndarray
    nbr_edge: np.ndarray


def build_csr(n_vertices: int, edge_u: np.ndarray, edge_v: np.ndarray) -> Csr:
    ends = np.concatenate([edge_u, edge_v])
    others = np.concatenate([edge_v, edge_u])
    eids = np.tile(np.arange(edge_u.size, dtype=np.int64), 2)
    order = np.argsort(ends, kind="stable")
    indptr = np.zeros(n_vertices + 1, dtype=np.int64)
    np.cumsum(np.bincount(ends, minlength=n_vertices), out=indptr[1:])
    return Csr(indptr=indptr, nbr_vertex=others[order], nbr_edge=eids[order])


def _bfs_open(indptr, nbr_v, nbr_e, open_state, src, target_mask,
              visited, stamp, queue, parent_edge):
    """BFS over open edges from src; returns first reached target or -1."""
    visited[src] = stamp
    parent_edge[src] = -1
    if target_mask[src]:
        return src
    queue[0] = src
    head, tail = 0, 1
    while head < tail:
        u = queue[head]
        head += 1
        for idx in range(indptr[u], indptr[u + 1]):
            if open_state[nbr_e[idx]]:
                w = nbr_v[idx]
                if visited[w] != stamp:
                    visited[w] = stamp
                    parent_edge[w] = nbr_e[idx]
                    if target_mask[w]:
                        return w
                    queue[tail] = w
                    tail += 1
    return -1


# Rebind so the persistence kernel below calls the compiled version.
_bfs_open = jit_kernel(_bfs_open)
_bfs_open_jit = _bfs_open


def _persistence_core(indptr, nbr_v, nbr_e, edge_u, edge_v, n_block_edges, m,
                      open_state, p, toggle_mode, ev_times, ev_edges, ev_us,
                      src, dst_mask, visited, stamp0, queue, parent_edge,
                      witness, wstamp0):
    """Witness-certified all-times connectivity over one event stream.

    Returns (survived, fail_time, n_bfs, stamp, wstamp).  open_state is
    consumed destructively.  In toggle_mode each event flips its edge (exact
    for p = 1/2, where refreshes that change state form a rate-1/2 Poisson
    stream); otherwise events are refreshes resampling to open w.p. p.
    """
    stamp = stamp0 + 1
    wstamp = wstamp0 + 1
    n_bfs = 1
    reached = _bfs_open(indptr, nbr_v, nbr_e, open_state, src, dst_mask,
                        visited, stamp, queue, parent_edge)
    if reached < 0:
        return False, 0.0, n_bfs, stamp, wstamp
    v = reached
    while v != src:
        e = parent_edge[v]
        witness[e] = wstamp
        v = edge_u[e] + edge_v[e] - v

    for i in range(ev_times.size):
        e = ev_edges[i]
        if toggle_mode:
            new_open = open_state[e] == 0
        else:
            new_open = ev_us[i] < p
        if new_open == (open_state[e] == 1):
            continue
        open_state[e] = 1 if new_open else 0
        if new_open or witness[e] != wstamp:
            continue  # openings and non-witness closings keep the certificate
        repaired = False
        if e < n_block_edges:
            g = (e // m) * m
            for e2 in range(g, g + m):
                if e2 != e and open_state[e2]:
                    witness[e2] = wstamp
                    repaired = True
                    break
        if repaired:
            continue
        stamp += 1
        wstamp += 1
        n_bfs += 1
        reached = _bfs_open(indptr, nbr_v, nbr_e, open_state, src, dst_mask,
                            visited, stamp, queue, parent_edge)
        if reached < 0:
            return False, ev_times[i], n_bfs, stamp, wstamp
        v = reached
        while v != src:
            e2 = parent_edge[v]
            witness[e2] = wstamp
            v = edge_u[e2] + edge_v[e2] - v
    return True, math.inf, n_bfs, stamp, wstamp


_persistence_core_jit = jit_kernel(_persistence_core)


class _Scratch:
    def __init__(self, n_vertices: int, n_edges: int):
        self.visited = np.zeros(n_vertices, dtype=np.int64)
        self.queue = np.empty(n_vertices, dtype=np.int64)
        self.parent_edge = np.empty(n_vertices, dtype=np.int64)
        self.witness = np.zeros(n_edges, dtype=np.int64)
        self.stamp = 0
        self.wstamp = 0


def _single_target_mask(n_vertices: int, target: int) -> np.ndarray:
    mask = np.zeros(n_vertices, dtype=np.uint8)
    mask[target] = 1
    return mask


def connect_estimate(graph: GadgetGraph, p: float, replicas: int, seed: int):
    """P(x <-> y) at edge density p: i.i.d. sampling + BFS per replica."""
    est = connect_estimate_grid(graph, [p], replicas, seed)
    return est[0]


def connect_estimate_grid(graph: GadgetGraph, p_grid: Sequence[float],
                          replicas: int, seed: int):
    """Common-random-number estimates across a p grid.

    One uniform per edge per replica serves every p, so per-replica outcomes
    are monotone in p by construction.
    """
    if replicas < 2:
        raise GadgetError("need at least 2 replicas")
    p_grid = [float(p) for p in p_grid]
    csr = build_csr(graph.n_vertices, graph.edge_u, graph.edge_v)
    scratch = _Scratch(graph.n_vertices, graph.n_edges)
    mask = _single_target_mask(graph.n_vertices, graph.y)
    outcomes = np.zeros((len(p_grid), replicas))
    for r in range(replicas):
        u = replica_rng(seed, r).random(graph.n_edges)
        for ip, p in enumerate(p_grid):
            if p <= 0.0:
                outcomes[ip, r] = 0.0
                continue
            if p >= 1.0:
                open_state = np.ones(graph.n_edges, dtype=np.uint8)
            else:
                open_state = (u < p).astype(np.uint8)
            scratch.stamp += 1
            reached = _bfs_open_jit(
                csr.indptr, csr.nbr_vertex, csr.nbr_edge, open_state, graph.x,
                mask, scratch.visited, scratch.stamp, scratch.queue,
                scratch.parent_edge,
            )
            outcomes[ip, r] = 1.0 if reached >= 0 else 0.0
    return [sample_mean_se(outcomes[ip]) for ip in range(len(p_grid))]


def persistence_estimate(graph: GadgetGraph, p: float, epsilon: float,
                         replicas: int, seed: int):
    """P(x <-> y at every t in [0, epsilon]) under refresh dynamics."""
    if replicas < 2:
        raise GadgetError("need at least 2 replicas")
    if not (0.0 < p < 1.0):
        raise GadgetError("p must lie in (0, 1)")
    if epsilon < 0.0:
        raise GadgetError("epsilon must be nonnegative")
    csr = build_csr(graph.n_vertices, graph.edge_u, graph.edge_v)
    scratch = _Scratch(graph.n_vertices, graph.n_edges)
    mask = _single_target_mask(graph.n_vertices, graph.y)
    outcomes = np.zeros(replicas)
    for r in range(replicas):
        rng = replica_rng(seed, r)
        open_state = (rng.random(graph.n_edges) < p).astype(np.uint8)
        times = poisson_event_times(rng, float(graph.n_edges), epsilon)
        edges = rng.integers(0, graph.n_edges, times.size, dtype=np.int64)
        us = rng.random(times.size)
        survived, _ft, _nb, scratch.stamp, scratch.wstamp = _persistence_core_jit(
            csr.indptr, csr.nbr_vertex, csr.nbr_edge, graph.edge_u, graph.edge_v,
            graph.n_block_edges, graph.m, open_state, p, False, times, edges, us,
            graph.x, mask, scratch.visited, scratch.stamp, scratch.queue,
            scratch.parent_edge, scratch.witness, scratch.wstamp,
        )
        outcomes[r] = 1.0 if survived else 0.0
    return sample_mean_se(outcomes)


def block_one_arm(m: int, radius: int, p: float, replicas: int, seed: int):
    """P(origin reaches the boundary ring of a centered radius-r box)."""
    n_v, eu, ev, vid = _block_edges(-radius, radius, radius, m)
    csr = build_csr(n_v, eu, ev)
    scratch = _Scratch(n_v, eu.size)
    mask = np.zeros(n_v, dtype=np.uint8)
    for x in range(-radius, radius + 1):
        for y in range(-radius, radius + 1):
            if max(abs(x), abs(y)) == radius:
                mask[vid(x, y)] = 1
    src = vid(0, 0)
    outcomes = np.zeros(replicas)
    for r in range(replicas):
        open_state = (replica_rng(seed, r).random(eu.size) < p).astype(np.uint8)
        scratch.stamp += 1
        reached = _bfs_open_jit(
            csr.indptr, csr.nbr_vertex, csr.nbr_edge, open_state, src, mask,
            scratch.visited, scratch.stamp, scratch.queue, scratch.parent_edge,
        )
        outcomes[r] = 1.0 if reached >= 0 else 0.0
    return sample_mean_se(outcomes)


def select_multiplicity(radius: int, p: float = 0.5, target: float = 0.95,
                        replicas: int = 800, seed: int = 0, m_max: int = 6) -> tuple:
    """Smallest m whose block one-arm estimate meets the target.

    Desk-scale stand-in for requiring a near-certain origin-to-distance
    connection in the parallel-edge grid.  Returns (m, {m: (est, se)}).
    """
    history = {}
    for m in range(1, m_max + 1):
        est, se = block_one_arm(m, radius, p, replicas, seed)
        history[m] = (est, se)
        if est >= target:
            return m, history
    raise GadgetError(f"no m <= {m_max} reaches block one-arm {target}")


# ---------------------------------------------------------------------------
# Paired trend suite (shared blocks + nested bridge coupling across j)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TrendReport:
    """Paired gadget trends across j.

    connect[p][j] and persistence[j] are (estimate, SE); diffs hold the
    paired adjacent differences est(j) - est(j+1) with their SEs, whose
    positivity at 3 SE certifies a strict decrease.  Pairing shares the block
    configuration and event streams across j and couples bridge slots in a
    nested way, which removes the j-independent block noise from the
    differences.
    """

    js: tuple
    m: int
    radius: int
    center: int
    m_history: dict
    connect: dict
    connect_diffs: dict
    persistence: dict
    persistence_diffs: tuple
    replicas_static: int
    replicas_persist: int


def _paired_graphs(js: Sequence[int], m: int, radius: int, center: int):
    graphs = [build_gadget(j, m, radius, center=center) for j in js]
    nb = graphs[0].n_block_edges
    for g in graphs[1:]:
        if g.n_block_edges != nb or g.x != graphs[0].x or g.y != graphs[0].y:
            raise GadgetError("paired suite requires identical blocks")
    return graphs


def gadget_trend_suite(
    js: Sequence[int] = (1, 2, 3),
    p_connect: Sequence[float] = (0.5, 0.45),
    p_persist: float = 0.5,
    epsilon: float = 0.5,
    radius: Optional[int] = None,
    m: Optional[int] = None,
    replicas_static: int = 30000,
    replicas_persist: int = 30000,
    seed: int = 20240,
    m_select_replicas: int = 800,
    m_target: float = 0.95,
) -> TrendReport:
    """Static and dynamical j-trends on a common probability space."""
    js = tuple(sorted(js))
    j_max = js[-1]
    min_radius = 9 * (1 << (j_max - 1))
    radius = min_radius if radius is None else radius
    center = 9 * (1 << (j_max - 1))
    if m is None:
        m, m_history = select_multiplicity(radius, 0.5, m_target, m_select_replicas, seed)
    else:
        m_history = {}
    graphs = _paired_graphs(js, m, radius, center)
    n_block = graphs[0].n_block_edges
    max_bridges, max_len = 9 * (1 << j_max), j_max
    csrs = [build_csr(g.n_vertices, g.edge_u, g.edge_v) for g in graphs]
    scratches = [_Scratch(g.n_vertices, g.n_edges) for g in graphs]
    masks = [_single_target_mask(g.n_vertices, g.y) for g in graphs]

    # --- static, CRN across j and across p ---
    p_connect = [float(p) for p in p_connect]
    outcomes = np.zeros((len(p_connect), len(js), replicas_static), dtype=np.float64)
    for r in range(replicas_static):
        rng = replica_rng(seed + 1, r)
        u_block = rng.random(n_block)
        u_bridge = rng.random((max_bridges, max_len))
        for ip, p in enumerate(p_connect):
            ob = u_block < p
            for ij, (g, csr, sc, mask) in enumerate(zip(graphs, csrs, scratches, masks)):
                ub = u_bridge[: g.n_bridges, : g.bridge_len].ravel() < p
                open_state = np.concatenate([ob, ub]).astype(np.uint8)
                sc.stamp += 1
                reached = _bfs_open_jit(
                    csr.indptr, csr.nbr_vertex, csr.nbr_edge, open_state, g.x,
                    mask, sc.visited, sc.stamp, sc.queue, sc.parent_edge,
                )
                outcomes[ip, ij, r] = 1.0 if reached >= 0 else 0.0

    connect = {}
    connect_diffs = {}
    for ip, p in enumerate(p_connect):
        connect[p] = {j: sample_mean_se(outcomes[ip, ij]) for ij, j in enumerate(js)}
        connect_diffs[p] = tuple(
            sample_mean_se(outcomes[ip, ij] - outcomes[ip, ij + 1])
            for ij in range(len(js) - 1)
        )

    # --- persistence, shared toggle streams (exact for p = 1/2) ---
    if abs(p_persist - 0.5) > 1e-12:
        raise GadgetError("paired persistence uses the toggle stream; needs p = 1/2")
    n_virtual = n_block + max_bridges * max_len
    virt_maps = []
    for g in graphs:
        vm = np.full(n_virtual, -1, dtype=np.int64)
        vm[:n_block] = np.arange(n_block)
        for i in range(g.n_bridges):
            for s in range(g.bridge_len):
                vm[n_block + i * max_len + s] = g.bridge_edge_index(i, s)
        virt_maps.append(vm)
    p_out = np.zeros((len(js), replicas_persist), dtype=np.float64)
    empty_us = np.empty(0, dtype=np.float64)
    for r in range(replicas_persist):
        rng = replica_rng(seed + 2, r)
        u_block = rng.random(n_block)
        u_bridge = rng.random((max_bridges, max_len))
        times = poisson_event_times(rng, 0.5 * n_virtual, epsilon)
        edges = rng.integers(0, n_virtual, times.size, dtype=np.int64)
        for ij, (g, csr, sc, mask, vm) in enumerate(
            zip(graphs, csrs, scratches, masks, virt_maps)
        ):
            local = vm[edges]
            keep = local >= 0
            ub = u_bridge[: g.n_bridges, : g.bridge_len].ravel() < p_persist
            open_state = np.concatenate([u_block < p_persist, ub]).astype(np.uint8)
            survived, _ft, _nb, sc.stamp, sc.wstamp = _persistence_core_jit(
                csr.indptr, csr.nbr_vertex, csr.nbr_edge, g.edge_u, g.edge_v,
                g.n_block_edges, g.m, open_state, p_persist, True,
                times[keep], local[keep], empty_us, g.x, mask,
                sc.visited, sc.stamp, sc.queue, sc.parent_edge, sc.witness,
                sc.wstamp,
            )
            p_out[ij, r] = 1.0 if survived else 0.0

    persistence = {j: sample_mean_se(p_out[ij]) for ij, j in enumerate(js)}
    persistence_diffs = tuple(
        sample_mean_se(p_out[ij] - p_out[ij + 1]) for ij in range(len(js) - 1)
    )
    return TrendReport(
        js=js,
        m=m,
        radius=radius,
        center=center,
        m_history=m_history,
        connect=connect,
        connect_diffs=connect_diffs,
        persistence=persistence,
        persistence_diffs=persistence_diffs,
        replicas_static=replicas_static,
        replicas_persist=replicas_persist,
    )
