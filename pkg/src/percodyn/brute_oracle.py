"""Exhaustive-enumeration ground truth on tiny explicit trees.

Static events are summed over all 2^E edge configurations, two-time events
over all 4^E joint configurations weighted by the per-edge joint law of the
refresh dynamics.  Configurations are passed to event predicates as int
bitmasks (bit e = state of edge e).  Accumulation uses math.fsum, which is
exactly-rounded compensated summation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .exact_engine import two_time_edge_joint
from .tree_model import TreeProfile

MAX_STATIC_EDGES = 16
MAX_TWO_TIME_EDGES = 10


class OracleError(ValueError):
    pass


@dataclass(frozen=True)
class TinyTree:
    """Rooted tree with explicit per-edge probabilities.

    Vertex 0 is the root; edge e joins parent[e] to vertex e+1, so the edge
    and non-root vertex indexings coincide.
    """

    parent: tuple
    probs: tuple
    level: tuple = field(init=False)

    def __post_init__(self):
        parent = tuple(int(u) for u in self.parent)
        probs = tuple(float(p) for p in self.probs)
        if len(parent) != len(probs):
            raise OracleError("need one probability per edge")
        if any(not (0.0 < p < 1.0) for p in probs):
            raise OracleError("edge probabilities must lie in (0, 1)")
        for e, u in enumerate(parent):
            if not (0 <= u <= e):  # parents precede children: connected, rooted
                raise OracleError(f"edge {e}: parent {u} out of order")
        object.__setattr__(self, "parent", parent)
        object.__setattr__(self, "probs", probs)
        level = [0] * (len(parent) + 1)
        for e, u in enumerate(parent):
            level[e + 1] = level[u] + 1
        object.__setattr__(self, "level", tuple(level))

    @property
    def n_edges(self) -> int:
        return len(self.parent)

    @property
    def depth(self) -> int:
        return max(self.level)

    @classmethod
    def from_profile(cls, profile: TreeProfile, n_levels: int | None = None) -> "TinyTree":
        """Explode the first n_levels of a spherically symmetric profile."""
        n_levels = profile.depth if n_levels is None else n_levels
        parent, probs = [], []
        previous = [0]
        next_vertex = 1
        for lev in range(n_levels):
            current = []
            for u in previous:
                for _ in range(profile.degree(lev)):
                    parent.append(u)
                    probs.append(profile.prob(lev + 1))
                    current.append(next_vertex)
                    next_vertex += 1
            previous = current
        return cls(tuple(parent), tuple(probs))


def config_weights(tree: TinyTree) -> np.ndarray:
    """Product-measure weight of every configuration, indexed by bitmask."""
    m = tree.n_edges
    w = np.ones(1 << m)
    idx = np.arange(1 << m)
    for e, p in enumerate(tree.probs):
        w *= np.where(idx >> e & 1, p, 1.0 - p)
    return w


def root_connection_table(tree: TinyTree, target_level: int) -> np.ndarray:
    """Boolean table over configs of {root reaches target_level}."""
    m = tree.n_edges
    idx = np.arange(1 << m)
    reached = [np.ones(1 << m, dtype=bool)]  # vertex 0
    hit = np.zeros(1 << m, dtype=bool)
    if target_level == 0:
        return np.ones(1 << m, dtype=bool)
    for v in range(1, m + 1):
        r = reached[tree.parent[v - 1]] & (idx >> (v - 1) & 1).astype(bool)
        reached.append(r)
        if tree.level[v] == target_level:
            hit |= r
    return hit


def static_prob(tree: TinyTree, event) -> float:
    """P(event) under the product measure; event maps bitmask -> bool."""
    if tree.n_edges > MAX_STATIC_EDGES:
        raise OracleError(f"too many edges for static enumeration ({tree.n_edges})")
    w = config_weights(tree)
    return math.fsum(w[i] for i in range(w.size) if event(i))


def two_time_weight_matrix(tree: TinyTree, t: float) -> np.ndarray:
    """W[i, j] = P(config i at time 0 and config j at time t)."""
    m = tree.n_edges
    bits = (np.arange(1 << m)[:, None] >> np.arange(m) & 1).astype(np.intp)
    w = np.ones((1 << m, 1 << m))
    for e, p in enumerate(tree.probs):
        law = two_time_edge_joint(p, t)
        f = np.array([[law.p00, law.p01], [law.p10, law.p11]])
        w *= f[bits[:, None, e], bits[None, :, e]]
    return w


def two_time_prob(tree: TinyTree, t: float, event2) -> float:
    """P(event2(config_at_0, config_at_t)); event2 maps two bitmasks -> bool."""
    if tree.n_edges > MAX_TWO_TIME_EDGES:
        raise OracleError(f"too many edges for two-time enumeration ({tree.n_edges})")
    if t < 0.0:
        raise OracleError("t must be nonnegative")
    w = two_time_weight_matrix(tree, t)
    n = w.shape[0]
    return math.fsum(w[i, j] for i in range(n) for j in range(n) if event2(i, j))


def two_time_both_prob(tree: TinyTree, t: float, event) -> float:
    """P(event at time 0 and at time t) for a single static event.

    Vectorized product-form fast path of two_time_prob for events of the
    shape E x E, which covers every joint survival quantity.
    """
    if tree.n_edges > MAX_TWO_TIME_EDGES:
        raise OracleError(f"too many edges for two-time enumeration ({tree.n_edges})")
    w = two_time_weight_matrix(tree, t)
    ev = np.array([bool(event(i)) for i in range(w.shape[0])], dtype=np.float64)
    return float(ev @ w @ ev)


def pivotal_prob(tree: TinyTree, edge: int, event) -> float:
    """Influence of `edge`: P(toggling it flips the event)."""
    if tree.n_edges > MAX_STATIC_EDGES:
        raise OracleError(f"too many edges for static enumeration ({tree.n_edges})")
    if not (0 <= edge < tree.n_edges):
        raise OracleError(f"edge {edge} out of range")
    w = config_weights(tree)
    bit = 1 << edge
    p = tree.probs[edge]
    terms = []
    for i in range(w.size):
        if i & bit:
            continue
        if event(i) != event(i | bit):
            terms.append(w[i] / (1.0 - p))  # weight over the other edges
    return math.fsum(terms)


def count_connected(tree: TinyTree, target_level: int) -> np.ndarray:
    """Per-config count of target-level vertices connected to the root."""
    m = tree.n_edges
    idx = np.arange(1 << m)
    reached = [np.ones(1 << m, dtype=bool)]
    count = np.zeros(1 << m, dtype=np.int64)
    for v in range(1, m + 1):
        r = reached[tree.parent[v - 1]] & (idx >> (v - 1) & 1).astype(bool)
        reached.append(r)
        if tree.level[v] == target_level:
            count += r
    return count
