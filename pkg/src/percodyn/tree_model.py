"""Spherically symmetric tree profiles.

A profile is the pair of level sequences (d_j, p_n): every vertex at level j
has d_j children, and every edge from level n-1 to level n is open with
probability p_n.  The central derived quantity is

    w_n = |T_n| * prod_{i<=n} p_i   (expected number of level-n vertices
                                     connected to the root),

kept in both linear and log form; |T_n| itself only ever exists in log form
because it overflows near depth 1000 for binary-like trees.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

DEGREE_CAP = 64

_TARGET_KINDS = ("poly_log", "power", "geometric")


class ProfileError(ValueError):
    pass


class SynthesisError(ProfileError):
    """Target growth cannot be realized within the degree/probability box."""


@dataclass(frozen=True)
class TreeProfile:
    """Immutable spherically symmetric tree, truncated at `depth` levels.

    degrees[j] is the child count of level-j vertices (j = 0..depth-1);
    edge_probs[n-1] is the probability of level-n edges (n = 1..depth).
    Derived arrays are indexed by level with entry 0 for the root, so
    w[0] = 1.0 and log_level_size[0] = 0.0.
    """

    degrees: tuple
    edge_probs: tuple
    meta: dict = field(default_factory=dict, compare=False)
    w: np.ndarray = field(init=False, repr=False, compare=False)
    log_w: np.ndarray = field(init=False, repr=False, compare=False)
    log_level_size: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        degrees = tuple(int(d) for d in self.degrees)
        probs = tuple(float(p) for p in self.edge_probs)
        if len(degrees) == 0:
            raise ProfileError("depth must be at least 1")
        if len(probs) != len(degrees):
            raise ProfileError("need one edge probability per level")
        if any(d < 1 for d in degrees):
            raise ProfileError("all degrees must be >= 1")
        if any(not (0.0 < p < 1.0) for p in probs):
            raise ProfileError("edge probabilities must lie strictly in (0, 1)")
        object.__setattr__(self, "degrees", degrees)
        object.__setattr__(self, "edge_probs", probs)

        log_d = np.log(np.asarray(degrees, dtype=np.float64))
        log_p = np.log(np.asarray(probs, dtype=np.float64))
        log_level = np.concatenate([[0.0], np.cumsum(log_d)])
        log_w = np.concatenate([[0.0], np.cumsum(log_d + log_p)])
        with np.errstate(over="ignore"):
            w = np.exp(log_w)
        object.__setattr__(self, "log_level_size", log_level)
        object.__setattr__(self, "log_w", log_w)
        object.__setattr__(self, "w", w)

    @property
    def depth(self) -> int:
        return len(self.degrees)

    @property
    def p_min(self) -> float:
        return min(self.edge_probs)

    @property
    def p_max(self) -> float:
        return max(self.edge_probs)

    def degree(self, j: int) -> int:
        """Child count of a level-j vertex."""
        return self.degrees[j]

    def prob(self, n: int) -> float:
        """Probability of edges joining level n-1 to level n (1-based)."""
        return self.edge_probs[n - 1]

    def edge_count(self, n: int) -> int:
        """Exact number of edges in the first n levels (integer arithmetic)."""
        total, level = 0, 1
        for j in range(n):
            level *= self.degrees[j]
            total += level
        return total

    def to_json_dict(self) -> dict:
        return {
            "degrees": list(self.degrees),
            "edge_probs": list(self.edge_probs),
            "meta": self.meta,
        }

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json_dict(), indent=2) + "\n")

    @classmethod
    def from_json_dict(cls, d: dict) -> "TreeProfile":
        return cls(tuple(d["degrees"]), tuple(d["edge_probs"]), meta=d.get("meta", {}))

    @classmethod
    def load(cls, path) -> "TreeProfile":
        return cls.from_json_dict(json.loads(Path(path).read_text()))


@dataclass(frozen=True)
class ProfileSpec:
    """Declarative profile request.

    kind: "explicit" | "homogeneous" | "target_growth".
    For target_growth, target_kind selects the growth family
      poly_log:  c * n * (ln(n+2))**alpha
      power:     c * n**theta
      geometric: c * gamma**n
    with `exponent` the alpha/theta/gamma parameter.
    """

    kind: str
    depth: int
    degrees: Optional[Sequence[int]] = None
    edge_probs: Optional[Sequence[float]] = None
    degree: Optional[int] = None
    prob: Optional[float] = None
    target_kind: str = "poly_log"
    exponent: float = 2.0
    scale: float = 1.0
    p_range: tuple = (0.3, 0.7)
    degree_cap: int = DEGREE_CAP

    def __post_init__(self):
        if self.depth < 1:
            raise ProfileError("depth must be at least 1")
        p_lo, p_hi = self.p_range
        if not (0.0 < p_lo <= p_hi < 1.0):
            raise ProfileError("p_range must satisfy 0 < p_lo <= p_hi < 1")
        if self.kind == "target_growth":
            if self.target_kind not in _TARGET_KINDS:
                raise ProfileError(f"unknown target_kind {self.target_kind!r}")
            if not math.isfinite(self.exponent):
                raise ProfileError("target exponent must be finite")

    def target_function(self) -> Callable[[int], float]:
        c, e = self.scale, self.exponent
        if self.target_kind == "poly_log":
            return lambda n: c * n * math.log(n + 2.0) ** e
        if self.target_kind == "power":
            return lambda n: c * n**e
        return lambda n: c * e**n


def build_profile(spec: ProfileSpec) -> TreeProfile:
    """Materialize a profile from a spec (derived w arrays included)."""
    if spec.kind == "explicit":
        if spec.degrees is None or spec.edge_probs is None:
            raise ProfileError("explicit spec needs degrees and edge_probs")
        return TreeProfile(tuple(spec.degrees), tuple(spec.edge_probs), meta={"kind": "explicit"})
    if spec.kind == "homogeneous":
        if spec.degree is None or spec.prob is None:
            raise ProfileError("homogeneous spec needs degree and prob")
        return TreeProfile(
            (spec.degree,) * spec.depth,
            (spec.prob,) * spec.depth,
            meta={"kind": "homogeneous", "degree": spec.degree, "prob": spec.prob},
        )
    if spec.kind == "target_growth":
        profile, dev = synthesize_profile(
            spec.target_function(),
            spec.depth,
            spec.p_range,
            degree_cap=spec.degree_cap,
        )
        meta = dict(profile.meta)
        meta.update(
            {
                "kind": "target_growth",
                "target_kind": spec.target_kind,
                "exponent": spec.exponent,
                "scale": spec.scale,
            }
        )
        return TreeProfile(profile.degrees, profile.edge_probs, meta=meta)
    raise ProfileError(f"unknown profile kind {spec.kind!r}")


def homogeneous(degree: int, prob: float, depth: int) -> TreeProfile:
    return build_profile(ProfileSpec(kind="homogeneous", depth=depth, degree=degree, prob=prob))


def _best_step(ratio: float, p_lo: float, p_hi: float, p_mid: float, d_cap: int):
    """Choose (d, p) minimizing |d*p - ratio|, ties toward p_mid.

    If some integer d admits p = ratio/d inside [p_lo, p_hi] the error is
    exactly zero; among those the p closest to the midpoint wins, which makes
    the greedy deterministic.  Otherwise the boundary candidates are best.
    """
    d_lo = max(1, math.ceil(ratio / p_hi - 1e-12))
    d_hi = min(d_cap, math.floor(ratio / p_lo + 1e-12))
    if d_lo <= d_hi:
        # Zero-error band: p = ratio/d is feasible; ratio/d is monotone in d.
        best = None
        target_d = ratio / p_mid
        for d in {d_lo, d_hi, max(d_lo, min(d_hi, math.floor(target_d))),
                  max(d_lo, min(d_hi, math.ceil(target_d)))}:
            p = min(p_hi, max(p_lo, ratio / d))
            cand = (abs(p - p_mid), d, p)
            if best is None or cand < best:
                best = cand
        return best[1], best[2], 0.0
    candidates = []
    for d, p in ((max(1, min(d_cap, math.floor(ratio / p_hi))), p_hi),
                 (max(1, min(d_cap, math.ceil(ratio / p_lo))), p_lo),
                 (1, p_lo), (d_cap, p_hi)):
        err = abs(d * p - ratio)
        candidates.append((err, abs(p - p_mid), d, p))
    err, _, d, p = min(candidates)
    return d, p, err


def synthesize_profile(
    target: Callable[[int], float],
    depth: int,
    p_range: tuple = (0.3, 0.7),
    degree_cap: int = DEGREE_CAP,
    deviation_from: int = 16,
) -> tuple[TreeProfile, float]:
    """Greedy level-by-level fit of w_n to a positive nondecreasing target.

    At level n the pair (d_{n-1}, p_n) minimizing |w_{n-1} d p - target(n)|
    is chosen, ties broken toward the midpoint of p_range.  Returns the
    profile and the achieved max relative deviation sup |w_n/f(n) - 1| over
    n >= deviation_from (the start-up transient is excluded from the figure
    of merit but reported in meta).
    """
    p_lo, p_hi = p_range
    if not (0.0 < p_lo <= p_hi < 1.0):
        raise ProfileError("p_range must satisfy 0 < p_lo <= p_hi < 1")
    p_mid = 0.5 * (p_lo + p_hi)
    degrees, probs = [], []
    log_w = 0.0
    max_dev = 0.0
    max_dev_all = 0.0
    for n in range(1, depth + 1):
        f = float(target(n))
        if not (f > 0.0) or not math.isfinite(f):
            raise SynthesisError(f"target must be positive and finite, got f({n}) = {f}")
        ratio = f * math.exp(-log_w)
        if ratio > degree_cap * p_hi * (1.0 + 1e-9):
            raise SynthesisError(
                f"target grows faster than d_cap*p_hi = {degree_cap * p_hi:.3g} "
                f"per step at level {n} (needed factor {ratio:.3g})"
            )
        d, p, _ = _best_step(ratio, p_lo, p_hi, p_mid, degree_cap)
        degrees.append(d)
        probs.append(p)
        log_w += math.log(d) + math.log(p)
        dev = abs(math.exp(log_w - math.log(f)) - 1.0)
        max_dev_all = max(max_dev_all, dev)
        if n >= deviation_from:
            max_dev = max(max_dev, dev)
    meta = {
        "kind": "synthesized",
        "max_rel_deviation": max_dev,
        "max_rel_deviation_all_levels": max_dev_all,
        "deviation_from": deviation_from,
        "p_range": [p_lo, p_hi],
        "degree_cap": degree_cap,
    }
    return TreeProfile(tuple(degrees), tuple(probs), meta=meta), max_dev


@dataclass(frozen=True)
class RegimeLabel:
    """Percolation-regime classification of a profile from its w_n sequence."""

    label: str  # subcritical | critical-boundary | percolating | undetermined
    model: str  # "geometric" or "poly_log"
    alpha_fit: float
    beta_fit: float
    gamma_fit: float
    rel_tail: float
    residual: float
    partial_sum: float


def regime_label(
    profile: TreeProfile,
    tol_sum: float = 1e-6,
    beta_margin: float = 0.05,
    alpha_margin: float = 0.25,
    residual_threshold: float = 0.5,
) -> RegimeLabel:
    """Classify Sum 1/w_k as convergent (percolating) or divergent.

    Two routes: a numerically certified route (relative tail increment of the
    partial sums over the last half of the depth below tol_sum), and a fitted
    route applying the summability criterion to the better of two growth
    models, log w = gamma*n (geometric) or log w = c + beta*log n +
    alpha*loglog(n+2).  Fits within the stated margins of the boundary
    (beta = 1, alpha = 1) yield "critical-boundary".
    """
    depth = profile.depth
    if depth < 100:
        raise ProfileError("regime_label needs depth >= 100")
    with np.errstate(over="ignore"):
        inv_w = np.exp(-profile.log_w[1:])
    partial = np.cumsum(inv_w)
    s_half, s_full = partial[depth // 2 - 1], partial[-1]
    rel_tail = (s_full - s_half) / s_full

    n = np.arange(1, depth + 1, dtype=np.float64)
    lw = profile.log_w[1:]
    lo = min(8, depth // 4)
    sel = n >= lo

    def lstsq_fit(cols):
        a = np.column_stack(cols)
        coef, _, _, _ = np.linalg.lstsq(a, lw[sel], rcond=None)
        resid = lw[sel] - a @ coef
        return coef, float(np.sqrt(np.mean(resid**2)))

    (c_g, gamma), res_g = lstsq_fit([np.ones(sel.sum()), n[sel]])
    (c_p, beta, alpha), res_p = lstsq_fit(
        [np.ones(sel.sum()), np.log(n[sel]), np.log(np.log(n[sel] + 2.0))]
    )

    if rel_tail < tol_sum:
        label, model = "percolating", "partial-sum-cauchy"
    elif min(res_g, res_p) > residual_threshold:
        label, model = "undetermined", "none"
    elif res_g < res_p:
        model = "geometric"
        label = "percolating" if gamma > 1e-8 else "subcritical"
    else:
        model = "poly_log"
        if beta > 1.0 + beta_margin or (beta >= 1.0 - beta_margin and alpha > 1.0 + alpha_margin):
            label = "percolating"
        elif beta < 1.0 - beta_margin or (beta <= 1.0 + beta_margin and alpha < 1.0 - alpha_margin):
            label = "subcritical"
        else:
            label = "critical-boundary"
    return RegimeLabel(
        label=label,
        model=model,
        alpha_fit=float(alpha),
        beta_fit=float(beta),
        gamma_fit=float(gamma),
        rel_tail=float(rel_tail),
        residual=float(min(res_g, res_p)),
        partial_sum=float(s_full),
    )
