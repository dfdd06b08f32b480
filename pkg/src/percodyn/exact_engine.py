"""Closed-form per-level recursions for static and two-time tree quantities.

Everything here is a pure function of (profile, parameters).  The recurring
object is the backward connection recursion

    A(n) = 1,   A(k) = 1 - (1 - p_{k+1} A(k+1))^{d_k},

giving A(k) = P(a level-k vertex reaches level n inside its own subtree);
A(0) = P(root <-> T_n).  Products (1-x)^d are always evaluated through
log1p/expm1 so that the critical regimes (x ~ 1/n) keep full precision, and
every quantity that mixes |T_m| with path products is assembled in log space.

Percolation "to infinity" is approximated by percolation to a deep truncation
level N together with a relative-Cauchy certificate comparing N with N/2;
results carry the certificate rather than pretending N = infinity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .tree_model import TreeProfile

LOG_GUARD = 1e6  # |log| beyond this signals a malformed profile


class EngineError(ValueError):
    pass


def _check_level(profile: TreeProfile, n: int) -> None:
    if not (1 <= n <= profile.depth):
        raise EngineError(f"level {n} out of range [1, {profile.depth}]")


# ---------------------------------------------------------------------------
# Single-time connection probabilities
# ---------------------------------------------------------------------------

def connect_probs(profile: TreeProfile, n: int) -> np.ndarray:
    """A(k) for k = 0..n, the backward recursion toward target level n."""
    _check_level(profile, n)
    a = np.empty(n + 1)
    a[n] = 1.0
    for k in range(n - 1, -1, -1):
        x = profile.prob(k + 1) * a[k + 1]
        a[k] = -math.expm1(profile.degree(k) * math.log1p(-x))
    return a


@dataclass(frozen=True)
class StaticTable:
    """One-time exact quantities for the event {root <-> T_n}."""

    n: int
    a: np.ndarray  # A(k), k = 0..n
    p_positive: float  # P(W_n > 0) = A(0)
    p_one: float  # P(W_n = 1)
    log_p_one: float
    mean_w: float  # w_n (may overflow to inf; log form in profile)
    ratio2: float  # E[W_n^2] / w_n^2


def survival_and_moments(profile: TreeProfile, n: int) -> StaticTable:
    """P(W_n > 0), P(W_n = 1) and E[W_n^2]/w_n^2 by backward recursion.

    P(W_n = 1) uses the paired recursion on (z, s) with z the no-connection
    probability and s the exactly-one probability; the second-moment ratio
    collapses to 1/w_n + sum_k (1 - 1/d_k)/w_k after normalizing the pair
    decomposition over the splitting level, so it never materializes E[W^2].
    """
    _check_level(profile, n)
    a = connect_probs(profile, n)
    log_s = 0.0
    for k in range(n - 1, -1, -1):
        d, p = profile.degree(k), profile.prob(k + 1)
        lf = math.log1p(-p * a[k + 1])
        log_s += math.log(d * p) + (d - 1) * lf
        if abs(log_s) > LOG_GUARD:
            raise EngineError("log magnitude guard tripped; malformed profile")
    with np.errstate(over="ignore"):
        inv_w = np.exp(-profile.log_w[: n + 1])
    degree_factor = 1.0 - 1.0 / np.asarray(profile.degrees[:n], dtype=np.float64)
    ratio2 = float(inv_w[n] + np.sum(degree_factor * inv_w[:n]))
    return StaticTable(
        n=n,
        a=a,
        p_positive=float(a[0]),
        p_one=math.exp(log_s),
        log_p_one=log_s,
        mean_w=float(profile.w[n]),
        ratio2=ratio2,
    )


@dataclass(frozen=True)
class SurvivalSweep:
    """Arrays over n = 1..n_max of the StaticTable scalars (index n-1)."""

    n_max: int
    p_positive: np.ndarray
    log_p_one: np.ndarray
    ratio2: np.ndarray
    log_w: np.ndarray  # log w_n, n = 1..n_max


def survival_sweep(profile: TreeProfile, n_max: int) -> SurvivalSweep:
    """All targets at once: one O(n_max^2) vectorized backward pass.

    Slot n of the work arrays holds A_n(k) / log s_n(k) for the current k;
    target n enters the recursion when k drops to n.
    """
    _check_level(profile, n_max)
    a = np.empty(n_max + 1)
    log_s = np.empty(n_max + 1)
    for k in range(n_max - 1, -1, -1):
        a[k + 1] = 1.0
        log_s[k + 1] = 0.0
        d, p = profile.degree(k), profile.prob(k + 1)
        lf = np.log1p(-p * a[k + 1 :])
        log_s[k + 1 :] += math.log(d * p) + (d - 1) * lf
        a[k + 1 :] = -np.expm1(d * lf)
    with np.errstate(over="ignore"):
        inv_w = np.exp(-profile.log_w[: n_max + 1])
    degree_factor = 1.0 - 1.0 / np.asarray(profile.degrees[:n_max], dtype=np.float64)
    ratio2 = inv_w[1:] + np.cumsum(degree_factor * inv_w[:-1])
    return SurvivalSweep(
        n_max=n_max,
        p_positive=a[1:].copy(),
        log_p_one=log_s[1:].copy(),
        ratio2=ratio2,
        log_w=profile.log_w[1 : n_max + 1].copy(),
    )


def lyons_check(profile: TreeProfile, n_grid: Sequence[int]) -> np.ndarray:
    """r(n) = P(root <-> T_n) * sum_{k<=n} 1/w_k on the grid.

    The two-sided survival estimate says r(n) stays between positive
    constants; callers assert boundedness.
    """
    n_grid = list(n_grid)
    for n in n_grid:
        _check_level(profile, n)
    n_max = max(n_grid)
    sweep = survival_sweep(profile, n_max)
    with np.errstate(over="ignore"):
        partial = np.cumsum(np.exp(-profile.log_w[1 : n_max + 1]))
    return np.array([sweep.p_positive[n - 1] * partial[n - 1] for n in n_grid])


@dataclass(frozen=True)
class OneArmResult:
    """Truncated one-arm probability with its convergence certificate.

    value approximates P(level-n vertex reaches infinity in its subtree) by
    the target level N; converged means |q(N) - q(N//2)| <= tol * q(N).
    """

    n: int
    target: int
    value: float
    value_half: float
    rel_gap: float
    converged: bool
    tol: float


def one_arm(profile: TreeProfile, n: int, target: Optional[int] = None, tol: float = 1e-6) -> OneArmResult:
    """q_n via truncation at `target` (default: full depth), certified."""
    target = profile.depth if target is None else target
    if not (0 <= n < target):
        raise EngineError(f"need 0 <= n < target, got n={n}, target={target}")
    _check_level(profile, target)
    a = connect_probs(profile, target)
    value = float(a[n])
    half = max(n + 1, target // 2)
    a_half = connect_probs(profile, half)
    value_half = float(a_half[n])
    rel_gap = abs(value - value_half) / value if value > 0.0 else math.inf
    return OneArmResult(
        n=n,
        target=target,
        value=value,
        value_half=value_half,
        rel_gap=rel_gap,
        converged=rel_gap <= tol,
        tol=tol,
    )


# ---------------------------------------------------------------------------
# Two-time quantities
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EdgeJointLaw:
    """Joint (time 0, time t) state law of one refreshing edge."""

    p: float
    t: float
    p11: float
    p10: float
    p01: float
    p00: float


def two_time_edge_joint(p: float, t: float) -> EdgeJointLaw:
    """Stationary two-time law: refresh clocks at rate 1 resample to open w.p. p."""
    if not (0.0 < p < 1.0):
        raise EngineError("p must lie in (0, 1)")
    if t < 0.0:
        raise EngineError("t must be nonnegative")
    carry = p * (1.0 - p) * math.exp(-t)
    p11 = p * p + carry
    p10 = p * (1.0 - p) - carry
    return EdgeJointLaw(p=p, t=t, p11=p11, p10=p10, p01=p10, p00=(1.0 - p) ** 2 + carry)


@dataclass(frozen=True)
class TwoTimeTable:
    """Joint survival at times 0 and t toward target level N.

    q_t = P(reach at both times), q = single-time value, q_tilde = 1 - q,
    q_tilde_t = P(fail at both) = 1 - 2q + q_t.  The recursion carries the
    nonnegative excess V = q_tilde_t - q_tilde^2, so the FKG-side inequalities
    q_t >= q^2 and q_tilde_t >= q_tilde^2 hold by construction.
    """

    n: int
    target: int
    t: float
    q: float
    q_t: float
    q_tilde: float
    q_tilde_t: float
    a: np.ndarray = field(repr=False)  # A(k), k = n..target
    s: np.ndarray = field(repr=False)  # Q(k, t), k = n..target


def two_time_survival(profile: TreeProfile, n: int, target: int, t: float) -> TwoTimeTable:
    """Backward recursion for the pair (single-time, both-times) survival.

    Per child branch, P(alive at both) = p11 * S_child and P(dead at both) =
    1 - 2 p A_child + p11 S_child; branches are independent.  Carrying
    (A, U = 1 - A, V = F - U^2) keeps every output accurate in both the
    A -> 0 and U -> 0 regimes.
    """
    if not (0 <= n < target):
        raise EngineError(f"need 0 <= n < target, got n={n}, target={target}")
    _check_level(profile, target)
    if t < 0.0:
        raise EngineError("t must be nonnegative")
    m = target - n
    a_arr = np.empty(m + 1)
    s_arr = np.empty(m + 1)
    a, u, v = 1.0, 0.0, 0.0
    a_arr[m] = 1.0
    s_arr[m] = 1.0
    for k in range(target - 1, n - 1, -1):
        d, p = profile.degree(k), profile.prob(k + 1)
        carry = p * (1.0 - p) * math.exp(-t)
        p11 = p * p + carry
        s_child = a * a + v
        lbfs = math.log1p(-p * a)  # log P(branch fails at time 0)
        bfs2 = math.exp(2.0 * lbfs)
        delta = p * p * v + carry * s_child  # branch fail-both minus bfs^2
        u_new = math.exp(d * lbfs)
        a_new = -math.expm1(d * lbfs)
        v_new = bfs2 ** d * math.expm1(d * math.log1p(delta / bfs2)) if delta > 0.0 else 0.0
        a, u, v = a_new, u_new, v_new
        if v < -1e-12 or a < -1e-12 or u < -1e-12:
            raise EngineError("negative intermediate probability; numeric pathology")
        v = max(v, 0.0)
        a_arr[k - n] = a
        s_arr[k - n] = a * a + v
    return TwoTimeTable(
        n=n,
        target=target,
        t=t,
        q=a,
        q_t=a * a + v,
        q_tilde=u,
        q_tilde_t=u * u + v,
        a=a_arr,
        s=s_arr,
    )


@dataclass(frozen=True)
class CorrelationResult:
    """Empirical constants for the decorrelation bound q_n(t) <= C q_n^2 / t."""

    n: int
    target: int
    t_grid: tuple
    ratios: tuple  # q_n(t) * t / q_n^2 per grid point
    excess_ratios: tuple  # (q~_n(t)/q~_n^2 - 1) * t / q_n^2 per grid point
    c_emp: float
    c_emp_excess: float


def default_t_grid(n: int) -> tuple:
    """Probes both sides of the t ~ 1/n crossover."""
    return tuple(sorted({1.0 / n, 2.0 / n, 0.01, 0.1, 0.5, 1.0}))


def correlation_ratio(
    profile: TreeProfile, n: int, target: int, t_grid: Optional[Sequence[float]] = None
) -> CorrelationResult:
    """Grid maximum of q_n(t) t / q_n^2 and of (q~_n(t)/q~_n^2 - 1) t / q_n^2."""
    t_grid = default_t_grid(n) if t_grid is None else tuple(t_grid)
    if any(not (0.0 < t <= 1.0) for t in t_grid):
        raise EngineError("t_grid must lie in (0, 1]")
    ratios, excess = [], []
    for t in t_grid:
        tab = two_time_survival(profile, n, target, t)
        q2 = tab.q * tab.q
        ratios.append(tab.q_t * t / q2)
        excess.append((tab.q_tilde_t / tab.q_tilde**2 - 1.0) * t / q2)
    return CorrelationResult(
        n=n,
        target=target,
        t_grid=t_grid,
        ratios=tuple(ratios),
        excess_ratios=tuple(excess),
        c_emp=max(ratios),
        c_emp_excess=max(excess),
    )


# ---------------------------------------------------------------------------
# Leftmost-child quantities
# ---------------------------------------------------------------------------

def leftmost_table(profile: TreeProfile, target: int) -> np.ndarray:
    """b_j = p_{j+1} A(j+1) for j = 0..target-1 (one backward pass)."""
    a = connect_probs(profile, target)
    p = np.asarray(profile.edge_probs[:target], dtype=np.float64)
    return p * a[1 : target + 1]


@dataclass(frozen=True)
class LeftmostResult:
    """b_j plus the product/tail-sum comparison and the conduit-count product.

    product = prod_{i<j} (1-b_i)^{d_i - 1} and comparator =
    (sum_{m=j}^{N} 1/w_m)^2; their ratio is the bounded quantity.  The
    conduit count U_j (level-j edges through which the root reaches the
    target) reuses the exactly-one recursion on a modified profile whose
    last-level probability is b_{j-1}.
    """

    j: int
    target: int
    b: float
    product: float
    comparator: float
    product_ratio: float
    p_conduit_one: float  # P(U_j = 1), levels j >= 1
    mean_conduits: float  # E[U_j] = b_{j-1} w_{j-1} d_{j-1}
    conduit_product: float  # P(U_j = 1) E[U_j]


def leftmost_child_prob(profile: TreeProfile, j: int, target: Optional[int] = None) -> LeftmostResult:
    """b_j = P(level-j vertex reaches the target through its leftmost child)."""
    target = profile.depth if target is None else target
    if not (0 <= j < target):
        raise EngineError(f"need 0 <= j < target, got j={j}")
    _check_level(profile, target)
    b = leftmost_table(profile, target)
    d = np.asarray(profile.degrees[:target], dtype=np.float64)
    log_product = float(np.sum((d[:j] - 1.0) * np.log1p(-b[:j])))
    with np.errstate(over="ignore"):
        tail = float(np.sum(np.exp(-profile.log_w[j : target + 1])))
    comparator = tail * tail
    product = math.exp(log_product)
    if j >= 1:
        mod = TreeProfile(
            profile.degrees[:j],
            profile.edge_probs[: j - 1] + (float(b[j - 1]),),
            meta={"kind": "conduit-modified"},
        )
        table = survival_and_moments(mod, j)
        log_mean = profile.log_w[j - 1] + math.log(profile.degree(j - 1)) + math.log(b[j - 1])
        p_one = table.p_one
        mean = math.exp(log_mean)
        conduit_product = math.exp(table.log_p_one + log_mean)
    else:
        p_one, mean, conduit_product = math.nan, math.nan, math.nan
    return LeftmostResult(
        j=j,
        target=target,
        b=float(b[j]),
        product=product,
        comparator=comparator,
        product_ratio=product / comparator,
        p_conduit_one=p_one,
        mean_conduits=mean,
        conduit_product=conduit_product,
    )


# ---------------------------------------------------------------------------
# Influence / pivotality
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class InfluenceTable:
    """Influence per level for the event {root <-> T_target}, with sums.

    influence[m-1] is I(m), the probability that any single level-m edge is
    pivotal; u[m-1] = |T_m| I(m); expected_boundary = sum_m 2 p_m (1-p_m)
    u(m).  flip_intensity is the same edge sum written as the expected number
    of pivotal switches per unit time, so the pair must agree identically.
    """

    n: int
    target: int
    influence: np.ndarray
    u: np.ndarray
    expected_boundary: float
    flip_intensity: float
    tail_bound_constant: float  # max over m < n of p_m u(m) / sum_{k=m+1..n} 1/w_k


def influence_table(profile: TreeProfile, n: int, target: Optional[int] = None) -> InfluenceTable:
    """Exact influences: path product x subtree arm x no-alternative product."""
    target = n if target is None else target
    if n > target:
        raise EngineError("need n <= target")
    _check_level(profile, target)
    a = connect_probs(profile, target)
    log_i = np.empty(n + 1)  # log I(m), m = 1..n at slots 1..n
    cum_logp = 0.0
    cum_logoff = 0.0
    for m in range(1, n + 1):
        d, p = profile.degree(m - 1), profile.prob(m)
        cum_logoff += (d - 1) * math.log1p(-p * a[m])
        log_i[m] = cum_logp + math.log(a[m]) + cum_logoff
        cum_logp += math.log(p)
        if abs(cum_logp) > LOG_GUARD or abs(cum_logoff) > LOG_GUARD:
            raise EngineError("log magnitude guard tripped; malformed profile")
    influence = np.exp(log_i[1:])
    log_u = profile.log_level_size[1 : n + 1] + log_i[1:]
    u = np.exp(log_u)
    p_arr = np.asarray(profile.edge_probs[:n], dtype=np.float64)
    terms = 2.0 * p_arr * (1.0 - p_arr) * u
    expected_boundary = float(np.sum(terms))
    flip_intensity = float(math.fsum(terms.tolist()))
    with np.errstate(over="ignore"):
        inv_w = np.exp(-profile.log_w[: n + 1])
    tail_to_n = np.cumsum(inv_w[::-1])[::-1]  # tail_to_n[m] = sum_{k=m..n} 1/w_k
    c15 = 0.0
    for m in range(1, n):
        c15 = max(c15, p_arr[m - 1] * u[m - 1] / tail_to_n[m + 1])
    return InfluenceTable(
        n=n,
        target=target,
        influence=influence,
        u=u,
        expected_boundary=expected_boundary,
        flip_intensity=flip_intensity,
        tail_bound_constant=c15,
    )


# ---------------------------------------------------------------------------
# Regime sums and classification
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RegimeReport:
    """Partial sums of the component-count and flip-count criteria.

    Per grid point n: sum_k k/w_k (finite-components criterion), the
    harmonic-vs-proxy ratio, the two square-summability partial sums, and
    flip_proxy(n) = sum_{m<=n} sum_{k>=m} 1/w_k, whose growth law separates
    the regimes (bounded / ~log n / ~n^s).
    """

    n_grid: tuple
    sum_k_over_w: tuple
    harmonic_ratio: tuple  # H_n / flip_proxy(n)
    sq_sum_inner: tuple  # partial sums of (w_n sum_{m>n} 1/w_m)^{-2}
    sq_sum_level: tuple  # partial sums of ((k+1) w_k (sum_{j>=k} 1/w_j)^2)^{-1}
    flip_proxy: tuple
    classification: str  # finite-components | infinite-flips | boundary-gap
    flip_proxy_growth: str  # bounded | log | power
    flip_proxy_exponent: float
    converged_k_over_w: bool
    converged_sq_sums: tuple


def _rel_tail(values: Sequence[float]) -> float:
    half = values[len(values) // 2]
    return abs(values[-1] - half) / abs(values[-1]) if values[-1] != 0 else 0.0


def regime_report(
    profile: TreeProfile,
    n_grid: Sequence[int],
    cauchy_tol: float = 1e-4,
    sq_inner_tol: float = 1e-2,
    sq_level_tol: float = 8e-2,
    tail_fraction: float = 0.5,
) -> RegimeReport:
    """Evaluate the regime predicates on a grid and classify the profile.

    Inner tails use the full profile depth; grid points above
    tail_fraction * depth are rejected so edge-of-truncation artifacts cannot
    masquerade as divergence.  The convergence thresholds are calibrated on
    the power/poly-log families at depth ~2e4, where the convergent and
    divergent sides of each sum separate by more than a factor 5 in relative
    tail increment.
    """
    depth = profile.depth
    n_grid = sorted(set(int(n) for n in n_grid))
    if n_grid[0] < 1 or n_grid[-1] > depth * tail_fraction:
        raise EngineError(f"grid must lie in [1, {int(depth * tail_fraction)}]")
    with np.errstate(over="ignore"):
        inv_w = np.exp(-profile.log_w)  # index by level, slot 0 is w_0 = 1
    k = np.arange(depth + 1, dtype=np.float64)
    sum_kw = np.cumsum(k * inv_w)
    tail = np.cumsum(inv_w[::-1])[::-1]  # tail[m] = sum_{k=m..depth} 1/w_k
    harmonic = np.cumsum(np.concatenate([[0.0], 1.0 / k[1:]]))
    proxy = np.cumsum(np.concatenate([[0.0], tail[1:]]))
    with np.errstate(over="ignore", divide="ignore"):
        inner = profile.w[:-1] * tail[1:]
        sq_inner = np.cumsum(1.0 / inner**2)
        level_term = (k[:-1] + 1.0) * profile.w[:-1] * tail[:-1] ** 2
        sq_level = np.cumsum(1.0 / level_term)

    grid = np.asarray(n_grid)
    report_max = int(depth * tail_fraction)
    conv_kw = _rel_tail(sum_kw[: report_max + 1]) < cauchy_tol
    conv_inner = _rel_tail(sq_inner[:report_max]) < sq_inner_tol
    conv_level = _rel_tail(sq_level[:report_max]) < sq_level_tol

    proxy_vals = proxy[grid]
    log_n = np.log(grid.astype(np.float64))
    slope = float(np.polyfit(log_n, np.log(proxy_vals), 1)[0]) if len(grid) >= 2 else 0.0
    per_log = proxy_vals / np.log(grid)
    if _rel_tail(proxy_vals) < cauchy_tol * 10:
        growth, exponent = "bounded", 0.0
    elif slope > 0.25:
        growth, exponent = "power", slope
    else:
        growth, exponent = "log", slope
        if per_log.max() / per_log.min() > 4.0:
            growth = "power"

    if conv_kw:
        classification = "finite-components"
    elif conv_inner and conv_level:
        classification = "infinite-flips"
    else:
        classification = "boundary-gap"
    return RegimeReport(
        n_grid=tuple(n_grid),
        sum_k_over_w=tuple(float(sum_kw[n]) for n in n_grid),
        harmonic_ratio=tuple(float(harmonic[n] / proxy[n]) for n in n_grid),
        sq_sum_inner=tuple(float(sq_inner[n - 1]) for n in n_grid),
        sq_sum_level=tuple(float(sq_level[n]) for n in n_grid),
        flip_proxy=tuple(float(v) for v in proxy_vals),
        classification=classification,
        flip_proxy_growth=growth,
        flip_proxy_exponent=exponent,
        converged_k_over_w=bool(conv_kw),
        converged_sq_sums=(bool(conv_inner), bool(conv_level)),
    )
