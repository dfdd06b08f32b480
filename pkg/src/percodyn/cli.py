"""percodyn command line: profiles, exact tables, simulation, gadgets, experiments."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import acceptance, experiments
from .dyn_sim import SimConfig, monte_carlo, simulate_timeline
from .exact_engine import (
    connect_probs,
    correlation_ratio,
    influence_table,
    lyons_check,
    one_arm,
    regime_report,
    survival_and_moments,
    two_time_survival,
)
from .gadget_lab import build_gadget, connect_estimate, persistence_estimate
from .tree_model import ProfileSpec, TreeProfile, build_profile, regime_label
from .util import write_csv, write_json


def _load_profile(path: str) -> TreeProfile:
    return TreeProfile.load(path)


def _cmd_profile(args) -> int:
    spec = ProfileSpec(
        kind=args.kind,
        depth=args.depth,
        degree=args.degree,
        prob=args.prob,
        target_kind=args.target_kind,
        exponent=args.alpha if args.alpha is not None else args.theta,
        scale=args.scale,
        p_range=(args.p_lo, args.p_hi),
    )
    profile = build_profile(spec)
    profile.save(args.out)
    print(f"wrote {args.out} (depth {profile.depth}, "
          f"max w deviation {profile.meta.get('max_rel_deviation', 0.0)})")
    return 0


def _cmd_exact(args) -> int:
    profile = _load_profile(args.profile)
    n = args.n if args.n is not None else profile.depth
    target = args.target if args.target is not None else profile.depth
    rows, header = [], []
    if args.op == "connect":
        a = connect_probs(profile, n)
        header, rows = ["k", "a_k"], [[k, float(v)] for k, v in enumerate(a)]
    elif args.op == "survival":
        t = survival_and_moments(profile, n)
        header = ["n", "p_positive", "p_one", "ratio2"]
        rows = [[n, t.p_positive, t.p_one, t.ratio2]]
    elif args.op == "lyons":
        grid = args.n_grid or list(range(10, n + 1))
        r = lyons_check(profile, grid)
        header, rows = ["n", "ratio"], [[g, float(v)] for g, v in zip(grid, r)]
    elif args.op == "one-arm":
        res = one_arm(profile, n, target, tol=args.tol)
        header = ["n", "target", "q", "rel_gap", "converged"]
        rows = [[res.n, res.target, res.value, res.rel_gap, res.converged]]
    elif args.op == "two-time":
        header = ["n", "target", "t", "q", "q_t", "q_tilde", "q_tilde_t"]
        for t in args.t_grid or [0.0, 0.1, 1.0]:
            tab = two_time_survival(profile, n, target, t)
            rows.append([n, target, t, tab.q, tab.q_t, tab.q_tilde, tab.q_tilde_t])
    elif args.op == "correlation":
        res = correlation_ratio(profile, n, target, args.t_grid or None)
        header = ["t", "ratio", "excess_ratio"]
        rows = [[t, r, e] for t, r, e in zip(res.t_grid, res.ratios, res.excess_ratios)]
    elif args.op == "influence":
        tab = influence_table(profile, n, target if args.target is not None else None)
        header = ["m", "influence", "u"]
        rows = [[m + 1, float(tab.influence[m]), float(tab.u[m])] for m in range(n)]
        rows.append(["sum_expected_boundary", tab.expected_boundary, tab.flip_intensity])
    elif args.op == "regime-report":
        grid = args.n_grid or [100, 316, 1000, 3162, profile.depth // 2]
        rep = regime_report(profile, grid)
        header = ["n", "sum_k_over_w", "flip_proxy", "harmonic_ratio"]
        rows = [[g, s, p, h] for g, s, p, h in
                zip(rep.n_grid, rep.sum_k_over_w, rep.flip_proxy, rep.harmonic_ratio)]
        print(f"classification: {rep.classification} ({rep.flip_proxy_growth})")
    elif args.op == "regime-label":
        lab = regime_label(profile)
        header = ["label", "model", "alpha_fit", "beta_fit", "gamma_fit", "rel_tail"]
        rows = [[lab.label, lab.model, lab.alpha_fit, lab.beta_fit, lab.gamma_fit, lab.rel_tail]]
        print(f"label: {lab.label}")
    else:
        raise SystemExit(f"unknown op {args.op}")
    write_csv(Path(args.out), header, rows)
    print(f"wrote {args.out}")
    return 0


def _cmd_sim(args) -> int:
    profile = _load_profile(args.profile)
    config = SimConfig(profile=profile, depth=args.depth, horizon=args.horizon,
                       replicas=args.replicas, seed=args.seed, n_jobs=args.n_jobs)
    stats = monte_carlo(config)
    write_json(Path(args.out), stats.to_json_dict())
    print(f"wrote {args.out}")
    if args.dump_timeline is not None:
        timeline = simulate_timeline(config, args.dump_timeline)
        rows = [
            [float(t), int(e), int(o), int(1 - o), int(p)]
            for t, e, o, p in zip(timeline.event_times, timeline.event_edges,
                                  timeline.event_old, timeline.event_pivotal)
        ]
        dump = Path(args.out).with_suffix(f".timeline{args.dump_timeline}.csv")
        write_csv(dump, ["time", "edge", "old", "new", "pivotal"], rows)
        print(f"wrote {dump}")
    return 0


def _cmd_gadget(args) -> int:
    graph = build_gadget(args.j, args.m, args.radius)
    connect, c_se = connect_estimate(graph, args.p, args.replicas, args.seed)
    persistence, p_se = persistence_estimate(graph, args.p, args.epsilon,
                                             args.replicas, args.seed + 1)
    payload = {
        "j": args.j, "m": args.m, "radius": args.radius, "p": args.p,
        "epsilon": args.epsilon, "replicas": args.replicas, "seed": args.seed,
        "n_vertices": graph.n_vertices, "n_edges": graph.n_edges,
        "connect": {"estimate": connect, "se": c_se},
        "persistence": {"estimate": persistence, "se": p_se},
    }
    write_json(Path(args.out), payload)
    print(f"wrote {args.out}")
    return 0


def _cmd_run(args) -> int:
    config = json.loads(Path(args.config).read_text())
    report = experiments.run_experiment(config, args.out)
    status = "PASS" if report["passed"] else "FAIL"
    print(f"{status} {report['experiment']} -> {args.out}")
    return 0 if report["passed"] else 1


def _cmd_accept(args) -> int:
    numbers = None if args.all else set(args.criteria or [])
    if not args.all and not numbers:
        numbers = None
    results = acceptance.run_all(outdir=args.out, numbers=numbers)
    return 0 if all(r.passed for r in results) else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="percodyn")
    sub = p.add_subparsers(dest="command", required=True)

    pp = sub.add_parser("profile", help="build a tree profile JSON")
    pp.add_argument("--kind", default="target_growth",
                    choices=["homogeneous", "target_growth"])
    pp.add_argument("--depth", type=int, required=True)
    pp.add_argument("--degree", type=int, default=None)
    pp.add_argument("--prob", type=float, default=None)
    pp.add_argument("--target-kind", default="poly_log",
                    choices=["poly_log", "power", "geometric"])
    pp.add_argument("--alpha", type=float, default=None)
    pp.add_argument("--theta", type=float, default=None)
    pp.add_argument("--scale", type=float, default=1.0)
    pp.add_argument("--p-lo", type=float, default=0.3)
    pp.add_argument("--p-hi", type=float, default=0.7)
    pp.add_argument("--out", required=True)
    pp.set_defaults(func=_cmd_profile)

    pe = sub.add_parser("exact", help="evaluate an exact-engine operation to CSV")
    pe.add_argument("--profile", required=True)
    pe.add_argument("--op", required=True,
                    choices=["connect", "survival", "lyons", "one-arm", "two-time",
                             "correlation", "influence", "regime-report", "regime-label"])
    pe.add_argument("--n", type=int, default=None)
    pe.add_argument("--target", type=int, default=None)
    pe.add_argument("--tol", type=float, default=1e-6)
    pe.add_argument("--t-grid", type=float, nargs="*", default=None)
    pe.add_argument("--n-grid", type=int, nargs="*", default=None)
    pe.add_argument("--out", required=True)
    pe.set_defaults(func=_cmd_exact)

    ps = sub.add_parser("sim", help="Monte Carlo over replicas")
    ps.add_argument("--profile", required=True)
    ps.add_argument("--depth", type=int, required=True)
    ps.add_argument("--horizon", type=float, default=1.0)
    ps.add_argument("--replicas", type=int, default=10000)
    ps.add_argument("--seed", type=int, default=42)
    ps.add_argument("--n-jobs", type=int, default=1)
    ps.add_argument("--dump-timeline", type=int, default=None)
    ps.add_argument("--out", required=True)
    ps.set_defaults(func=_cmd_sim)

    pg = sub.add_parser("gadget", help="gadget graph estimates")
    pg.add_argument("--j", type=int, required=True)
    pg.add_argument("--m", type=int, required=True)
    pg.add_argument("--radius", type=int, required=True)
    pg.add_argument("--p", type=float, default=0.5)
    pg.add_argument("--epsilon", type=float, default=0.5)
    pg.add_argument("--replicas", type=int, default=1000)
    pg.add_argument("--seed", type=int, default=7)
    pg.add_argument("--out", required=True)
    pg.set_defaults(func=_cmd_gadget)

    pr = sub.add_parser("run", help="run a named experiment from a JSON config")
    pr.add_argument("--config", required=True)
    pr.add_argument("--out", required=True)
    pr.set_defaults(func=_cmd_run)

    pa = sub.add_parser("accept", help="run the acceptance suite")
    pa.add_argument("--all", action="store_true")
    pa.add_argument("--criteria", type=int, nargs="*", default=None)
    pa.add_argument("--out", default=None)
    pa.set_defaults(func=_cmd_accept)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
