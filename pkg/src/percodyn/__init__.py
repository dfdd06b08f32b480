"""percodyn: dynamical percolation on spherically symmetric trees.

Exact per-level recursions, an exhaustive tiny-tree oracle, an event-driven
simulator, and lattice gadget graphs, wired together by reproducible
experiment recipes and an acceptance suite.
"""

from .tree_model import (
    ProfileSpec,
    TreeProfile,
    build_profile,
    homogeneous,
    regime_label,
    synthesize_profile,
)
from .exact_engine import (
    connect_probs,
    correlation_ratio,
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
from .dyn_sim import SimConfig, monte_carlo, simulate_timeline, timeline_stats
from .gadget_lab import (
    GadgetGraph,
    build_gadget,
    connect_estimate,
    gadget_trend_suite,
    persistence_estimate,
    select_multiplicity,
)

__version__ = "0.1.0"
