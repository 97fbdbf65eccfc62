"""Adaptive multi-fidelity tree search under a cost budget."""
from .algorithm import KometoConfig, effective_budget, optimize_effective_budget, predicted_spend, run, run_with_state
from .baselines import OpeningSchedule, fit_schedule, run_baseline
from .benchmarks import benchmark, benchmark_environment
from .fidelity import (BudgetExceeded, CallableFunction, Cutoff, ExpDecay, FidelityEnvironment, FidelitySchedule,
                       PolyDecay)
from .instances import (SmoothnessProfile, TreeInstance, TruncatedTree, make_depth_limited_instance,
                        make_width_limited_family, random_tree_instance, verify_membership)
from .partition import Box, Cell, DomainError, Partition
from .results import RegretTrace
from .theory import (BoundQuery, CaseError, corollary4_rate, lambert_w, lemma6_bound, lemma7_conditions,
                     theorem1_lower, theorem3_bound)

__all__ = [
    "Box", "BoundQuery", "BudgetExceeded", "CallableFunction", "CaseError", "Cell", "Cutoff", "DomainError",
    "ExpDecay", "FidelityEnvironment", "FidelitySchedule", "KometoConfig", "OpeningSchedule", "Partition",
    "PolyDecay", "RegretTrace", "SmoothnessProfile", "TreeInstance", "TruncatedTree", "benchmark",
    "benchmark_environment", "corollary4_rate", "effective_budget", "fit_schedule", "lambert_w", "lemma6_bound",
    "lemma7_conditions", "make_depth_limited_instance", "make_width_limited_family", "optimize_effective_budget",
    "predicted_spend", "random_tree_instance", "run", "run_baseline", "run_with_state", "theorem1_lower",
    "theorem3_bound", "verify_membership",
]
