"""rhlab: Robin Hood hashing laboratory.

Analytic search-cost distributions and variance bounds for open-addressing
hash tables with random probing, an instrumented table implementation with
pluggable collision disciplines (FCFS, LCFS, Robin Hood) and deletion by
marking, and a Monte Carlo harness that validates the analytic predictions.
"""

from rhlab.analytic import (
    LoadFactor,
    ModelKind,
    Moments,
    TailSequence,
    comparison_lemma_check,
    distribution,
    lambert_w,
    logistic_limit_density,
    mean_search_cost,
    ode_majorant,
    rh_tails,
    solve_w_log,
    tail_upper_bound,
    variance_search_cost,
    variance_upper_bound,
)
from rhlab.hashtable import Discipline, InsertionReceipt, Table, probe_index
from rhlab.simulator import (
    ComparisonReport,
    EmpiricalStats,
    ExperimentConfig,
    compare,
    fill,
    measure,
    replicate,
    search_cost_experiment,
    steady_state,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "LoadFactor",
    "ModelKind",
    "Moments",
    "TailSequence",
    "comparison_lemma_check",
    "distribution",
    "lambert_w",
    "logistic_limit_density",
    "mean_search_cost",
    "ode_majorant",
    "rh_tails",
    "solve_w_log",
    "tail_upper_bound",
    "variance_search_cost",
    "variance_upper_bound",
    "Discipline",
    "InsertionReceipt",
    "Table",
    "probe_index",
    "ComparisonReport",
    "EmpiricalStats",
    "ExperimentConfig",
    "compare",
    "fill",
    "measure",
    "replicate",
    "search_cost_experiment",
    "steady_state",
]
