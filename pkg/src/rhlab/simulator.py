"""Monte Carlo harness: build tables at a load factor, churn them, measure.

Experiments are deterministic functions of their config: replication r uses
seed ``base_seed + r``, fresh keys come from a seed-salted monotone counter
(so duplicates are impossible), and aggregation merges replications in seed
order, making reports independent of execution interleaving.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Callable, Dict, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from rhlab import _kernels as k
from rhlab.analytic import (
    LoadFactor,
    ModelKind,
    as_load_factor,
    rh_tails,
    variance_search_cost,
)
from rhlab.hashtable import Discipline, EmptyTableError, Table

__all__ = [
    "ExperimentConfig",
    "EmpiricalStats",
    "ComparisonReport",
    "SearchBenchResult",
    "ReplicationError",
    "fill",
    "steady_state",
    "churn",
    "measure",
    "compare",
    "search_cost_experiment",
    "run_experiment",
    "replicate",
]

_SAMPLE_STREAM_SALT = 0x9FB21C651E98DF25


class ReplicationError(RuntimeError):
    """A replication failed; carries the seed that produced the failure."""

    def __init__(self, seed: int, cause: BaseException):
        super().__init__(f"replication with seed {seed} failed: {cause}")
        self.seed = seed


@dataclass(frozen=True)
class ExperimentConfig:
    """Parameters of one experiment (shared by all its replications)."""

    m: int
    alpha: float
    discipline: Discipline = Discipline.RH
    model: ModelKind = ModelKind.INSERT_ONLY
    cycles: int = 0
    replications: int = 1
    base_seed: int = 0
    sample_size: int = 0

    def __post_init__(self) -> None:
        if self.m < 16:
            raise ValueError("table size must be at least 16")
        lf = as_load_factor(self.alpha)
        object.__setattr__(self, "alpha", lf.alpha)
        object.__setattr__(self, "discipline", Discipline.parse(self.discipline))
        if not isinstance(self.model, ModelKind):
            raise ValueError(f"model must be a ModelKind, got {self.model!r}")
        if self.cycles < 0 or self.replications < 1 or self.sample_size < 0:
            raise ValueError("cycles/replications/sample_size out of range")
        if self.model is ModelKind.INSERT_ONLY and self.cycles != 0:
            raise ValueError("insert-only experiments take no churn cycles")
        if self.target_n >= self.m:
            raise ValueError("load factor leaves no free slot")

    @property
    def target_n(self) -> int:
        """Occupancy the fill phase establishes: floor(alpha * m)."""
        return int(math.floor(self.alpha * self.m))


@dataclass(frozen=True)
class EmpiricalStats:
    """Measured age statistics of one table (population mean/variance)."""

    n: int
    mean_age: float
    var_age: float
    histogram: Mapping[int, float]

    def total(self) -> float:
        return float(sum(self.histogram.values()))

    def survival(self) -> np.ndarray:
        """Empirical Pr{search cost >= i} for i = 1..max age."""
        if not self.histogram:
            return np.array([1.0])
        max_age = max(self.histogram)
        counts = np.zeros(max_age + 1)
        for age, count in self.histogram.items():
            counts[age] = count
        total = counts.sum()
        if total <= 0:
            return np.array([1.0])
        return np.cumsum(counts[::-1])[::-1][1:] / total


@dataclass(frozen=True)
class ComparisonReport:
    """Analytic-vs-empirical comparison, aggregated across replications."""

    analytic_mean: float
    analytic_var: float
    empirical_mean: float
    empirical_var: float
    mean_stderr: float
    var_stderr: float
    per_replication_means: Tuple[float, ...]
    per_replication_vars: Tuple[float, ...]
    tail_sup_diff: float
    mean_rel_err: float
    var_rel_err: float
    mean_rtol: float
    var_rtol: float
    tail_tol: float
    mean_ok: bool
    var_ok: bool
    tail_ok: bool

    @property
    def passed(self) -> bool:
        return self.mean_ok and self.var_ok and self.tail_ok

    def to_dict(self) -> Dict[str, object]:
        d = {
            "analytic_mean": self.analytic_mean,
            "analytic_var": self.analytic_var,
            "empirical_mean": self.empirical_mean,
            "empirical_var": self.empirical_var,
            "mean_stderr": self.mean_stderr,
            "var_stderr": self.var_stderr,
            "per_replication_means": list(self.per_replication_means),
            "per_replication_vars": list(self.per_replication_vars),
            "tail_sup_diff": self.tail_sup_diff,
            "mean_rel_err": self.mean_rel_err,
            "var_rel_err": self.var_rel_err,
            "mean_rtol": self.mean_rtol,
            "var_rtol": self.var_rtol,
            "tail_tol": self.tail_tol,
            "mean_ok": self.mean_ok,
            "var_ok": self.var_ok,
            "tail_ok": self.tail_ok,
            "passed": self.passed,
        }
        return d


@dataclass(frozen=True)
class SearchBenchResult:
    """Mean probe counts of the two search strategies over one key sample."""

    standard_mean: float
    centered_mean: float


def _key_salt(seed: int) -> np.uint64:
    # mix64 boxes to a Python int when called from Python; keep it uint64.
    return np.uint64(k.mix64(np.uint64(seed & ((1 << 64) - 1)) ^ k.KEY_STREAM_SALT))


def fill(config: ExperimentConfig) -> Table:
    """Build a table and insert floor(alpha * m) generated keys."""
    table = Table(config.m, config.discipline, seed=config.base_seed)
    counter = table._bulk_fill(config.target_n, 0, _key_salt(config.base_seed))
    table._sim_key_counter = counter
    return table


def churn(table: Table, cycles: int) -> None:
    """Run `cycles` rounds of fresh-key insertion followed by random deletion.

    Continues the key counter of the fill that built the table, so staged
    churn (a + b cycles) matches a single run of a + b cycles exactly."""
    if cycles < 0:
        raise ValueError("cycles must be nonnegative")
    if cycles == 0:
        return
    counter = getattr(table, "_sim_key_counter", None)
    if counter is None:
        raise ValueError("churn needs a table built by fill()")
    table._sim_key_counter = table._bulk_churn(cycles, counter, _key_salt(table.seed))


def steady_state(config: ExperimentConfig) -> Table:
    """Fill to the target load, then churn for config.cycles rounds."""
    if config.model is not ModelKind.STEADY_STATE:
        raise ValueError("steady_state requires a steady-state config")
    table = fill(config)
    churn(table, config.cycles)
    return table


def measure(table: Table) -> EmpiricalStats:
    """Population mean/variance/histogram of the stored age multiset.

    Moments come from exact integer sums over the histogram, so the result
    is a pure function of the multiset (slot order cannot perturb it)."""
    if table.n < 1:
        raise EmptyTableError("cannot measure an empty table")
    hist = table.age_histogram()
    n = table.n
    s1 = sum(age * count for age, count in hist.items())
    s2 = sum(age * age * count for age, count in hist.items())
    mean = s1 / n
    return EmpiricalStats(
        n=n,
        mean_age=mean,
        var_age=max(s2 / n - mean * mean, 0.0),
        histogram=hist,
    )


def _pooled_survival(stats: Sequence[EmpiricalStats]) -> np.ndarray:
    pooled: Dict[int, float] = {}
    for s in stats:
        for age, count in s.histogram.items():
            pooled[age] = pooled.get(age, 0.0) + count
    return EmpiricalStats(n=0, mean_age=0.0, var_age=0.0, histogram=pooled).survival()


def compare(
    stats: Union[EmpiricalStats, Sequence[EmpiricalStats]],
    alpha: Union[float, LoadFactor],
    model: ModelKind,
    epsilon: float = 1e-12,
    *,
    mean_rtol: float = 0.02,
    var_rtol: float = 0.10,
    tail_tol: float = 0.01,
) -> ComparisonReport:
    """Compare measured stats against the analytic model at the given tolerances.

    The tail comparison pools histograms across replications and reports the
    sup over ages of |empirical Pr{cost >= i} - analytic Pr{cost >= i}|."""
    stats_list = [stats] if isinstance(stats, EmpiricalStats) else list(stats)
    if not stats_list:
        raise ValueError("no statistics to compare")
    lf = as_load_factor(alpha)
    moments = variance_search_cost(lf, model, epsilon)
    ana_survival = rh_tails(lf, model, epsilon).survival()

    means = tuple(float(s.mean_age) for s in stats_list)
    variances = tuple(float(s.var_age) for s in stats_list)
    emp_mean = float(np.mean(means))
    emp_var = float(np.mean(variances))
    r = len(stats_list)
    mean_stderr = float(np.std(means, ddof=1) / math.sqrt(r)) if r > 1 else 0.0
    var_stderr = float(np.std(variances, ddof=1) / math.sqrt(r)) if r > 1 else 0.0

    emp_survival = _pooled_survival(stats_list)
    width = max(emp_survival.size, ana_survival.size)
    emp_pad = np.zeros(width)
    emp_pad[: emp_survival.size] = emp_survival
    ana_pad = np.zeros(width)
    ana_pad[: ana_survival.size] = ana_survival
    tail_sup_diff = float(np.max(np.abs(emp_pad - ana_pad))) if width else 0.0

    mean_rel = abs(emp_mean - moments.mean) / moments.mean
    var_rel = abs(emp_var - moments.variance) / max(moments.variance, 1e-12)
    return ComparisonReport(
        analytic_mean=moments.mean,
        analytic_var=moments.variance,
        empirical_mean=emp_mean,
        empirical_var=emp_var,
        mean_stderr=mean_stderr,
        var_stderr=var_stderr,
        per_replication_means=means,
        per_replication_vars=variances,
        tail_sup_diff=tail_sup_diff,
        mean_rel_err=mean_rel,
        var_rel_err=var_rel,
        mean_rtol=mean_rtol,
        var_rtol=var_rtol,
        tail_tol=tail_tol,
        mean_ok=mean_rel <= mean_rtol,
        var_ok=var_rel <= var_rtol,
        tail_ok=tail_sup_diff <= tail_tol,
    )


def search_cost_experiment(table: Table, sample_size: int, center: float) -> SearchBenchResult:
    """Mean probes of standard and mean-centered search over a key sample.

    Keys are sampled uniformly without replacement from the live registry,
    so the standard mean is exactly the mean stored age of the sample."""
    if not 1 <= sample_size <= table.n:
        raise ValueError(f"sample_size must lie in [1, {table.n}], got {sample_size}")
    rng = np.random.default_rng((table.seed ^ _SAMPLE_STREAM_SALT) & ((1 << 64) - 1))
    picks = rng.choice(table.n, size=sample_size, replace=False)
    keys = table.stored_keys()[picks]
    standard = table._bulk_search_standard(keys)
    centered = table._bulk_search_centered(keys, center)
    return SearchBenchResult(
        standard_mean=float(standard.mean()),
        centered_mean=float(centered.mean()),
    )


def run_experiment(config: ExperimentConfig) -> EmpiricalStats:
    """Build the configured table (fill, plus churn for steady state) and
    measure it.  A zero-occupancy config reports the degenerate limit stats
    (every key in a near-empty table rests at age 1)."""
    if config.target_n == 0:
        return EmpiricalStats(n=0, mean_age=1.0, var_age=0.0, histogram={})
    if config.model is ModelKind.STEADY_STATE:
        table = steady_state(config)
    else:
        table = fill(config)
    return measure(table)


def _resolve_workers(max_workers: Optional[int]) -> int:
    if max_workers is None:
        env = os.environ.get("RHLAB_THREADS", "").strip()
        if env:
            max_workers = int(env)
        else:
            max_workers = os.cpu_count() or 1
    return max(1, int(max_workers))


def replicate(
    config: ExperimentConfig,
    experiment: Optional[Callable[[ExperimentConfig], EmpiricalStats]] = None,
    *,
    epsilon: float = 1e-12,
    mean_rtol: float = 0.02,
    var_rtol: float = 0.10,
    tail_tol: float = 0.01,
    max_workers: Optional[int] = None,
) -> ComparisonReport:
    """Run the experiment once per replication seed and aggregate.

    Replication r gets base_seed + r.  Replications run in a thread pool
    capped by `max_workers` (default: RHLAB_THREADS or machine parallelism);
    results merge in seed order, so the report does not depend on scheduling.
    A failing replication raises ReplicationError naming its seed."""
    experiment = experiment or run_experiment
    seeds = [config.base_seed + r for r in range(config.replications)]
    configs = [replace(config, base_seed=s, replications=1) for s in seeds]
    workers = min(_resolve_workers(max_workers), len(configs))
    results = []
    if workers == 1:
        for s, c in zip(seeds, configs):
            try:
                results.append(experiment(c))
            except Exception as exc:
                raise ReplicationError(s, exc) from exc
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(experiment, c) for c in configs]
            for s, fut in zip(seeds, futures):
                try:
                    results.append(fut.result())
                except Exception as exc:
                    raise ReplicationError(s, exc) from exc
    return compare(
        results,
        config.alpha,
        config.model,
        epsilon,
        mean_rtol=mean_rtol,
        var_rtol=var_rtol,
        tail_tol=tail_tol,
    )
