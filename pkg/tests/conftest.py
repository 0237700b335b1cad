import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "rhlab",
    deadline=None,
    max_examples=100,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("rhlab")


@pytest.fixture(scope="session")
def warm_kernels():
    """Touch every compiled kernel once so measured sections time the
    algorithm, not the JIT."""
    from rhlab.analytic import ModelKind
    from rhlab.hashtable import Discipline, Table
    from rhlab.simulator import ExperimentConfig, fill, measure, search_cost_experiment, steady_state

    for disc in Discipline:
        t = Table(64, disc, seed=1)
        t.insert(1)
        t.insert(2)
        t.search_standard(1)
        t.search_mean_centered(1, 1.0)
        t.delete_random()
    cfg = ExperimentConfig(
        m=256, alpha=0.5, discipline=Discipline.RH, model=ModelKind.STEADY_STATE, cycles=64, base_seed=1
    )
    table = steady_state(cfg)
    measure(table)
    search_cost_experiment(table, 16, 1.5)
    fill(ExperimentConfig(m=256, alpha=0.5, discipline=Discipline.FCFS, model=ModelKind.INSERT_ONLY))
    return True
