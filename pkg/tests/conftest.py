import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "suite", max_examples=50, deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("suite")


@pytest.fixture(scope="session")
def kernels_warm():
    """Compile the numba kernels once so timed tests measure simulation only."""
    import massext as mx

    mx.run(mx.ModelParams(2, 0.5), mx.StopRule(max_events=50), seed=0)
    mx.run_traced(mx.ModelParams(2, 0.5), mx.StopRule(max_events=10), seed=0)
    mx.simulate_chain(2, 1.0, 10, seed=0)
    return True
