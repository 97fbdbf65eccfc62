import pytest
from hypothesis import HealthCheck, settings

from kometo import (CallableFunction, Cutoff, ExpDecay, FidelityEnvironment, FidelitySchedule,
                    PolyDecay, SmoothnessProfile)
from kometo.partition import Box

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

# lines collected by the acceptance module, printed in the terminal summary
ACCEPTANCE_LINES: dict = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])


@pytest.fixture
def half_profile():
    """nu=1, rho=1/2, d=0 with C = C_min = 2, binary partition."""
    return SmoothnessProfile(1.0, 0.5, 0.0, 2.0, 2)


@pytest.fixture(params=["poly", "exp", "cutoff"])
def model(request):
    return {"poly": PolyDecay(1.0, 1.0), "exp": ExpDecay(1.0, 1.0, 1.0), "cutoff": Cutoff(1.0)}[request.param]


@pytest.fixture
def quadratic_env():
    def make(budget=1000.0, model=PolyDecay(0.1, 1.0), max_cost=float("inf")):
        fn = CallableFunction(lambda x: -(x[0] - 0.3) ** 2, Box.unit(1), 0.0)
        return FidelityEnvironment(fn, FidelitySchedule(model, max_cost), budget)
    return make
