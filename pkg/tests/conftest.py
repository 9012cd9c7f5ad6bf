import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from bscfeedback.belief import bayes_update, uniform_init
from bscfeedback.encoder import make_partition, sed_partition

settings.register_profile(
    "default",
    deadline=None,
    max_examples=60,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")

# lines appended by the acceptance tests, echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def random_trajectory(M, steps, params, rng, *, sed=False):
    """Random walk through belief states; yields (state, partition, y)."""
    state = uniform_init(M)
    for _ in range(steps):
        if sed:
            part = sed_partition(state)
        else:
            s0 = [int(rng.integers(0, c + 1)) for c in state.counts]
            part = make_partition(state, s0)
        y = int(rng.integers(0, 2))
        yield state, part, y
        state = bayes_update(state, part, y, params)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
