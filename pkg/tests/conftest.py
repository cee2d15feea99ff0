import functools

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from wmsindy.dynamics import get_system, simulate_truth

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@functools.lru_cache(maxsize=None)
def _truth(name: str, t_total: float, dt: float):
    system = get_system(name)
    return simulate_truth(system, system.x0, t_total, dt)


@pytest.fixture(scope="session")
def lorenz_truth():
    return _truth("lorenz", 25.0, 0.01)


@pytest.fixture(scope="session")
def lorenz_short():
    return _truth("lorenz", 2.0, 0.01)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_ACCEPTANCE_KEY = pytest.StashKey[dict]()


@pytest.fixture
def acceptance_log(request):
    lines = request.config.stash.setdefault(_ACCEPTANCE_KEY, {})

    def log(number: int, ok: bool, detail: str) -> None:
        lines[number] = f"{'PASS' if ok else 'FAIL'} criterion {number}: {detail}"
        print(lines[number])

    return log


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE_KEY, {})
    if lines:
        terminalreporter.section("acceptance")
        for number in sorted(lines):
            terminalreporter.write_line(lines[number])
