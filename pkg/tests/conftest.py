import re

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from bisac.model import ScenarioConfig, generate_pilots

settings.register_profile(
    "default", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


@pytest.fixture(scope="session")
def ref_cfg():
    return ScenarioConfig()


@pytest.fixture(scope="session")
def ref_pilots(ref_cfg):
    return generate_pilots(ref_cfg)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_ACCEPTANCE = pytest.StashKey[dict]()


@pytest.fixture
def accept(request):
    """Record one acceptance verdict; the terminal summary lists them all."""
    store = request.config.stash.setdefault(_ACCEPTANCE, {})

    def record(criterion: str, passed: bool, detail: str) -> bool:
        line = f"[{'PASS' if passed else 'FAIL'}] {criterion}: {detail}"
        store[criterion] = line
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    store = config.stash.get(_ACCEPTANCE, {})
    if not store:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(store, key=lambda k: (int(re.match(r"C(\d+)", k).group(1)), k)):
        terminalreporter.write_line(store[key])
