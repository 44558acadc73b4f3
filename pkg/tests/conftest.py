import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from levylab.exponents import make_catalog_process, NormalJumps

settings.register_profile("levylab", deadline=None, max_examples=30,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("levylab")


def catalog():
    """The five reference processes used throughout the suite."""
    return {
        "brownian": make_catalog_process("brownian"),
        "poisson": make_catalog_process("poisson", m=2.0),
        "compound_poisson": make_catalog_process("compound_poisson", m=1.0, jumps=NormalJumps(0.0, 0.25)),
        "gamma": make_catalog_process("gamma", m=1.0),
        "variance_gamma": make_catalog_process("variance_gamma", m=1.0),
    }


CATALOG_NAMES = list(catalog())
PURE_JUMP_NAMES = [k for k in CATALOG_NAMES if k != "brownian"]


@pytest.fixture(params=CATALOG_NAMES)
def process(request):
    return catalog()[request.param]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_ACCEPTANCE_KEY = pytest.StashKey[list]()


@pytest.fixture
def acceptance_report(request):
    lines = request.config.stash.setdefault(_ACCEPTANCE_KEY, [])

    def report(number: int, title: str, ok: bool, detail: str) -> None:
        line = f"ACCEPTANCE {number:2d} {'PASS' if ok else 'FAIL'}  {title}: {detail}"
        lines.append((number, line))
        print(line)

    return report


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE_KEY, [])
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(lines):
        terminalreporter.write_line(line)
