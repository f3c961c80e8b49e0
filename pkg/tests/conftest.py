import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from sphwave import wavelets as wl
from sphwave.mesh import build_mesh
from sphwave.waveletopt import build_optimized_bank

settings.register_profile(
    "sphwave", max_examples=25, deadline=None,
    suppress_health_check=[HealthCheck.function_scoped_fixture, HealthCheck.too_slow],
)
settings.load_profile("sphwave")


@pytest.fixture(scope="session")
def mesh2():
    return build_mesh(2)


@pytest.fixture(scope="session")
def mesh3():
    return build_mesh(3)


@pytest.fixture(scope="session")
def banks2(mesh2):
    return {fam: wl.build_filter_bank(mesh2, fam) for fam in wl.FAMILIES}


@pytest.fixture(scope="session")
def opt_result(mesh2):
    return build_optimized_bank(mesh2)


@pytest.fixture(scope="session")
def opt_bank(opt_result):
    return opt_result[0]


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    lines = []
    for reports in terminalreporter.stats.values():
        for rep in reports:
            if getattr(rep, "when", None) != "call":
                continue
            lines += [v for k, v in getattr(rep, "user_properties", ()) if k == "acceptance"]
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
