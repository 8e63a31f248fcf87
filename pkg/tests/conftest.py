import numpy as np
import pytest
from hypothesis import HealthCheck, settings, strategies as st

from nonstop_transport.config import ScenarioConfig
from nonstop_transport.model import LoadState, SystemGeometry
from nonstop_transport.simulator import build_geometry
from nonstop_transport.so3 import expm_so3

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

finite = st.floats(-5.0, 5.0, allow_nan=False, allow_infinity=False)
vec3 = st.tuples(finite, finite, finite).map(np.array)


@st.composite
def rotations(draw):
    phi = draw(st.tuples(*[st.floats(-np.pi, np.pi)] * 3))
    return expm_so3(np.array(phi))


def random_rotation(rng):
    return expm_so3(rng.uniform(-np.pi, np.pi, 3))


def random_geometry(rng, n=None):
    n = int(rng.integers(3, 8)) if n is None else n
    ang = np.sort(rng.uniform(0, 2 * np.pi, n))
    r = rng.uniform(0.2, 0.8, n)
    b = np.column_stack([r * np.cos(ang), r * np.sin(ang), rng.uniform(-0.1, 0.1, n)])
    return SystemGeometry(b=b, L=rng.uniform(0.5, 1.2, n))


@pytest.fixture
def geom4():
    return build_geometry(ScenarioConfig())


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def hanging_load():
    return LoadState.at_rest()


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance")
    if mod is not None and mod.REPORT:
        terminalreporter.section("acceptance criteria")
        for line in sorted(mod.REPORT):
            terminalreporter.write_line(line)
