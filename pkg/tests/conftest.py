import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from afemtopo.adapt import AfemConfig, afem_drive
from afemtopo.bench import preset
from afemtopo.mesh import build_rect_mesh, from_arrays

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

ALL_WALL = [("wall", lambda x, y: np.ones_like(x, dtype=bool))]


def unit_square(n=1, spec=ALL_WALL):
    return build_rect_mesh(((0.0, 1.0), (0.0, 1.0)), n, n, spec)


def channel_spec():
    return [
        ("inlet", lambda x, y: x < 1e-10),
        ("outlet", lambda x, y: x > 1 - 1e-10),
        ("wall", lambda x, y: np.ones_like(x, dtype=bool)),
    ]


def single_triangle():
    return from_arrays([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], [[0, 1, 2]], ALL_WALL)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# Full benchmark runs are expensive; each is computed once per session.
_RUNS = {}


def benchmark_run(name, strategy):
    key = (name, strategy)
    if key not in _RUNS:
        cfg = AfemConfig(K=4 if strategy == "adaptive" else 3, strategy=strategy)
        _RUNS[key] = afem_drive(preset(name), cfg)
    return _RUNS[key]


@pytest.fixture(scope="session")
def run_a_adaptive():
    return benchmark_run("left_inflow", "adaptive")


@pytest.fixture(scope="session")
def run_a_uniform():
    return benchmark_run("left_inflow", "uniform")


@pytest.fixture(scope="session")
def run_b_adaptive():
    return benchmark_run("three_inflows", "adaptive")


@pytest.fixture(scope="session")
def run_b_uniform():
    return benchmark_run("three_inflows", "uniform")


# Acceptance verdicts, echoed once more at the end of the session.
ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)
