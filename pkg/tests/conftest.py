import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from mlnc.data import DESK_SPEC, FIXTURE_SEED, FIXTURE_SPEC, generate_synthetic
from mlnc.graph import Graph

settings.register_profile(
    "default", deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

ACCEPTANCE_LINES = []


@pytest.fixture
def accept():
    """Record one pass/fail line per acceptance criterion for the terminal summary."""

    def record(number, ok, detail):
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'} | {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def fixture_graph():
    return generate_synthetic(FIXTURE_SPEC, FIXTURE_SEED)


@pytest.fixture(scope="session")
def desk_graph():
    return generate_synthetic(DESK_SPEC, 0)


def two_node_graph(features=((2.0,), (0.0,))):
    return Graph.from_edges(2, [(0, 1)], features, [[1], [0]])


def random_graph(rng, n, d=3, c=2, p=0.3):
    iu, ju = np.triu_indices(n, k=1)
    keep = rng.random(iu.size) < p
    feats = rng.normal(size=(n, d))
    labels = (rng.random((n, c)) < 0.5).astype(int)
    return Graph.from_edges(n, np.stack([iu[keep], ju[keep]], 1), feats, labels)
