import numpy as np
import pytest

from meanfield.graph import WeightedGraph, random_connected_graph
from meanfield.phi import ExpPhi, ExpPolyPhi, QuadLogPhi

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def k2():
    return WeightedGraph(["a", "b"], [1.0, 1.0], [("a", "b", 1.0)])


@pytest.fixture
def p3():
    return WeightedGraph(["a", "b", "c"], [1.0, 1.0, 1.0], [("a", "b", 1.0), ("b", "c", 1.0)])


def make_graph(seed, n_min=2, n_max=30):
    rng = np.random.default_rng(seed)
    return random_connected_graph(int(rng.integers(n_min, n_max + 1)), rng), rng


def builtin_phis():
    return [ExpPhi(1.0), ExpPolyPhi(1.0, 1.0, 2.0), QuadLogPhi(np.e)]
