import numpy as np
import pytest

from etconsensus.graph import WeightedDigraph
from etconsensus.scenario import load_scenario

X0 = (-1.0, 0.0, 2.0, 2.0, 1.0)

FIG2_EDGES = [(0, 1, 1.0), (1, 2, 1.0), (1, 3, 0.5), (2, 3, 1.0), (3, 4, 1.5), (4, 0, 1.0), (4, 1, 0.5)]


def fig2_graph() -> WeightedDigraph:
    return WeightedDigraph(5, FIG2_EDGES)


def fig1_graph() -> WeightedDigraph:
    return WeightedDigraph.undirected(5, [(0, 1), (0, 2), (1, 3), (3, 4)], 1.0)


def pair_graph() -> WeightedDigraph:
    return WeightedDigraph.undirected(2, [(0, 1)], 1.0)


def complete_graph(n: int) -> WeightedDigraph:
    return WeightedDigraph(n, [(i, j, 1.0) for i in range(n) for j in range(n) if i != j])


@pytest.fixture
def fig2():
    return fig2_graph()


@pytest.fixture
def fig1():
    return fig1_graph()


@pytest.fixture(scope="session")
def fig2_traj():
    from etconsensus.engine import run
    return run(load_scenario("fig2"))


@pytest.fixture(scope="session")
def fig1_traj():
    from etconsensus.engine import run
    return run(load_scenario("fig1"))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split("criterion")[1].split(":")[0])):
            terminalreporter.write_line(line)
