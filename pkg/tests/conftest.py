import numpy as np
import pytest

from bethe_hessian.graph import SparseGraph

# criterion number -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE_RESULTS = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_RESULTS):
        ok, detail = ACCEPTANCE_RESULTS[key]
        terminalreporter.write_line(f"criterion {key:2d}: {'PASS' if ok else 'FAIL'}  {detail}")


def random_graph(rng, n, p):
    """Erdos-Renyi graph as a SparseGraph."""
    iu, ju = np.triu_indices(n, 1)
    keep = rng.random(len(iu)) < p
    return SparseGraph.from_edges(n, np.column_stack([iu[keep], ju[keep]]))


def random_connected_graph(rng, n, extra):
    """Random spanning tree plus ``extra`` random additional edges."""
    edges = {(int(rng.integers(0, i)), i) for i in range(1, n)}
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n) if (i, j) not in edges]
    rng.shuffle(pairs)
    edges |= set(map(tuple, pairs[:extra]))
    return SparseGraph.from_edges(n, sorted(edges))


@pytest.fixture
def triangle():
    return SparseGraph.from_edges(3, [(0, 1), (1, 2), (0, 2)])


@pytest.fixture
def single_edge():
    return SparseGraph.from_edges(2, [(0, 1)])


@pytest.fixture
def path3():
    return SparseGraph.from_edges(3, [(0, 1), (1, 2)])
