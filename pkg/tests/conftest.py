import numpy as np
import pytest

from critbrw.graph import Graph


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def graph_from_edges(edges, n=None):
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    if n is None:
        n = int(edges.max()) + 1 if len(edges) else 1
    return Graph(n, edges)


def path_graph(k):
    return graph_from_edges([(i, i + 1) for i in range(k)])


def cycle_graph(k):
    return graph_from_edges([(i, (i + 1) % k) for i in range(k)])


def random_connected_graph(rng, max_vertices=12, extra=None, min_vertices=2):
    n = int(rng.integers(min_vertices, max_vertices + 1))
    edges = {(int(rng.integers(i)), i) for i in range(1, n)}
    extra = int(rng.integers(0, n + 1)) if extra is None else extra
    for _ in range(extra):
        a, b = rng.choice(n, 2, replace=False)
        edges.add((int(min(a, b)), int(max(a, b))))
    return Graph(n, sorted(edges))
