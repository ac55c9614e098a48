import itertools

import networkx as nx
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import cycle_graph, graph_from_edges, path_graph, random_connected_graph
from critbrw.cuts import CutStructure
from critbrw.errors import Disconnected, NonPositiveInput, TooLarge
from critbrw.graph import Graph
from critbrw.laws import geometric_half
from critbrw.resistance import (ResistanceEngine, brute_resistance_oracle, effective_resistance,
                                escape_probabilities, star_from_conductances, star_from_triangle,
                                terminal_conductances, triangle_escape_resistances)
from critbrw.trace import build_trace, embed_tree
from critbrw.trees import sample_gw_size


def test_single_edge():
    assert effective_resistance(path_graph(1), 0, 1) == 1.0
    assert brute_resistance_oracle(path_graph(1), 0, 1) == pytest.approx(1.0)


def test_triangle_adjacent():
    assert effective_resistance(cycle_graph(3), 0, 1) == pytest.approx(2 / 3, abs=1e-12)


@pytest.mark.parametrize("k", [1, 2, 5, 40])
def test_path_is_exact(k):
    assert effective_resistance(path_graph(k), 0, k) == k


def test_square_opposite_corners():
    assert brute_resistance_oracle(cycle_graph(4), 0, 2) == pytest.approx(1.0, abs=1e-12)
    assert effective_resistance(cycle_graph(4), 0, 2) == pytest.approx(1.0, abs=1e-12)


def test_same_terminal_is_zero():
    assert effective_resistance(cycle_graph(5), 2, 2) == 0.0


def test_disconnected_terminals_rejected():
    graph = graph_from_edges([(0, 1), (2, 3)])
    with pytest.raises(Disconnected):
        brute_resistance_oracle(graph, 0, 3)


def test_oracle_size_limit():
    with pytest.raises(TooLarge):
        brute_resistance_oracle(path_graph(2500), 0, 1)


def test_unknown_method():
    with pytest.raises(ValueError):
        effective_resistance(path_graph(2), 0, 2, method="magic")


def test_engine_matches_oracle_on_random_graphs(rng):
    worst = 0.0
    for _ in range(1000):
        graph = random_connected_graph(rng, 12)
        a, b = rng.choice(graph.n, 2, replace=False)
        r = effective_resistance(graph, int(a), int(b))
        worst = max(worst, abs(r - brute_resistance_oracle(graph, int(a), int(b))))
    assert worst <= 1e-9


def test_engine_matches_oracle_on_traces(rng):
    for d in (2, 3):
        trace = build_trace(embed_tree(sample_gw_size(geometric_half(), 1500, rng), d, rng))
        engine = ResistanceEngine(trace)
        for _ in range(20):
            a, b = rng.choice(trace.n, 2, replace=False)
            assert engine(a, b) == pytest.approx(brute_resistance_oracle(trace, int(a), int(b)), abs=1e-9)


def test_iterative_solver_on_large_bubble():
    # a 30x30 grid is a single bubble of 900 vertices, beyond the direct limit
    side = 30
    idx = np.arange(side * side).reshape(side, side)
    edges = np.concatenate((np.stack((idx[:, :-1].ravel(), idx[:, 1:].ravel()), 1),
                            np.stack((idx[:-1].ravel(), idx[1:].ravel()), 1)))
    graph = Graph(side * side, edges)
    engine = ResistanceEngine(graph)
    r = engine(0, side * side - 1)
    assert engine.stats.iterative == 1
    assert r == pytest.approx(brute_resistance_oracle(graph, 0, side * side - 1), abs=1e-9)


def test_rayleigh_monotonicity(rng):
    for _ in range(300):
        graph = random_connected_graph(rng, 10)
        missing = [(a, b) for a, b in itertools.combinations(range(graph.n), 2)
                   if not graph.distances_from(a)[b] == 1]
        if not missing:
            continue
        a, b = rng.choice(graph.n, 2, replace=False)
        u, v = missing[int(rng.integers(len(missing)))]
        before = brute_resistance_oracle(graph, int(a), int(b))
        after = brute_resistance_oracle(graph.with_edge(u, v), int(a), int(b))
        assert after <= before + 1e-12
        assert effective_resistance(graph.with_edge(u, v), int(a), int(b)) == pytest.approx(after, abs=1e-9)


def test_bounded_by_graph_distance(rng):
    for _ in range(300):
        graph = random_connected_graph(rng, 12)
        a, b = rng.choice(graph.n, 2, replace=False)
        assert effective_resistance(graph, int(a), int(b)) <= graph.distances_from(int(a))[b] + 1e-12


def test_metric_properties(rng):
    for _ in range(30):
        graph = random_connected_graph(rng, 10)
        r = np.array([[brute_resistance_oracle(graph, a, b) for b in range(graph.n)] for a in range(graph.n)])
        assert np.allclose(r, r.T, atol=1e-12)
        for a, b, c in itertools.product(range(graph.n), repeat=3):
            assert r[a, c] <= r[a, b] + r[b, c] + 1e-12


def test_series_law_across_a_cut_vertex(rng):
    checked = 0
    for _ in range(300):
        graph = random_connected_graph(rng, 12)
        g = nx.Graph(graph.edges.tolist())
        for c in nx.articulation_points(g):
            h = g.copy()
            h.remove_node(c)
            parts = list(nx.connected_components(h))
            a, b = min(parts[0]), min(parts[1])
            total = brute_resistance_oracle(graph, a, c) + brute_resistance_oracle(graph, c, b)
            assert effective_resistance(graph, a, b) == pytest.approx(total, abs=1e-12)
            checked += 1
            break
    assert checked > 50


# ---------------------------------------------------------------------------
# triangles and stars

def test_star_of_equal_triangle():
    assert star_from_triangle(1, 1, 1) == pytest.approx((1 / 3, 1 / 3, 1 / 3))


def test_star_of_unequal_triangle():
    x, y, z = star_from_triangle(1, 2, 3)
    assert (x, y, z) == pytest.approx((0.5, 1 / 3, 1.0))
    assert x + y == pytest.approx(5 / 6)  # 1 in parallel with 2 + 3


@given(st.tuples(*[st.floats(0.01, 100)] * 3), st.floats(0.01, 100))
@settings(max_examples=200, deadline=None)
def test_star_is_homogeneous(r, c):
    scaled = star_from_triangle(*(c * x for x in r))
    assert scaled == pytest.approx(tuple(c * x for x in star_from_triangle(*r)), rel=1e-9)


@given(st.tuples(*[st.floats(0.01, 100)] * 3))
@settings(max_examples=200, deadline=None)
def test_star_preserves_pairwise_resistances(r):
    r_xy, r_yz, r_zx = r
    sx, sy, sz = star_from_triangle(*r)

    def parallel(a, b):
        return a * b / (a + b)

    assert sx + sy == pytest.approx(parallel(r_xy, r_yz + r_zx), rel=1e-9)
    assert sy + sz == pytest.approx(parallel(r_yz, r_xy + r_zx), rel=1e-9)
    assert sz + sx == pytest.approx(parallel(r_zx, r_xy + r_yz), rel=1e-9)


def test_star_rejects_non_positive():
    with pytest.raises(NonPositiveInput):
        star_from_triangle(1, 0, 2)
    with pytest.raises(NonPositiveInput):
        star_from_triangle(1, -1, 2)
    with pytest.raises(NonPositiveInput):
        star_from_conductances(1, 0, 0)


def test_star_with_an_open_side():
    # with no direct x-z conductance y sits at the star centre
    assert star_from_triangle(1, 1, np.inf) == pytest.approx(star_from_conductances(1, 1, 0))
    assert star_from_conductances(1, 1, 0) == pytest.approx((1.0, 0.0, 1.0))


def test_unit_triangle_escape_resistances():
    assert triangle_escape_resistances(cycle_graph(3), 0, 1, 2) == pytest.approx((1, 1, 1), abs=1e-12)


def test_hexagon_escape_resistances_are_equal():
    r = triangle_escape_resistances(cycle_graph(6), 0, 2, 4)
    assert r == pytest.approx((2, 2, 2), abs=1e-12)


def test_escape_probabilities_by_simulation(rng):
    graph = graph_from_edges([(0, 1), (1, 2), (2, 3), (3, 0), (1, 3), (3, 4), (4, 2)])
    x, y, z = 0, 2, 4
    p = escape_probabilities(graph, x, y, z)
    trials, hits = 20_000, 0
    for _ in range(trials):
        v = int(rng.choice(graph.neighbors(x)))
        while v not in (x, y, z):
            v = int(rng.choice(graph.neighbors(v)))
        hits += v == y
    est = hits / trials
    assert abs(est - p[(x, y)]) < 4 * np.sqrt(est * (1 - est) / trials)


def test_star_reproduces_terminal_resistances(rng):
    checked = 0
    for _ in range(200):
        graph = random_connected_graph(rng, 12, extra=8, min_vertices=3)
        x, y, z = (int(v) for v in rng.choice(graph.n, 3, replace=False))
        cond = -terminal_conductances(graph, (x, y, z))
        arms = star_from_conductances(cond[0, 1], cond[1, 2], cond[2, 0])
        for (i, a), (j, b) in itertools.combinations(enumerate((x, y, z)), 2):
            assert arms[i] + arms[j] == pytest.approx(brute_resistance_oracle(graph, a, b), abs=1e-9)
        checked += 1
    assert checked == 200


def test_terminal_conductances_match_full_graph(rng):
    for _ in range(50):
        graph = random_connected_graph(rng, 12, extra=6, min_vertices=3)
        terms = [int(v) for v in rng.choice(graph.n, 3, replace=False)]
        local = terminal_conductances(graph, terms, cuts=CutStructure(graph, root=terms[0]))
        full = terminal_conductances(graph, terms, region=np.arange(graph.n))
        off = ~np.eye(3, dtype=bool)
        assert np.allclose(local[off], full[off], atol=1e-12)
