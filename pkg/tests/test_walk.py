import numpy as np
import pytest

from conftest import cycle_graph, graph_from_edges, path_graph
from critbrw.errors import PathTooShort, TooLarge
from critbrw.laws import geometric_half
from critbrw.trace import TraceGraph, build_trace, embed_tree
from critbrw.trees import sample_gw_size
from critbrw.walk import (Profile, displacement_profile, dyadic_grid, exact_displacements,
                          exact_return_probabilities, loglog_slope, rescaled_path, return_probability_profile,
                          simulate_walk, walk_observables)


@pytest.fixture(scope="module")
def small_trace():
    rng = np.random.default_rng(17)
    while True:
        trace = build_trace(embed_tree(sample_gw_size(geometric_half(), 180, rng), 3, rng))
        if trace.n <= 200 and trace.n_edges >= trace.n:  # keep one with loops
            return trace


def line(k):
    """Path on the first axis of Z^1 with coordinates."""
    return TraceGraph(np.arange(k + 1).reshape(-1, 1), [(i, i + 1) for i in range(k)])


def test_single_edge_alternates(rng):
    path = simulate_walk(path_graph(1), 0, 11, rng)
    assert path.steps == 11
    assert path.vertices.tolist() == [0, 1] * 6


def test_steps_follow_edges(small_trace, rng):
    path = simulate_walk(small_trace, 0, 5000, rng)
    edges = {tuple(e) for e in small_trace.edges.tolist()}
    for a, b in zip(path.vertices[:-1].tolist(), path.vertices[1:].tolist()):
        assert (min(a, b), max(a, b)) in edges
    assert np.array_equal(path.positions, small_trace.coords[path.vertices])


def test_seed_determinism(small_trace):
    a = simulate_walk(small_trace, 0, 1000, np.random.default_rng(4))
    b = simulate_walk(small_trace, 0, 1000, np.random.default_rng(4))
    assert np.array_equal(a.vertices, b.vertices)


def test_bad_start_rejected(rng):
    with pytest.raises(ValueError):
        simulate_walk(path_graph(2), 7, 10, rng)
    with pytest.raises(ValueError):
        simulate_walk(graph_from_edges([(0, 1)], n=3), 2, 10, rng)


def test_occupation_is_proportional_to_degree(rng):
    graph = graph_from_edges([(0, 1), (1, 2), (2, 0), (2, 3), (3, 4), (4, 5), (5, 3), (1, 6)])
    steps, batches = 1_000_000, 50
    visits = simulate_walk(graph, 0, steps, rng).vertices[1:]
    per_batch = np.array([np.bincount(b, minlength=graph.n) / len(b) for b in np.array_split(visits, batches)])
    freq = per_batch.mean(axis=0)
    se = per_batch.std(axis=0, ddof=1) / np.sqrt(batches)
    target = graph.degree / graph.degree.sum()
    assert np.all(np.abs(freq - target) <= 3 * se)


def test_dyadic_grid():
    assert dyadic_grid(10).tolist() == [1, 2, 4, 8]
    assert dyadic_grid(8, first=2).tolist() == [2, 4, 8]
    with pytest.raises(ValueError):
        dyadic_grid(1, first=2)


def test_rescaled_path(rng):
    n = 16
    path = simulate_walk(line(200), 0, 64, rng)
    r = rescaled_path(path, n, 1.0, 0.25)
    assert r.times.tolist() == [0, 0.25, 0.5, 0.75, 1.0]
    assert np.all(r.values[0] == 0)
    idx = (r.times * n ** 1.5).astype(int)
    assert np.allclose(r.values[:, 0], path.positions[idx, 0] / 2.0)
    with pytest.raises(PathTooShort):
        rescaled_path(path, 4 * n, 1.0, 0.25)
    # doubling n multiplies the required steps by 2^{3/2}
    assert int(2 ** 1.5 * n ** 1.5) == int((2 * n) ** 1.5)


def test_rescaled_path_needs_positions(rng):
    with pytest.raises(ValueError):
        rescaled_path(simulate_walk(path_graph(3), 0, 10, rng), 1, 1.0, 0.5)


def test_return_probability_on_an_edge(rng):
    prof = return_probability_profile(path_graph(1), 0, 8, 100, rng)
    assert prof.m.tolist() == [1, 2, 4, 8]
    assert np.all(prof.estimate == 1.0)
    with pytest.raises(ValueError):
        return_probability_profile(path_graph(1), 0, 1, 10, rng)


def test_displacement_starts_at_zero(small_trace, rng):
    prof = displacement_profile(small_trace, 0, 16, 200, rng)
    assert prof.m[0] == 0 and prof.estimate[0] == 0
    with pytest.raises(ValueError):
        displacement_profile(path_graph(3), 0, 16, 10, rng)


def test_monte_carlo_matches_exact_chain(small_trace, rng):
    walkers = 20_000
    ret = return_probability_profile(small_trace, 0, 64, walkers, rng)
    exact = exact_return_probabilities(small_trace, 0, ret.m)
    assert np.all(np.abs(ret.estimate - exact) <= 3 * np.maximum(ret.stderr, 1e-12))
    disp = displacement_profile(small_trace, 0, 64, walkers, rng)
    exact = exact_displacements(small_trace, 0, disp.m)
    assert np.all(np.abs(disp.estimate - exact) <= 3 * np.maximum(disp.stderr, 1e-12))


def test_exact_return_probabilities_decrease(small_trace):
    p = exact_return_probabilities(small_trace, 0, dyadic_grid(256))
    assert np.all(np.diff(p) <= 1e-12)


def test_exact_displacement_grows_on_a_tree_like_trace():
    rng = np.random.default_rng(2)
    trace = build_trace(embed_tree(sample_gw_size(geometric_half(), 150, rng), 15, rng))
    # even times only: after one step the walker is always at distance 1
    m = np.concatenate(([0], dyadic_grid(64, first=2)))
    assert np.all(np.diff(exact_displacements(trace, 0, m)) >= -1e-12)


def test_exact_chain_size_limit():
    with pytest.raises(TooLarge):
        exact_return_probabilities(path_graph(2500), 0, [1])


def test_exact_chain_on_a_cycle():
    # even cycle of length 4: p_2(0,0) = 1/2
    assert exact_return_probabilities(cycle_graph(4), 0, [1])[0] == pytest.approx(0.5)


def test_walk_observables_shapes(small_trace, rng):
    times = np.array([0, 2, 8])
    ret, disp = walk_observables(small_trace, 0, times, 300, rng)
    assert ret.shape == disp.shape == (300, 3)
    assert np.all(ret[:, 0] == 1) and np.all(disp[:, 0] == 0)


def test_loglog_slope_recovers_power_law():
    x = dyadic_grid(4096)
    fit = loglog_slope(x, 3.0 * x ** -0.75)
    assert fit.slope == pytest.approx(-0.75, abs=1e-12)
    assert fit.intercept == pytest.approx(np.log(3.0))
    assert fit.r2 == pytest.approx(1.0)
    window = loglog_slope(x, np.where(x < 16, 1.0, x ** 0.5), window=(16, 4096))
    assert window.slope == pytest.approx(0.5) and window.points == 9
    with pytest.raises(ValueError):
        loglog_slope([1, 2], [1, 0])


def test_loglog_slope_stderr_reflects_noise(rng):
    x = dyadic_grid(4096).astype(float)
    y = x ** 0.2 * np.exp(rng.normal(0, 0.05, len(x)))
    fit = loglog_slope(x, y, yerr=0.05 * y)
    assert abs(fit.slope - 0.2) < 4 * fit.stderr
    assert 0 < fit.stderr < 0.05


def test_profile_csv(tmp_path):
    prof = Profile(np.array([1, 2]), np.array([0.5, 0.25]), np.array([0.1, 0.1]), "return_probability")
    path = tmp_path / "p.csv"
    prof.write_csv(path)
    assert path.read_text().splitlines() == ["m,return_probability,stderr", "1,0.5,0.1", "2,0.25,0.1"]


@pytest.mark.slow
def test_rescaled_maximum_is_tight():
    rng = np.random.default_rng(23)
    spreads = []
    for n in (4000, 16000, 64000):
        maxima = []
        for _ in range(500):
            trace = build_trace(embed_tree(sample_gw_size(geometric_half(), n, rng), 15, rng))
            path = simulate_walk(trace, 0, int(n ** 1.5) + 1, rng)
            maxima.append(np.linalg.norm(rescaled_path(path, n, 1.0, 1e-3).values, axis=1).max())
        q1, q3 = np.percentile(maxima, [25, 75])
        spreads.append(q3 - q1)
    # interquartile ranges within 25% of each other
    assert max(spreads) <= 1.25 * min(spreads), spreads
