import numpy as np
import pytest

from critbrw.laws import geometric_half
from critbrw.trace import (build_trace, cumulative_volumes, embed_tree, embed_with_steps, read_trace,
                           write_trace)
from critbrw.trees import PlaneTree, sample_gw_size


def path_tree(k):
    return PlaneTree.from_parents(np.arange(-1, k))


def broom(branches, length):
    """Root with ``branches`` disjoint paths of ``length`` edges, in preorder."""
    parent = [-1]
    for _ in range(branches):
        parent.append(0)
        for _ in range(length - 1):
            parent.append(len(parent) - 1)
    return PlaneTree.from_parents(parent)


@pytest.fixture(scope="module")
def sample_traces():
    rng = np.random.default_rng(7)
    out = []
    for n in (50, 500, 3000):
        for d in (2, 3, 15):
            spatial = embed_tree(sample_gw_size(geometric_half(), n, rng), d, rng)
            out.append((spatial, build_trace(spatial)))
    return out


def test_single_edge_steps_uniform(rng):
    tree = path_tree(1)
    draws = 100_000
    spatial = embed_tree(broom(draws, 1), 2, rng)
    child = spatial.positions[1:]
    for point in ([1, 0], [-1, 0], [0, 1], [0, -1]):
        freq = np.mean(np.all(child == point, axis=1))
        assert abs(freq - 0.25) < 3 * np.sqrt(0.25 * 0.75 / draws)
    assert np.all(embed_tree(tree, 2, rng).positions[0] == 0)


def test_coordinate_variance_is_depth_over_d(rng):
    d, depth = 4, 100
    samples = []
    for _ in range(50):
        spatial = embed_tree(broom(2000, depth), d, rng)
        ends = np.arange(depth, spatial.tree.n, depth)
        samples.append(spatial.positions[ends])
    x = np.concatenate(samples).astype(float)
    assert len(x) == 100_000
    assert x.var(axis=0) == pytest.approx(np.full(d, depth / d), rel=0.03)


def test_root_at_origin(rng):
    spatial = embed_tree(sample_gw_size(geometric_half(), 200, rng), 3, rng)
    assert np.all(spatial.positions[0] == 0)
    with pytest.raises(ValueError):
        embed_tree(path_tree(2), 0, rng)


def test_back_and_forth_path_collapses():
    trace = build_trace(embed_with_steps(path_tree(2), [1, -1]))
    assert trace.n == 2
    assert trace.n_edges == 1
    assert trace.origin == 0
    assert trace.coords.tolist() == [[0], [1]]
    assert trace.tree_to_graph.tolist() == [0, 1, 0]


def test_trace_invariants(sample_traces):
    for spatial, trace in sample_traces:
        n = spatial.tree.n
        assert trace.n <= n and trace.n_edges <= n - 1
        assert trace.is_connected()
        assert trace.origin == 0
        assert len(trace.point_index) == trace.n
        assert len({tuple(sorted(e)) for e in trace.edges.tolist()}) == trace.n_edges
        assert trace.degree.max() <= 2 * spatial.d
        # every vertex is an image and every edge a unit lattice step
        assert np.array_equal(trace.coords[trace.tree_to_graph], spatial.positions)
        diffs = np.abs(trace.coords[trace.edges[:, 0]].astype(int) - trace.coords[trace.edges[:, 1]])
        assert np.all(diffs.sum(axis=1) == 1)
        # every graph edge is the image of a tree edge
        g = trace.tree_to_graph
        images = {tuple(sorted(p)) for p in zip(g[spatial.tree.parent[1:]].tolist(), g[1:].tolist())}
        assert images == {tuple(e) for e in trace.edges.tolist()}


def test_vertices_numbered_by_first_appearance(sample_traces):
    for _, trace in sample_traces:
        assert np.all(np.diff(trace.vertex_first) > 0)
        first_seen = np.unique(trace.tree_to_graph, return_index=True)[1]
        assert np.array_equal(first_seen, trace.vertex_first)


def test_rebuild_is_deterministic(sample_traces):
    for spatial, trace in sample_traces:
        again = build_trace(spatial)
        assert np.array_equal(again.coords, trace.coords)
        assert np.array_equal(again.edges, trace.edges)


def test_graph_distance_below_tree_depth(sample_traces):
    for spatial, trace in sample_traces:
        dist = trace.distances_from(trace.origin)[trace.tree_to_graph]
        assert np.all(dist <= spatial.tree.depth)


def test_injective_path_is_a_path():
    trace = build_trace(embed_with_steps(path_tree(4), [1, 2, 1, 2]))
    assert trace.n == 5 and trace.n_edges == 4


def test_vertex_ratio_concentrates(rng):
    n, ratios = 10_000, []
    for _ in range(100):
        trace = build_trace(embed_tree(sample_gw_size(geometric_half(), n, rng), 15, rng))
        ratios.append(trace.n / n)
    ratios = np.array(ratios)
    assert 0 < ratios.mean() < 1
    assert ratios.std() / ratios.mean() < 0.05


def test_cumulative_volume_profiles(sample_traces):
    for spatial, trace in sample_traces:
        vertex, edge = cumulative_volumes(spatial, trace)
        n = spatial.tree.n
        assert len(vertex) == len(edge) == n + 1
        assert vertex[0] == 0 and vertex[1] == 1 and edge[0] == 0 and edge[1] == 0
        assert set(np.diff(vertex).tolist()) <= {0, 1}
        assert set(np.diff(edge).tolist()) <= {0, 1}
        assert vertex[-1] == trace.n and edge[-1] == trace.n_edges


def test_cumulative_volumes_match_brute_force(rng):
    spatial = embed_tree(sample_gw_size(geometric_half(), 300, rng), 2, rng)
    vertex, edge = cumulative_volumes(spatial)
    pos = [tuple(p) for p in spatial.positions.tolist()]
    parent = spatial.tree.parent
    for j in range(spatial.tree.n + 1):
        assert vertex[j] == len(set(pos[:j]))
        assert edge[j] == len({frozenset((pos[parent[v]], pos[v])) for v in range(1, j)})


def test_edge_volume_is_linear(rng):
    n, r2 = 20_000, []
    a = np.linspace(0.05, 1, 20)
    for _ in range(200):
        _, edge = cumulative_volumes(embed_tree(sample_gw_size(geometric_half(), n, rng), 5, rng))
        y = edge[np.floor(a * n).astype(int)] / n
        r2.append(np.corrcoef(a, y)[0, 1] ** 2)
    assert np.mean(r2) >= 0.99


def test_serialization_round_trip(sample_traces, tmp_path):
    for k, (_, trace) in enumerate(sample_traces):
        path = tmp_path / f"t{k}.txt"
        write_trace(trace, path)
        back = read_trace(path)
        assert np.array_equal(back.coords, trace.coords)
        assert np.array_equal(back.edges, trace.edges)
        assert back.origin == trace.origin


def test_read_rejects_foreign_file(tmp_path):
    path = tmp_path / "x.txt"
    path.write_text("hello\n")
    with pytest.raises(ValueError):
        read_trace(path)
