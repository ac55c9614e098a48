import networkx as nx
import numpy as np
import pytest

from conftest import cycle_graph, graph_from_edges, path_graph, random_connected_graph
from critbrw.cuts import CutStructure, find_cut_bonds, loopless_ancestor, loopless_flags, project_pi_n
from critbrw.errors import Disconnected, NoCutPoints
from critbrw.laws import geometric_half
from critbrw.resistance import ResistanceEngine, effective_resistance
from critbrw.skeleton import build_GK, reduced_tree, sausage_stats, skeletonize, volume_discrepancy
from critbrw.trace import build_trace, embed_tree, embed_with_steps
from critbrw.trees import PlaneTree, sample_gw_size


def to_nx(graph):
    g = nx.Graph()
    g.add_nodes_from(range(graph.n))
    g.add_edges_from(graph.edges.tolist())
    return g


def random_trace(rng, n, d):
    spatial = embed_tree(sample_gw_size(geometric_half(), n, rng), d, rng)
    return spatial, build_trace(spatial)


def marked_skeletons(seed, cases):
    """Thin skeletons of random traces with uniformly marked points."""
    rng = np.random.default_rng(seed)
    out = []
    for n, d, K in cases:
        _, trace = random_trace(rng, n, d)
        cuts = CutStructure(trace)
        if len(cuts.cut_points) == 0:
            continue
        marks = cuts.project(trace.tree_to_graph[rng.integers(n, size=K)])
        gk = build_GK(trace, cuts, marks)
        if not gk.thin:
            continue
        engine = ResistanceEngine(trace, cuts)
        out.append((trace, cuts, gk, engine, skeletonize(trace, cuts, gk, engine, volume_scale=n)))
    return out


@pytest.fixture(scope="module")
def skeletons():
    cases = [(n, d, K) for n in (300, 2000) for d in (3, 5, 15) for K in (1, 3, 6)]
    return marked_skeletons(11, cases * 2)


# ---------------------------------------------------------------------------
# cut structure

def test_cycle_has_no_cut_bonds():
    cuts = find_cut_bonds(cycle_graph(4))
    assert len(cuts.bridge_edges) == 0
    assert cuts.n_bubbles == 1
    with pytest.raises(NoCutPoints):
        cuts.project(2)


def test_path_edges_are_all_cut_bonds():
    cuts = find_cut_bonds(path_graph(5))
    assert len(cuts.bridge_edges) == 5
    assert sorted(map(tuple, cuts.cut_bonds.tolist())) == [(i, i + 1) for i in range(5)]
    assert cuts.cut_points.tolist() == [0, 1, 2, 3, 4]


def test_theta_with_pendant():
    graph = graph_from_edges([(0, 2), (2, 1), (0, 3), (3, 1), (0, 4), (4, 1), (1, 5)])
    cuts = find_cut_bonds(graph)
    assert cuts.cut_bonds.tolist() == [[1, 5]]
    # brute force over edge removals
    g = to_nx(graph)
    brute = []
    for e in graph.edges.tolist():
        h = g.copy()
        h.remove_edge(*e)
        if not nx.is_connected(h):
            brute.append(e)
    assert brute == [[1, 5]]


def test_disconnected_graph_rejected():
    with pytest.raises(Disconnected):
        find_cut_bonds(graph_from_edges([(0, 1), (2, 3)]))


def test_bridges_match_networkx(rng):
    for _ in range(300):
        graph = random_connected_graph(rng, 14)
        root = int(rng.integers(graph.n))
        cuts = CutStructure(graph, root)
        expected = {tuple(sorted(e)) for e in nx.bridges(to_nx(graph))}
        found = {tuple(sorted(e)) for e in graph.edges[cuts.bridge_edges].tolist()}
        assert found == expected
        # cut-point is the endpoint on the root side
        dist = graph.distances_from(root)
        assert np.all(dist[cuts.bridge_cut] < dist[cuts.bridge_child])


def test_bubbles_are_two_edge_connected_components(rng):
    for _ in range(200):
        graph = random_connected_graph(rng, 14)
        cuts = CutStructure(graph)
        comps = {frozenset(c) for c in nx.connected_components(
            nx.Graph([e for e in map(tuple, graph.edges.tolist())
                      if tuple(sorted(e)) not in {tuple(sorted(b)) for b in nx.bridges(to_nx(graph))}]))}
        ours = {frozenset(cuts.members(c).tolist()) for c in range(cuts.n_bubbles) if cuts.bubble_size[c] > 1}
        assert ours == {c for c in comps if len(c) > 1}
        assert cuts.bubble_id[0] == 0
        assert np.all(cuts.bubble_parent[1:] < np.arange(1, cuts.n_bubbles))


def test_projection_hand_cases():
    graph = path_graph(2)
    cuts = CutStructure(graph)
    assert project_pi_n(graph, cuts, 2) == 1
    assert project_pi_n(graph, cuts, 1) == 1
    assert cuts.project(np.array([0, 1, 2])).tolist() == [0, 1, 1]


def test_projection_fallback_in_root_bubble():
    # square 0-1-2-3 with pendants at 2 and 1; vertex 3 has no separating cut-point
    graph = graph_from_edges([(0, 1), (1, 2), (2, 3), (3, 0), (2, 4), (1, 5)])
    cuts = CutStructure(graph)
    assert sorted(cuts.cut_points.tolist()) == [1, 2]
    assert cuts.project(3) == 1  # nearest to the root, ties broken by id


def test_projection_separates_from_root(rng):
    for _ in range(20):
        _, trace = random_trace(rng, 800, 3)
        cuts = CutStructure(trace)
        if len(cuts.cut_points) == 0:
            continue
        g = to_nx(trace)
        xs = rng.integers(trace.n, size=20)
        for x, p in zip(xs.tolist(), cuts.project(xs).tolist()):
            assert cuts.is_cut_point[p]
            if x == p or cuts.bubble_id[x] == 0 or p == 0:
                continue
            h = g.copy()
            h.remove_node(p)
            assert not nx.has_path(h, 0, x)


def test_removing_a_cut_bond_disconnects(rng):
    _, trace = random_trace(rng, 1000, 4)
    cuts = CutStructure(trace)
    g = to_nx(trace)
    for a, b in cuts.cut_bonds[:50].tolist():
        h = g.copy()
        h.remove_edge(a, b)
        assert not nx.has_path(h, a, b)


# ---------------------------------------------------------------------------
# loopless ancestors

def path_tree(k):
    return PlaneTree.from_parents(np.arange(-1, k))


def test_injective_path_is_loopless():
    spatial = embed_with_steps(path_tree(6), [1, 2, 3, 1, 2, 3])
    trace = build_trace(spatial)
    for v in range(7):
        assert loopless_ancestor(spatial, trace, v) == v
    assert loopless_flags(spatial, trace, 6).all()


def test_loop_pushes_ancestor_below_it():
    # vertices 1..5 trace a unit square and return onto the image of 1
    spatial = embed_with_steps(path_tree(7), [1, 2, 1, -2, -1, 3, 3])
    trace = build_trace(spatial)
    assert loopless_flags(spatial, trace, 7).tolist() == [True, False, False, False, False, True, True, True]
    assert [loopless_ancestor(spatial, trace, v) for v in range(8)] == [0, 0, 0, 0, 0, 5, 6, 7]


def test_root_is_its_own_loopless_ancestor(rng):
    spatial, trace = random_trace(rng, 500, 3)
    assert loopless_ancestor(spatial, trace, 0) == 0


def test_loopless_image_edge_is_a_cut_bond(rng):
    checked = 0
    for _ in range(10):
        spatial, trace = random_trace(rng, 2000, 5)
        cuts = CutStructure(trace)
        bonds = {tuple(sorted(e)) for e in cuts.cut_bonds.tolist()}
        g = trace.tree_to_graph
        parent = spatial.tree.parent
        for v in rng.integers(1, spatial.tree.n, size=10).tolist():
            path = spatial.tree.ancestors(v)
            flags = loopless_flags(spatial, trace, v)
            for a in path[1:][flags[1:]].tolist():
                assert tuple(sorted((g[parent[a]], g[a]))) in bonds
                checked += 1
    assert checked > 0


def test_loopless_flags_match_brute_force(rng):
    for _ in range(30):
        spatial, trace = random_trace(rng, 60, 2)
        tree, g = spatial.tree, trace.tree_to_graph
        v = int(rng.integers(tree.n))
        path = tree.ancestors(v).tolist()
        expected = []
        for k, a in enumerate(path):
            line = set(path[:k + 1])
            line_img = {g[u] for u in line}
            off_line = [u for u in range(tree.n) if u not in line]
            desc = [u for u in range(tree.n) if u != a and tree.is_ancestor(a, u)]
            non_desc = [u for u in range(tree.n) if not tree.is_ancestor(a, u)]
            ok = all(g[u] not in line_img for u in off_line)
            ok &= not ({g[u] for u in desc} & {g[u] for u in non_desc})
            expected.append(ok)
        assert loopless_flags(spatial, trace, v).tolist() == expected


# ---------------------------------------------------------------------------
# bubble graph

def test_single_mark_on_path():
    graph = path_graph(4)
    gk = build_GK(graph, CutStructure(graph), [4])
    assert gk.vertices.tolist() == [0, 1, 2, 3, 4]
    assert gk.edges() == [(0, 1), (1, 2), (2, 3), (3, 4)]
    assert gk.thin and gk.root_star == 0


def hexagon_with_pendants(arms):
    """6-cycle 0..5 with a pendant vertex hanging from each listed cycle vertex."""
    edges = [(i, (i + 1) % 6) for i in range(6)]
    edges += [(a, 6 + k) for k, a in enumerate(arms)]
    return graph_from_edges(edges)


def test_three_branches_form_a_triangle():
    graph = hexagon_with_pendants([0, 2, 4])
    gk = build_GK(graph, CutStructure(graph), [6, 7, 8])
    assert gk.thin and gk.max_clique == 3
    assert {(0, 2), (0, 4), (2, 4)} <= set(gk.edges())


def test_four_branches_are_not_thin():
    graph = hexagon_with_pendants([0, 1, 2, 4])
    gk = build_GK(graph, CutStructure(graph), [6, 7, 8, 9])
    assert gk.max_clique == 4
    assert not gk.thin
    with pytest.raises(ValueError):
        skeletonize(graph, CutStructure(graph), gk)


def test_symmetric_star_has_unit_arms():
    graph = hexagon_with_pendants([0, 2, 4])
    cuts = CutStructure(graph)
    sk = skeletonize(graph, cuts, build_GK(graph, cuts, [6, 7, 8]))
    centre = int(np.flatnonzero(sk.graph_vertex == -1)[0])
    arms = sk.length[sk.parent == centre].tolist() + [sk.length[centre]]
    assert sorted(arms) == [1.0, 1.0, 1.0]
    # each arm carries a third of the loop resistance between two terminals, doubled
    r = effective_resistance(graph, 0, 2)
    assert r == pytest.approx(4 / 3)
    assert sk.path_sums(sk.node_of(0), sk.node_of(2))[1] == pytest.approx(r, abs=1e-12)


def test_star_lengths_from_pairwise_distances():
    # 12-cycle, terminals at 0, 3, 7: pairwise distances 3, 4, 5
    edges = [(i, (i + 1) % 12) for i in range(12)] + [(3, 12), (7, 13)]
    graph = graph_from_edges(edges)
    cuts = CutStructure(graph)
    sk = skeletonize(graph, cuts, build_GK(graph, cuts, [12, 13, 0]))
    centre = int(np.flatnonzero(sk.graph_vertex == -1)[0])
    arm = {}
    for i in range(sk.n_nodes):
        if sk.parent[i] == centre:
            arm[int(sk.graph_vertex[i])] = sk.length[i]
    if sk.graph_vertex[centre] == -1 and sk.parent[centre] >= 0:
        arm[int(sk.graph_vertex[sk.parent[centre]])] = sk.length[centre]
    assert arm == {0: 2.0, 3: 1.0, 7: 3.0}
    assert sorted(arm.values()) == [1.0, 2.0, 3.0]
    for a, b in ((0, 3), (3, 7), (0, 7)):
        assert sk.path_sums(sk.node_of(a), sk.node_of(b))[0] == graph.distances_from(a)[b]


def test_cut_bond_ends_are_split_from_the_bubble():
    # root-path 0-1, bubble square 2..5 entered through 1-2, exits at 3 and 4
    edges = [(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (5, 2), (3, 6), (4, 7)]
    graph = graph_from_edges(edges)
    cuts = CutStructure(graph)
    gk = build_GK(graph, cuts, [6, 7, 2])
    assert gk.thin
    assert (1, 2) in gk.edges()
    assert (2, 3) in gk.edges() and (2, 4) in gk.edges() and (3, 4) in gk.edges()
    assert (1, 3) not in gk.edges()


# ---------------------------------------------------------------------------
# skeleton fidelity on random traces

def test_skeleton_is_a_tree(skeletons):
    assert len(skeletons) >= 20
    for _, _, gk, _, sk in skeletons:
        assert sk.parent[0] == -1
        assert np.all(sk.parent[1:] < np.arange(1, sk.n_nodes))
        assert sk.graph_vertex[0] == gk.root_star
        kept = sk.graph_vertex[sk.graph_vertex >= 0]
        assert sorted(kept.tolist()) == gk.vertices.tolist()
        assert np.all(sk.length[1:] >= 0)
        assert np.all(sk.resistance[1:] > 0)


def test_root_distances_are_graph_distances(skeletons):
    for trace, _, gk, _, sk in skeletons:
        dist = trace.distances_from(gk.root_star)
        rd = sk.root_distance()
        kept = np.flatnonzero(sk.graph_vertex >= 0)
        assert np.array_equal(rd[kept], dist[sk.graph_vertex[kept]].astype(float))


def test_resistances_match_the_graph(skeletons):
    rng = np.random.default_rng(5)
    for trace, _, _, engine, sk in skeletons:
        kept = np.flatnonzero(sk.graph_vertex >= 0)
        for _ in range(10):
            a, b = rng.choice(kept, 2)
            if a == b:
                continue
            _, r = sk.path_sums(a, b)
            assert r == pytest.approx(effective_resistance(trace, int(sk.graph_vertex[a]), int(sk.graph_vertex[b])),
                                      abs=1e-9)


def test_star_arms_are_consistent(skeletons):
    for trace, _, _, _, sk in skeletons:
        for centre in np.flatnonzero(sk.graph_vertex == -1):
            ends = [i for i in range(sk.n_nodes) if sk.parent[i] == centre] + [int(sk.parent[centre])]
            for i, a in enumerate(ends):
                for b in ends[i + 1:]:
                    length, _ = sk.path_sums(a, b)
                    va, vb = int(sk.graph_vertex[a]), int(sk.graph_vertex[b])
                    assert length == trace.distances_from(va)[vb]


def test_mass_audit(skeletons):
    for trace, _, gk, _, sk in skeletons:
        n = sk.volume_scale
        keep = np.zeros(trace.n, bool)
        keep[gk.vertices] = True
        dist = trace.distances_from(gk.root_star)
        counted = 0
        for a, b in trace.edges.tolist():
            if dist[a] != dist[b]:
                far = a if dist[a] > dist[b] else b
            else:
                far = a if tuple(trace.coords[a]) > tuple(trace.coords[b]) else b
            counted += not keep[far]
        assert sk.mass.sum() * n == pytest.approx(counted)
        assert np.all(sk.mass[sk.graph_vertex == -1] == 0)


def test_sausages_partition_the_graph(skeletons):
    for trace, cuts, gk, _, sk in skeletons:
        assert np.all(sk.sausage_of >= 0)
        kept = sk.graph_vertex >= 0
        assert np.array_equal(sk.sausage_of[sk.graph_vertex[kept]], np.flatnonzero(kept))


def test_lattice_diameter_below_intrinsic(skeletons):
    for *_, sk in skeletons:
        stats = sausage_stats(sk)
        assert np.all(stats.lattice_diameters <= stats.intrinsic_diameters)
        assert stats.diameter_lattice <= stats.diameter_intrinsic
        assert stats.sizes.sum() == sk.graph.n


def test_sausage_diameters_on_a_path():
    graph = path_graph(4)
    cuts = CutStructure(graph)
    full = sausage_stats(skeletonize(graph, cuts, build_GK(graph, cuts, [4])))
    assert full.diameter_intrinsic == 0
    half = sausage_stats(skeletonize(graph, cuts, build_GK(graph, cuts, [2])))
    assert half.diameter_intrinsic == 2


def test_reduced_tree_size(skeletons):
    for _, _, gk, _, sk in skeletons:
        rt = reduced_tree(sk)
        marks = len(set(gk.marked.tolist()))
        assert rt.n <= 2 * marks + 1
        labels = sorted(k for lab in rt.labels for k in lab)
        assert labels == list(range(len(gk.marked)))
        spanned = [i for i in range(1, sk.n_nodes) if any(_on_root_path(sk, i, int(v)) for v in gk.marked)]
        assert rt.total_length == pytest.approx(sk.length[spanned].sum())


def _on_root_path(sk, node, v):
    j = sk.node_of(v)
    while j > 0:
        if j == node:
            return True
        j = sk.parent[j]
    return False


def test_volume_discrepancy_on_a_segment():
    # length below a node excludes its own edge, mass below it includes its own
    length, parent = np.array([0.0, 1.0]), np.array([-1, 0])
    assert volume_discrepancy(length, parent, np.array([0.5, 0.0]), 0.5) == 0.0
    assert volume_discrepancy(length, parent, np.array([0.0, 0.5]), 0.5) == 0.5
    assert volume_discrepancy(length, parent, np.array([0.25, 0.25]), 0.5) == 0.25


def test_intrinsic_sausage_diameter_shrinks_with_more_marks():
    rng = np.random.default_rng(3)
    n, medians = 10_000, {}
    traces = []
    for _ in range(30):
        _, trace = random_trace(rng, n, 15)
        traces.append((trace, CutStructure(trace)))
    for K in (5, 40):
        values = []
        for trace, cuts in traces:
            marks = cuts.project(trace.tree_to_graph[rng.integers(n, size=K)])
            gk = build_GK(trace, cuts, marks)
            if gk.thin:
                sk = skeletonize(trace, cuts, gk, with_resistance=False)
                values.append(sausage_stats(sk).diameter_intrinsic / np.sqrt(n))
        medians[K] = np.median(values)
    assert medians[40] < medians[5]
