"""Skeleton trees spanned by marked cut-points of a trace graph.

The skeleton keeps the cut-points lying on the paths from the origin to the
marked points.  Cut-points sharing a bubble are adjacent; when the graph is
thin such groups are pairs (kept as edges) or triples (replaced by a star
through a new centre).  Every edge carries a length, a resistance and an
embedding, and every kept cut-point carries the edge volume of the graph
hanging from it (its sausage).
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .cuts import CutStructure
from .graph import Graph
from .resistance import ResistanceEngine, star_from_conductances, terminal_conductances
from .spatial_tree import GraphSpatialTree


@dataclass
class BubbleGraph:
    """Cut-points on the root paths of the marked points and the groups of
    them that are mutually adjacent.

    Kept vertices sharing a bubble are mutually adjacent.  ``cliques`` maps
    a bubble id to its sorted group of kept vertices (groups of two or
    more); the key ``-c`` holds the two ends of bubble ``c``'s cut-bond when
    both are kept, since the far end then separates the near end from the
    rest of the bubble.
    """

    vertices: np.ndarray
    marked: np.ndarray
    root_star: int
    cliques: dict
    bubble_path: set

    @property
    def max_clique(self) -> int:
        return max((len(v) for v in self.cliques.values()), default=1)

    @property
    def thin(self) -> bool:
        return self.max_clique <= 3

    def edges(self):
        """Adjacency pairs of the bubble graph."""
        out = set()
        for group in self.cliques.values():
            for i, a in enumerate(group):
                for b in group[i + 1:]:
                    out.add((min(a, b), max(a, b)))
        return sorted(out)


def build_GK(graph: Graph, cuts: CutStructure, marked) -> BubbleGraph:
    """Kept vertices: the marked points and every cut-point separating one
    of them from the root.  The first marked point fixes ``root_star``, the
    cut-point where its path leaves the root bubble."""
    marked = np.asarray(marked, dtype=np.int64).ravel()
    if len(marked) == 0:
        raise ValueError("need at least one marked point")
    kept = set(int(x) for x in marked)
    on_path = {0}
    for x in marked:
        c = int(cuts.bubble_id[x])
        while c not in on_path:
            on_path.add(c)
            kept.add(int(cuts.bubble_cut[c]))
            c = int(cuts.bubble_parent[c])
    x0 = int(marked[0])
    c = int(cuts.bubble_id[x0])
    root_star = x0
    while c != 0:
        root_star = int(cuts.bubble_cut[c])
        c = int(cuts.bubble_parent[c])

    groups = {}
    for v in kept:
        groups.setdefault(int(cuts.bubble_id[v]), set()).add(v)
    bonds = {}
    for c in on_path:
        if c == 0:
            continue
        cut, entry = int(cuts.bubble_cut[c]), int(cuts.bubble_entry[c])
        if entry in kept:
            # the far end of the cut-bond separates its near end from the bubble
            bonds[-c] = (min(cut, entry), max(cut, entry))
        else:
            groups.setdefault(c, set()).add(cut)
    cliques = {c: tuple(sorted(g)) for c, g in groups.items() if len(g) >= 2}
    cliques.update(bonds)
    return BubbleGraph(np.array(sorted(kept), dtype=np.int64), marked, root_star, cliques, on_path)


# ---------------------------------------------------------------------------

@dataclass
class SkeletonTree:
    """Skeleton with star centres.

    Node ``i`` is graph vertex ``graph_vertex[i]`` or, when that entry is -1,
    a star centre.  Node 0 is ``root_star``; ``parent`` is in breadth-first
    order.  ``mass`` is the normalised sausage edge count of kept vertices.
    """

    graph_vertex: np.ndarray
    parent: np.ndarray
    length: np.ndarray
    resistance: np.ndarray
    position: np.ndarray
    mass: np.ndarray
    root_star: int
    marked: np.ndarray
    degenerate: int
    sausage_of: np.ndarray  # per graph vertex: node index of its sausage owner
    bubble_id: np.ndarray = field(repr=False)
    graph: Graph = field(repr=False)
    volume_scale: float = 1.0

    @property
    def n_nodes(self) -> int:
        return len(self.parent)

    def node_of(self, v: int) -> int:
        return int(self._node_index[v])

    @property
    def _node_index(self):
        idx = getattr(self, "_idx_cache", None)
        if idx is None:
            idx = {int(v): i for i, v in enumerate(self.graph_vertex) if v >= 0}
            self._idx_cache = idx
        return idx

    def root_distance(self) -> np.ndarray:
        dist = np.zeros(self.n_nodes)
        for i in range(1, self.n_nodes):
            dist[i] = dist[self.parent[i]] + self.length[i]
        return dist

    def path_sums(self, a: int, b: int):
        """(length, resistance) along the tree path between nodes a and b."""
        depth = self.node_depth
        length = resistance = 0.0
        while a != b:
            if depth[a] >= depth[b]:
                length += self.length[a]
                resistance += self.resistance[a]
                a = self.parent[a]
            else:
                length += self.length[b]
                resistance += self.resistance[b]
                b = self.parent[b]
        return length, resistance

    @property
    def node_depth(self):
        depth = getattr(self, "_depth_cache", None)
        if depth is None:
            depth = np.zeros(self.n_nodes, np.int64)
            for i in range(1, self.n_nodes):
                depth[i] = depth[self.parent[i]] + 1
            self._depth_cache = depth
        return depth

    def subtree_totals(self):
        """Per node: (edge length below the node, mass at or below the node)."""
        return subtree_totals(self.length, self.parent, self.mass)

    def export_tables(self):
        """Node and edge tables as lists of dicts."""
        nodes = [
            {"node": i, "graph_vertex": int(self.graph_vertex[i]), "mass": float(self.mass[i]),
             **{f"x{k}": float(c) for k, c in enumerate(self.position[i])}}
            for i in range(self.n_nodes)
        ]
        edges = [
            {"parent": int(self.parent[i]), "child": i, "length": float(self.length[i]),
             "resistance": float(self.resistance[i])}
            for i in range(1, self.n_nodes)
        ]
        return nodes, edges


def _region_of(cuts: CutStructure, c: int) -> np.ndarray:
    members = cuts.members(c)
    if c == 0:
        return members
    return np.concatenate((members, [cuts.bubble_cut[c]]))


def _local_distances(graph: Graph, region: np.ndarray, sources):
    allowed = np.zeros(graph.n, bool)
    allowed[region] = True
    return [_kernels.bfs_distances_masked(graph.indptr, graph.indices, int(s), allowed) for s in sources]


def skeletonize(graph: Graph, cuts: CutStructure, gk: BubbleGraph, engine: ResistanceEngine | None = None,
                volume_scale: float | None = None, with_resistance: bool = True) -> SkeletonTree:
    """Build the skeleton tree of a thin bubble graph.

    Pairs sharing a bubble become edges with graph-distance length and
    effective resistance.  Triples become stars whose arm lengths are the
    half-sums of the pairwise distances and whose arm resistances come from
    the equivalent triangle of the bubble network.  Arms of length zero are
    kept (their resistance can be positive) and counted in ``degenerate``.
    With ``with_resistance`` off, resistances are left as NaN.
    """
    if not gk.thin:
        raise ValueError("bubble graph is not thin")
    if engine is None:
        engine = ResistanceEngine(graph, cuts)
    if volume_scale is None:
        volume_scale = float(graph.n)
    coords = getattr(graph, "coords", None)

    node_vertex = list(int(v) for v in gk.vertices)
    index = {v: i for i, v in enumerate(node_vertex)}
    pos = [np.asarray(coords[v], dtype=float) if coords is not None else np.zeros(1) for v in node_vertex]
    adjacency = [[] for _ in node_vertex]
    degenerate = 0

    def link(i, j, length, resistance):
        adjacency[i].append((j, length, resistance))
        adjacency[j].append((i, length, resistance))

    for c in sorted(gk.cliques):
        group = gk.cliques[c]
        if len(group) == 2:
            x, y = group
            if c < 0:
                length, resistance = 1.0, 1.0  # a lone cut-bond
            else:
                region = _region_of(cuts, c)
                length = float(_local_distances(graph, region, [x])[0][y])
                resistance = engine.resistance(x, y) if with_resistance else np.nan
            link(index[x], index[y], length, resistance)
            continue
        x, y, z = group
        region = _region_of(cuts, c)
        dx, dy = _local_distances(graph, region, [x, y])
        dxy, dxz, dyz = float(dx[y]), float(dx[z]), float(dy[z])
        arms = ((dxy + dxz - dyz) / 2, (dxy + dyz - dxz) / 2, (dxz + dyz - dxy) / 2)
        degenerate += sum(a <= 0 for a in arms)
        if with_resistance:
            cond = -terminal_conductances(graph, (x, y, z), region=region)
            r_arms = star_from_conductances(cond[0, 1], cond[1, 2], cond[2, 0])
        else:
            r_arms = (np.nan,) * 3
        centre = len(node_vertex)
        node_vertex.append(-1)
        pos.append((pos[index[x]] + pos[index[y]] + pos[index[z]]) / 3.0)
        adjacency.append([])
        for v, arm, r in zip((x, y, z), arms, r_arms):
            link(index[v], centre, max(arm, 0.0), r)

    # orient from root_star, breadth first, neighbours in insertion order
    start = index[gk.root_star]
    order, parent_of, length_of, res_of = [start], {start: -1}, {start: 0.0}, {start: 0.0}
    queue = deque([start])
    while queue:
        i = queue.popleft()
        for j, length, resistance in adjacency[i]:
            if j not in parent_of:
                parent_of[j] = i
                length_of[j] = length
                res_of[j] = resistance
                order.append(j)
                queue.append(j)
    if len(order) != len(node_vertex):
        raise AssertionError("skeleton is not connected")
    rank = {old: new for new, old in enumerate(order)}
    parent = np.array([-1] + [rank[parent_of[i]] for i in order[1:]], dtype=np.int64)
    graph_vertex = np.array([node_vertex[i] for i in order], dtype=np.int64)

    # sausages: each graph vertex belongs to the deepest kept vertex separating it
    keep = np.zeros(graph.n, bool)
    keep[gk.vertices] = True
    bubble_label = _kernels.propagate_bubble_labels(cuts.bubble_parent, cuts.bubble_cut, keep, gk.root_star)
    owner = np.where(keep, np.arange(graph.n), bubble_label[cuts.bubble_id])
    node_index = np.full(graph.n, -1, np.int64)
    kept_nodes = graph_vertex >= 0
    node_index[graph_vertex[kept_nodes]] = np.flatnonzero(kept_nodes)
    sausage_of = node_index[owner]

    # each edge counted once, from the endpoint farther from root_star
    dist = graph.distances_from(gk.root_star)
    a, b = graph.edges[:, 0], graph.edges[:, 1]
    if coords is not None:
        lex_a_larger = _lex_greater(coords[a], coords[b])
    else:
        lex_a_larger = a > b
    pick_a = (dist[a] > dist[b]) | ((dist[a] == dist[b]) & lex_a_larger)
    y = np.where(pick_a, a, b)
    counted = ~keep[y]
    mass = np.bincount(sausage_of[y[counted]], minlength=len(order)).astype(float) / volume_scale

    return SkeletonTree(
        graph_vertex=graph_vertex,
        parent=parent,
        length=np.array([length_of[i] for i in order]),
        resistance=np.array([res_of[i] for i in order]),
        position=np.array([pos[i] for i in order]),
        mass=mass,
        root_star=gk.root_star,
        marked=gk.marked.copy(),
        degenerate=int(degenerate),
        sausage_of=sausage_of,
        bubble_id=cuts.bubble_id,
        graph=graph,
        volume_scale=volume_scale,
    )


def _lex_greater(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    diff = p.astype(np.int64) - q.astype(np.int64)
    nz = diff != 0
    first = np.argmax(nz, axis=1)
    val = diff[np.arange(len(diff)), first]
    return nz.any(axis=1) & (val > 0)


# ---------------------------------------------------------------------------

@dataclass
class SausageStats:
    diameter_lattice: int
    diameter_intrinsic: int
    sizes: np.ndarray
    lattice_diameters: np.ndarray
    intrinsic_diameters: np.ndarray


def sausage_stats(skeleton: SkeletonTree) -> SausageStats:
    """Largest lattice (l1) and intrinsic diameters over all sausages.

    Intrinsic distances are graph distances; shortest paths between points
    of one sausage may only pass through other skeleton vertices, never
    beyond them, so distances are computed on the sausage plus the kept
    vertices.
    """
    graph = skeleton.graph
    owner = skeleton.sausage_of
    n_nodes = skeleton.n_nodes
    order = np.argsort(owner, kind="stable")
    ptr = np.zeros(n_nodes + 1, np.int64)
    np.cumsum(np.bincount(owner, minlength=n_nodes), out=ptr[1:])
    kept = skeleton.graph_vertex[skeleton.graph_vertex >= 0]
    cuts_bubble = skeleton.bubble_id
    kept_by_bubble = {}
    for v in kept:
        kept_by_bubble.setdefault(int(cuts_bubble[v]), []).append(int(v))
    coords = getattr(graph, "coords", None)
    sizes = np.diff(ptr)
    lat = np.zeros(n_nodes, np.int64)
    intr = np.zeros(n_nodes, np.int64)
    allowed = np.zeros(graph.n, bool)
    for node in np.flatnonzero(sizes > 1):
        members = order[ptr[node]:ptr[node + 1]]
        if coords is not None:
            lat[node] = _kernels.l1_diameter(np.ascontiguousarray(coords[members], dtype=np.int64))
        extra = [v for c in np.unique(cuts_bubble[members]) for v in kept_by_bubble.get(int(c), ())]
        allowed[members] = True
        allowed[extra] = True
        intr[node] = _kernels.subset_diameter(graph.indptr, graph.indices, members, allowed)
        allowed[members] = False
        allowed[extra] = False
    if coords is None:
        lat = intr.copy()
    return SausageStats(int(lat.max(initial=0)), int(intr.max(initial=0)), sizes, lat, intr)


# ---------------------------------------------------------------------------

def reduced_tree(skeleton: SkeletonTree) -> GraphSpatialTree:
    """Subtree spanned by root_star and the marked points, keeping only the
    root, the marked points and branching points; zero-length edges are
    contracted.  Embedded edges follow the skeleton polyline."""
    n = skeleton.n_nodes
    parent = skeleton.parent
    labels = [[] for _ in range(n)]
    for k, v in enumerate(skeleton.marked):
        labels[skeleton.node_of(int(v))].append(k)
    child_count = np.bincount(parent[1:], minlength=n)
    keep = np.array([i == 0 or bool(labels[i]) or child_count[i] >= 2 for i in range(n)])

    new_index = {}
    new_parent, new_len, new_res, new_labels, new_pos, new_paths = [], [], [], [], [], []
    for i in range(n):
        if not keep[i]:
            continue
        # walk up to the nearest kept ancestor, collecting the polyline
        chain = [i]
        length = resistance = 0.0
        j = i
        while j != 0:
            length += skeleton.length[j]
            resistance += skeleton.resistance[j]
            j = int(parent[j])
            chain.append(j)
            if keep[j]:
                break
        if i != 0 and length == 0.0:
            # contract into the kept ancestor
            target = new_index[j]
            new_index[i] = target
            new_labels[target].extend(labels[i])
            continue
        new_index[i] = len(new_parent)
        new_parent.append(-1 if i == 0 else new_index[j])
        new_len.append(length)
        new_res.append(resistance)
        new_labels.append(list(labels[i]))
        new_pos.append(skeleton.position[i])
        if i == 0:
            new_paths.append(None)
        else:
            chain = chain[::-1]
            seg = np.array([0.0] + [skeleton.length[c] for c in chain[1:]])
            s = np.cumsum(seg) / length
            new_paths.append((s, skeleton.position[chain]))
    return GraphSpatialTree(
        parent=np.array(new_parent), length=np.array(new_len),
        labels=tuple(tuple(sorted(x)) for x in new_labels),
        positions=np.array(new_pos), paths=tuple(new_paths), resistance=np.array(new_res))


def subtree_totals(length, parent, mass):
    """Edge length strictly below and mass at or below every node of a tree
    listed parents-first."""
    below_len = np.asarray(length, float).copy()
    below_len[0] = 0.0
    below_mass = np.asarray(mass, float).copy()
    for i in range(len(parent) - 1, 0, -1):
        p = parent[i]
        below_len[p] += below_len[i]
        below_mass[p] += below_mass[i]
    # below_len[i] still includes the edge into i; remove it
    below_len[1:] -= length[1:]
    return below_len, below_mass


def volume_discrepancy(length, parent, mass, nu: float) -> float:
    """sup over nodes x of |nu * lambda(below x) - mu(below x)|, with lambda
    the normalised length measure."""
    below_len, below_mass = subtree_totals(length, parent, mass)
    total = float(np.sum(length[1:]))
    if total <= 0:
        return float(abs(nu - below_mass[0]))
    return float(np.max(np.abs(nu * below_len / total - below_mass)))


def condition_v_discrepancy(skeleton: SkeletonTree, nu: float) -> float:
    return volume_discrepancy(skeleton.length, skeleton.parent, skeleton.mass, nu)
