"""Cut-bonds, cut-points, bubbles and cut-point projections of a graph."""
from __future__ import annotations

from functools import cached_property

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from . import _kernels
from .errors import Disconnected, NoCutPoints
from .graph import Graph


class CutStructure:
    """Bridges of a connected graph and the tree of bubbles they link.

    A cut-bond (bridge) is an edge whose removal disconnects the graph; its
    cut-point is the endpoint on the side of ``root``.  Bubbles are the
    connected components left after deleting all cut-bonds; they form a tree
    (the bubble tree) rooted at the bubble containing ``root``.

    Per bubble ``c``: ``bubble_parent[c]`` is the parent bubble,
    ``bubble_cut[c]`` the cut-point of the bond leading into ``c`` and
    ``bubble_entry[c]`` its endpoint inside ``c`` (all -1 for the root bubble).
    """

    def __init__(self, graph: Graph, root: int = 0):
        self.graph = graph
        self.root = int(root)
        is_bridge, parent, parent_edge, order, reached = _kernels.bridge_search(
            graph.indptr, graph.indices, graph.edge_of, graph.n_edges, self.root)
        if reached != graph.n:
            raise Disconnected(f"graph has {graph.n - reached} vertices unreachable from the root")
        self.is_bridge = is_bridge
        self.dfs_parent = parent
        self.dfs_order = order
        bridges = np.flatnonzero(is_bridge)
        # child side of a bridge is the endpoint whose search-tree parent edge it is
        ends = graph.edges[bridges]
        child_is_second = parent_edge[ends[:, 1]] == bridges
        self.bridge_edges = bridges
        self.bridge_child = np.where(child_is_second, ends[:, 1], ends[:, 0])
        self.bridge_cut = np.where(child_is_second, ends[:, 0], ends[:, 1])

        keep = ~is_bridge
        a, b = graph.edges[keep, 0], graph.edges[keep, 1]
        adj = coo_matrix((np.ones(len(a)), (a, b)), shape=(graph.n, graph.n))
        n_bubbles, label = connected_components(adj, directed=False)
        # renumber bubbles in discovery order of the search so that parents
        # precede children and the root bubble is 0
        first = np.full(n_bubbles, graph.n, np.int64)
        rank_of_vertex = np.empty(graph.n, np.int64)
        rank_of_vertex[order] = np.arange(graph.n)
        np.minimum.at(first, label, rank_of_vertex)
        relabel = np.empty(n_bubbles, np.int64)
        relabel[np.argsort(first, kind="stable")] = np.arange(n_bubbles)
        self.bubble_id = relabel[label]
        self.n_bubbles = n_bubbles

        self.bubble_parent = np.full(n_bubbles, -1, np.int64)
        self.bubble_cut = np.full(n_bubbles, -1, np.int64)
        self.bubble_entry = np.full(n_bubbles, -1, np.int64)
        self.bubble_bridge = np.full(n_bubbles, -1, np.int64)
        child_bubble = self.bubble_id[self.bridge_child]
        self.bubble_parent[child_bubble] = self.bubble_id[self.bridge_cut]
        self.bubble_cut[child_bubble] = self.bridge_cut
        self.bubble_entry[child_bubble] = self.bridge_child
        self.bubble_bridge[child_bubble] = bridges
        depth = np.zeros(n_bubbles, np.int64)
        for c in range(1, n_bubbles):
            depth[c] = depth[self.bubble_parent[c]] + 1
        self.bubble_depth = depth

        self.is_cut_point = np.zeros(graph.n, bool)
        self.is_cut_point[self.bridge_cut] = True

    @property
    def cut_bonds(self) -> np.ndarray:
        """Cut-bonds as (cut-point, far endpoint) rows."""
        return np.stack((self.bridge_cut, self.bridge_child), axis=1)

    @property
    def cut_points(self) -> np.ndarray:
        return np.flatnonzero(self.is_cut_point)

    @cached_property
    def bubble_members(self):
        """(ptr, vertices): vertices of bubble c are vertices[ptr[c]:ptr[c+1]]."""
        order = np.argsort(self.bubble_id, kind="stable")
        ptr = np.zeros(self.n_bubbles + 1, np.int64)
        np.cumsum(np.bincount(self.bubble_id, minlength=self.n_bubbles), out=ptr[1:])
        return ptr, order

    def members(self, c: int) -> np.ndarray:
        ptr, vertices = self.bubble_members
        return vertices[ptr[c]:ptr[c + 1]]

    @cached_property
    def bubble_size(self) -> np.ndarray:
        return np.bincount(self.bubble_id, minlength=self.n_bubbles)

    @cached_property
    def child_bridges(self):
        """(ptr, bridge indices) grouping bridges by their cut-point."""
        order = np.argsort(self.bridge_cut, kind="stable")
        ptr = np.zeros(self.graph.n + 1, np.int64)
        np.cumsum(np.bincount(self.bridge_cut, minlength=self.graph.n), out=ptr[1:])
        return ptr, order

    def bubble_path(self, ca: int, cb: int):
        """Bubbles on the bubble-tree path from ``ca`` to ``cb``, inclusive."""
        up, down = [ca], [cb]
        depth, parent = self.bubble_depth, self.bubble_parent
        while depth[up[-1]] > depth[down[-1]]:
            up.append(int(parent[up[-1]]))
        while depth[down[-1]] > depth[up[-1]]:
            down.append(int(parent[down[-1]]))
        while up[-1] != down[-1]:
            up.append(int(parent[up[-1]]))
            down.append(int(parent[down[-1]]))
        return up + down[-2::-1]

    def separating_cut_points(self, x: int):
        """Cut-points of the bonds crossed on any path from the root to ``x``,
        listed from ``x`` towards the root."""
        out = []
        c = int(self.bubble_id[x])
        while c > 0:
            out.append(int(self.bubble_cut[c]))
            c = int(self.bubble_parent[c])
        return out

    @cached_property
    def root_fallback(self) -> int:
        """Cut-point nearest to the root in graph distance, ties broken by
        lexicographic order of coordinates (vertex id for plain graphs)."""
        cps = self.cut_points
        if len(cps) == 0:
            raise NoCutPoints("graph has no cut-points")
        dist = self.graph.distances_from(self.root)[cps]
        near = cps[dist == dist.min()]
        coords = getattr(self.graph, "coords", None)
        if coords is None or len(near) == 1:
            return int(near.min())
        keys = coords[near]
        best = np.lexsort(keys.T[::-1])[0]
        return int(near[best])

    def project(self, x) -> np.ndarray | int:
        """First cut-point separating ``x`` from the root (vectorised)."""
        scalar = np.ndim(x) == 0
        x = np.atleast_1d(np.asarray(x, dtype=np.int64))
        if len(self.bridge_edges) == 0:
            raise NoCutPoints("graph has no cut-points")
        c = self.bubble_id[x]
        out = np.where(self.is_cut_point[x], x, self.bubble_cut[c])
        fallback = (~self.is_cut_point[x]) & (c == 0)
        if fallback.any():
            out[fallback] = self.root_fallback
        return int(out[0]) if scalar else out


def find_cut_bonds(graph: Graph, root: int = 0) -> CutStructure:
    return CutStructure(graph, root)


def project_pi_n(graph: Graph, cuts: CutStructure, x):
    """Cut-point projection of vertex ``x`` (see :meth:`CutStructure.project`)."""
    return cuts.project(x)


# ---------------------------------------------------------------------------
# loopless ancestors

def loopless_flags(spatial, trace, v: int) -> np.ndarray:
    """Loopless flags of the ancestors of tree vertex ``v``, root first.

    An ancestor ``a`` is loopless when no vertex off its ancestral line maps
    onto the image of that line, and the images of its strict descendants
    avoid the images of all its non-descendants.  The second part makes the
    image of ``a`` separate its descendants' images from the origin.
    """
    tree = spatial.tree
    n = tree.n
    path = tree.ancestors(v)
    depth_v = len(path) - 1
    g = trace.tree_to_graph
    size = tree.subtree_size

    # number of path vertices whose closed subtree contains each tree vertex
    diff = np.zeros(n + 1, np.int64)
    np.add.at(diff, path, 1)
    np.add.at(diff, path + size[path], -1)
    contain = np.cumsum(diff[:n])
    join = contain - 1  # depth of the deepest path vertex above (or equal to) i
    on_path = np.zeros(n, bool)
    on_path[path] = True
    m = trace.n
    horizon = depth_v + 2
    fail = np.zeros(horizon + 1, np.int64)

    # (i) the ancestral line at depth t is hit by an off-line vertex
    count = np.bincount(g, minlength=m)
    pts = g[path]
    first_depth = np.full(m, horizon, np.int64)
    last_depth = np.full(m, -1, np.int64)
    np.minimum.at(first_depth, pts, np.arange(depth_v + 1))
    np.maximum.at(last_depth, pts, np.arange(depth_v + 1))
    on_line = np.bincount(pts, minlength=m)
    hit = np.unique(pts)
    always = count[hit] > on_line[hit]
    start = first_depth[hit]
    stop = np.where(always, horizon, last_depth[hit])
    np.add.at(fail, start, 1)
    np.add.at(fail, stop, -1)

    # (ii) a strict descendant of the depth-t ancestor shares a point with a
    # non-descendant
    inside_to = join - on_path  # i is a strict descendant for t <= inside_to
    outside_from = join + 1  # i is outside the closed subtree for t >= outside_from
    lo = np.full(m, horizon, np.int64)
    hi = np.full(m, -1, np.int64)
    np.minimum.at(lo, g, outside_from)
    np.maximum.at(hi, g, inside_to)
    bad = lo <= hi
    np.add.at(fail, lo[bad], 1)
    np.add.at(fail, np.minimum(hi[bad] + 1, horizon), -1)
    return np.cumsum(fail)[:depth_v + 1] == 0


def loopless_ancestor(spatial, trace, v: int) -> int:
    """Deepest ancestor of ``v`` (possibly ``v``) that is loopless; the root if none."""
    flags = loopless_flags(spatial, trace, v)
    path = spatial.tree.ancestors(v)
    good = np.flatnonzero(flags[1:]) + 1
    return int(path[good[-1]]) if len(good) else 0
