"""Finite metric trees with marked leaves and an embedding into R^d."""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np


@dataclass(frozen=True, eq=False)
class GraphSpatialTree:
    """Rooted tree with edge lengths, optional marks and an embedding.

    Vertex 0 is the root and ``parent[v] < v`` for every other vertex.
    ``length[v]`` is the length of the edge from ``parent[v]`` to ``v``.
    ``labels[v]`` holds the indices of the marked points sitting at ``v``.
    ``paths[v]``, when given, is a pair ``(s, points)`` describing the
    embedded edge into ``v`` as a polyline with parameters ``s`` running
    from 0 (parent end) to 1 (``v`` end) proportionally to length.
    """

    parent: np.ndarray
    length: np.ndarray
    labels: tuple = ()
    positions: np.ndarray | None = None
    paths: tuple | None = None
    resistance: np.ndarray | None = None

    def __post_init__(self):
        parent = np.asarray(self.parent, dtype=np.int64)
        object.__setattr__(self, "parent", parent)
        object.__setattr__(self, "length", np.asarray(self.length, dtype=float))
        if not self.labels:
            object.__setattr__(self, "labels", tuple(() for _ in parent))
        if parent[0] != -1 or np.any(parent[1:] >= np.arange(1, len(parent))) or np.any(parent[1:] < 0):
            raise ValueError("parents must precede children and vertex 0 must be the root")

    @property
    def n(self) -> int:
        return len(self.parent)

    @cached_property
    def children(self) -> list:
        kids = [[] for _ in range(self.n)]
        for v in range(1, self.n):
            kids[self.parent[v]].append(v)
        return kids

    @cached_property
    def root_distance(self) -> np.ndarray:
        dist = np.zeros(self.n)
        for v in range(1, self.n):
            dist[v] = dist[self.parent[v]] + self.length[v]
        return dist

    @property
    def total_length(self) -> float:
        return float(self.length[1:].sum())

    def degree(self, v: int) -> int:
        return len(self.children[v]) + (v > 0)

    def distance(self, u: int, v: int) -> float:
        """Tree distance between two vertices."""
        anc = set()
        a = u
        while a >= 0:
            anc.add(a)
            a = self.parent[a] if a > 0 else -1
        b = v
        while b not in anc:
            b = self.parent[b]
        rd = self.root_distance
        return float(rd[u] + rd[v] - 2 * rd[b])

    def vertex_of_label(self, label: int) -> int:
        for v, labs in enumerate(self.labels):
            if label in labs:
                return v
        raise KeyError(label)

    # -- canonical shape --------------------------------------------------
    @cached_property
    def _codes(self) -> list:
        codes = [""] * self.n
        for v in range(self.n - 1, -1, -1):
            lab = ",".join(str(x) for x in sorted(self.labels[v]))
            codes[v] = "(" + lab + "".join(sorted(codes[c] for c in self.children[v])) + ")"
        return codes

    @property
    def shape_code(self) -> str:
        """Balanced-parenthesis code of the labelled shape, children sorted."""
        return self._codes[0]

    def canonical_order(self) -> list:
        """Vertices in preorder with children visited in code order."""
        codes = self._codes
        out, stack = [], [0]
        while stack:
            v = stack.pop()
            out.append(v)
            kids = sorted(self.children[v], key=lambda c: (codes[c], c))
            stack.extend(reversed(kids))
        return out

    # -- embedding --------------------------------------------------------
    def edge_point(self, v: int, s) -> np.ndarray:
        """Embedded point at fraction ``s`` along the edge into ``v``."""
        s = np.atleast_1d(np.asarray(s, dtype=float))
        if self.paths is not None and self.paths[v] is not None:
            grid, pts = self.paths[v]
            return np.stack([np.interp(s, grid, pts[:, k]) for k in range(pts.shape[1])], axis=1)
        a = self.positions[self.parent[v]]
        b = self.positions[v]
        return a[None, :] + s[:, None] * (b - a)[None, :]


def shape_code(tree: GraphSpatialTree) -> str:
    return tree.shape_code


def spatial_tree_distance_D(t1: GraphSpatialTree, t2: GraphSpatialTree, grid: int = 65) -> float:
    """Distance between graph spatial trees, capped at 1.

    Trees of different labelled shape are at distance 1.  Otherwise the
    distance is the largest edge-length discrepancy plus the largest
    displacement between corresponding points, where points correspond
    when they sit at the same length fraction of corresponding edges.
    """
    if t1.shape_code != t2.shape_code:
        return 1.0
    o1, o2 = t1.canonical_order(), t2.canonical_order()
    d1 = max((abs(t1.length[a] - t2.length[b]) for a, b in zip(o1[1:], o2[1:])), default=0.0)
    d2 = 0.0
    if t1.positions is not None and t2.positions is not None:
        s = np.linspace(0.0, 1.0, grid)
        d2 = float(np.linalg.norm(t1.positions[0] - t2.positions[0]))
        for a, b in zip(o1[1:], o2[1:]):
            gap = np.linalg.norm(t1.edge_point(a, s) - t2.edge_point(b, s), axis=1).max()
            d2 = max(d2, float(gap))
    return float(min(d1 + d2, 1.0))
