"""Lattice embeddings of trees and the graphs they trace out."""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np

from . import _kernels
from .graph import Graph
from .trees import PlaneTree

_COORD_LIMIT = np.iinfo(np.int32).max


@dataclass(frozen=True, eq=False)
class SpatialTree:
    """A plane tree with a nearest-neighbour step on every edge.

    ``axis[v]`` and ``sign[v]`` describe the step from the parent of ``v`` to
    ``v`` (entries for the root are unused); ``positions`` accumulates them.
    """

    tree: PlaneTree
    d: int
    axis: np.ndarray
    sign: np.ndarray

    @cached_property
    def positions(self) -> np.ndarray:
        pos = _kernels.accumulate_positions(self.tree.parent, self.axis, self.sign, self.d)
        pos.setflags(write=False)
        return pos

    def step(self, v: int) -> np.ndarray:
        x = np.zeros(self.d, np.int64)
        if v > 0:
            x[self.axis[v]] = self.sign[v]
        return x


def embed_tree(tree: PlaneTree, d: int, rng: np.random.Generator) -> SpatialTree:
    """Attach i.i.d. uniform unit steps of Z^d to the edges of ``tree``."""
    if d < 1:
        raise ValueError("d must be >= 1")
    if tree.height >= _COORD_LIMIT:
        raise OverflowError("tree too deep for 32-bit coordinates")
    axis = rng.integers(d, size=tree.n)
    sign = 2 * rng.integers(2, size=tree.n) - 1
    axis[0] = 0
    sign[0] = 0
    return SpatialTree(tree, d, axis.astype(np.int64), sign.astype(np.int64))


def embed_with_steps(tree: PlaneTree, steps) -> SpatialTree:
    """Embedding with prescribed steps; ``steps[v-1]`` is a signed axis
    ``±(k+1)`` for the edge into vertex ``v``."""
    steps = np.asarray(steps, dtype=np.int64)
    if len(steps) != tree.n - 1 or np.any(steps == 0):
        raise ValueError("need one nonzero signed axis per edge")
    d = int(np.abs(steps).max()) if len(steps) else 1
    axis = np.concatenate(([0], np.abs(steps) - 1))
    sign = np.concatenate(([0], np.sign(steps)))
    return SpatialTree(tree, d, axis, sign)


def _row_keys(coords: np.ndarray) -> np.ndarray:
    """Injective integer keys for lattice points, packed into few words."""
    lo = coords.min(axis=0).astype(np.int64)
    span = coords.max(axis=0).astype(np.int64) - lo + 1
    bits = np.maximum(1, np.ceil(np.log2(span + 1)).astype(int))
    shifted = coords.astype(np.int64) - lo
    words, current, used = [], np.zeros(len(coords), np.int64), 0
    for k in range(coords.shape[1]):
        if used + bits[k] > 62:
            words.append(current)
            current, used = np.zeros(len(coords), np.int64), 0
        current = current | (shifted[:, k] << used)
        used += bits[k]
    words.append(current)
    if len(words) == 1:
        return words[0]
    return np.ascontiguousarray(np.stack(words, axis=1))


def _first_appearance_ids(keys: np.ndarray):
    """Group equal keys; ids numbered by first appearance.

    Returns (ids per row, row index of first appearance per id).
    """
    if keys.ndim == 1:
        _, first, inverse = np.unique(keys, return_index=True, return_inverse=True)
    else:
        # lexsort is stable, so each group starts at its earliest row
        perm = np.lexsort(keys.T[::-1])
        ordered = keys[perm]
        starts = np.concatenate(([True], np.any(ordered[1:] != ordered[:-1], axis=1)))
        group = np.cumsum(starts) - 1
        inverse = np.empty(len(keys), np.int64)
        inverse[perm] = group
        first = perm[starts]
    order = np.argsort(first, kind="stable")
    rank = np.empty(len(first), np.int64)
    rank[order] = np.arange(len(first))
    return rank[inverse], first[order]


class TraceGraph(Graph):
    """Graph of lattice points and lattice edges visited by a spatial tree.

    Vertices are numbered in order of first appearance along the
    lexicographic traversal, so the origin is vertex 0.  Edges are numbered
    by the first tree edge mapping onto them.
    """

    def __init__(self, coords, edges, tree_to_graph=None, vertex_first=None, edge_first=None):
        super().__init__(len(coords), edges)
        self.coords = np.asarray(coords)
        self.coords.setflags(write=False)
        self.d = self.coords.shape[1]
        self.tree_to_graph = tree_to_graph
        self.vertex_first = vertex_first
        self.edge_first = edge_first

    @cached_property
    def point_index(self) -> dict:
        return {tuple(int(c) for c in row): i for i, row in enumerate(self.coords)}

    def index_of(self, point) -> int:
        return self.point_index[tuple(int(c) for c in point)]

    @cached_property
    def origin(self) -> int:
        return self.index_of(np.zeros(self.d, np.int64))

    @cached_property
    def csr_coords(self) -> np.ndarray:
        return np.ascontiguousarray(self.coords, dtype=np.float64)


def trace_from_steps(points: np.ndarray, tail: np.ndarray, head: np.ndarray) -> TraceGraph:
    """Trace of an arbitrary family of lattice points (rows of ``points``)
    joined by nearest-neighbour edges ``tail[j] -- head[j]`` (row indices).

    Vertices are numbered by first row, edges by first pair.
    """
    g, vertex_first = _first_appearance_ids(_row_keys(points))
    m = len(vertex_first)
    if len(tail) == 0:
        return TraceGraph(points[vertex_first], np.zeros((0, 2), np.int64), g, vertex_first, np.zeros(0, np.int64))
    a, b = g[tail], g[head]
    lo, hi = np.minimum(a, b), np.maximum(a, b)
    _, edge_first = _first_appearance_ids(lo * m + hi)
    edges = np.stack((lo[edge_first], hi[edge_first]), axis=1)
    return TraceGraph(points[vertex_first], edges, g, vertex_first, edge_first)


def build_trace(spatial: SpatialTree) -> TraceGraph:
    """Collapse the embedded tree onto its image in Z^d."""
    tree = spatial.tree
    trace = trace_from_steps(spatial.positions, tree.parent[1:], np.arange(1, tree.n))
    # tree edge j enters tree vertex j + 1
    trace.edge_first = trace.edge_first + 1
    return trace


def cumulative_volumes(spatial: SpatialTree, trace: TraceGraph | None = None):
    """Distinct lattice vertices and edges among the first j tree vertices.

    Returns two arrays of length n + 1 indexed by j = 0..n.
    """
    if trace is None:
        trace = build_trace(spatial)
    n = spatial.tree.n
    vertex = np.zeros(n + 1, np.int64)
    np.cumsum(np.bincount(trace.vertex_first + 1, minlength=n + 1), out=vertex)
    edge = np.zeros(n + 1, np.int64)
    if trace.n_edges:
        # tree edge into vertex v is present once the first v + 1 vertices are
        np.cumsum(np.bincount(trace.edge_first + 1, minlength=n + 1), out=edge)
    return vertex, edge


# ---------------------------------------------------------------------------
# serialization

_TRACE_MAGIC = "# critbrw-trace v1"


def write_trace(trace: TraceGraph, path) -> None:
    """Text format: magic line, ``d <d>``, ``vertices <m>`` followed by one
    coordinate row per vertex, ``edges <E>`` followed by one pair per line."""
    path = Path(path)
    with path.open("w") as fh:
        fh.write(f"{_TRACE_MAGIC}\nd {trace.d}\nvertices {trace.n}\n")
        np.savetxt(fh, trace.coords, fmt="%d")
        fh.write(f"edges {trace.n_edges}\n")
        np.savetxt(fh, trace.edges, fmt="%d")


def read_trace(path) -> TraceGraph:
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0] != _TRACE_MAGIC:
        raise ValueError("not a trace file")
    d = int(lines[1].split()[1])
    m = int(lines[2].split()[1])
    coords = np.array([[int(x) for x in line.split()] for line in lines[3:3 + m]], dtype=np.int32).reshape(m, d)
    e = int(lines[3 + m].split()[1])
    edges = np.array([[int(x) for x in line.split()] for line in lines[4 + m:4 + m + e]], dtype=np.int64)
    return TraceGraph(coords, edges.reshape(e, 2))
