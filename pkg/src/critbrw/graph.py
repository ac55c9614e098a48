"""Simple undirected graphs stored as flat adjacency arrays."""
from __future__ import annotations

from functools import cached_property

import numpy as np

from . import _kernels


class Graph:
    """Simple undirected graph on vertices ``0..n-1``.

    ``edges`` is an (E, 2) integer array without duplicates or self-loops.
    Adjacency is kept in CSR form: the neighbours of ``v`` are
    ``indices[indptr[v]:indptr[v+1]]`` and ``edge_of`` gives the edge id of
    each adjacency entry.
    """

    def __init__(self, n_vertices: int, edges):
        edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        if len(edges) and (edges.min() < 0 or edges.max() >= n_vertices):
            raise ValueError("edge endpoint out of range")
        if np.any(edges[:, 0] == edges[:, 1]):
            raise ValueError("self-loops are not allowed")
        self.n = int(n_vertices)
        self.edges = edges
        self.edges.setflags(write=False)
        e = len(edges)
        src = np.concatenate((edges[:, 0], edges[:, 1]))
        dst = np.concatenate((edges[:, 1], edges[:, 0]))
        eid = np.concatenate((np.arange(e), np.arange(e)))
        order = np.argsort(src, kind="stable")
        self.indices = dst[order]
        self.edge_of = eid[order]
        self.indptr = np.zeros(self.n + 1, np.int64)
        np.cumsum(np.bincount(src, minlength=self.n), out=self.indptr[1:])

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @cached_property
    def degree(self) -> np.ndarray:
        return np.diff(self.indptr)

    def neighbors(self, v: int) -> np.ndarray:
        return self.indices[self.indptr[v]:self.indptr[v + 1]]

    def distances_from(self, source: int) -> np.ndarray:
        """Graph distances from ``source`` (-1 where unreachable)."""
        return _kernels.bfs_distances(self.indptr, self.indices, int(source))

    def is_connected(self) -> bool:
        return self.n == 0 or bool(np.all(self.distances_from(0) >= 0))

    def laplacian(self, vertices=None):
        """Sparse combinatorial Laplacian, optionally of an induced subgraph."""
        from scipy import sparse

        if vertices is None:
            m = self.n
            a, b = self.edges[:, 0], self.edges[:, 1]
        else:
            vertices = np.asarray(vertices)
            local = np.full(self.n, -1, np.int64)
            local[vertices] = np.arange(len(vertices))
            a, b = local[self.edges[:, 0]], local[self.edges[:, 1]]
            keep = (a >= 0) & (b >= 0)
            a, b = a[keep], b[keep]
            m = len(vertices)
        w = np.ones(len(a))
        adj = sparse.coo_matrix((np.concatenate((w, w)), (np.concatenate((a, b)), np.concatenate((b, a)))),
                                shape=(m, m)).tocsr()
        deg = np.asarray(adj.sum(axis=1)).ravel()
        return sparse.diags(deg) - adj

    def with_edge(self, u: int, v: int) -> "Graph":
        return Graph(self.n, np.vstack((self.edges, [[u, v]])))

    def __repr__(self):
        return f"{type(self).__name__}(n={self.n}, edges={self.n_edges})"
