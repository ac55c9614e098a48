"""Effective resistances on graphs with unit resistors on every edge."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.sparse import linalg as splinalg

from .cuts import CutStructure
from .errors import Disconnected, NonPositiveInput, NotInSameComponent, SolverDivergence, TooLarge
from .graph import Graph

DIRECT_LIMIT = 500
ORACLE_LIMIT = 2000


@dataclass
class SolverStats:
    direct: int = 0
    iterative: int = 0
    iterations: int = 0
    trivial: int = field(default=0)


def _dirichlet_resistance(lap, s: int, t: int, tol: float, stats: SolverStats | None = None) -> float:
    """Resistance between local vertices s and t of a connected network."""
    m = lap.shape[0]
    if s == t:
        return 0.0
    keep = np.ones(m, bool)
    keep[t] = False
    reduced = lap[keep][:, keep]
    rhs = np.zeros(m - 1)
    s_local = s - (s > t)
    rhs[s_local] = 1.0
    if m <= DIRECT_LIMIT:
        if stats:
            stats.direct += 1
        dense = reduced.toarray() if sparse.issparse(reduced) else reduced
        return float(np.linalg.solve(dense, rhs)[s_local])
    reduced = sparse.csr_matrix(reduced)
    diag = reduced.diagonal()
    precond = splinalg.LinearOperator(reduced.shape, matvec=lambda v: v / diag)
    iterations = 0

    def count(_):
        nonlocal iterations
        iterations += 1

    # the potential at s is at most the graph distance, so a relative
    # residual well below tol keeps the absolute error under tol
    x, info = splinalg.cg(reduced, rhs, rtol=min(1e-12, tol * 1e-3), atol=0.0,
                          maxiter=20 * m, M=precond, callback=count)
    if stats:
        stats.iterative += 1
        stats.iterations += iterations
    if info != 0:
        raise SolverDivergence(f"conjugate gradient stopped after {iterations} iterations (info={info})")
    return float(x[s_local])


class ResistanceEngine:
    """Series decomposition over cut-bonds plus solves inside bubbles.

    Along the bubble-tree path between the terminals, every cut-bond adds
    one unit and every bubble adds the resistance between the vertex where
    the path enters it and the vertex where it leaves.
    """

    def __init__(self, graph: Graph, cuts: CutStructure | None = None, tol: float = 1e-9):
        self.graph = graph
        self.cuts = cuts if cuts is not None else CutStructure(graph)
        self.tol = tol
        self.stats = SolverStats()
        self._cache = {}

    def bubble_resistance(self, c: int, s: int, t: int) -> float:
        if s == t:
            return 0.0
        key = (c, min(s, t), max(s, t))
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        members = self.cuts.members(c)
        if len(members) == 2:
            # two vertices joined by a single non-bridge edge cannot occur
            raise AssertionError("two-vertex bubble")
        local = {int(v): i for i, v in enumerate(members)}
        lap = self.graph.laplacian(members)
        r = _dirichlet_resistance(lap.tocsr(), local[s], local[t], self.tol, self.stats)
        self._cache[key] = r
        return r

    def hops(self, a: int, b: int):
        """Decompose the a-b path into (bubble, enter, leave) segments."""
        cuts = self.cuts
        ca, cb = int(cuts.bubble_id[a]), int(cuts.bubble_id[b])
        path = cuts.bubble_path(ca, cb)
        segments = []
        current = a
        for here, there in zip(path, path[1:]):
            if cuts.bubble_parent[there] == here:  # going down
                leave, enter = int(cuts.bubble_cut[there]), int(cuts.bubble_entry[there])
            else:  # going up
                leave, enter = int(cuts.bubble_entry[here]), int(cuts.bubble_cut[here])
            segments.append((here, current, leave))
            current = enter
        segments.append((path[-1], current, b))
        return segments

    def resistance(self, a: int, b: int) -> float:
        a, b = int(a), int(b)
        if a == b:
            return 0.0
        segments = self.hops(a, b)
        total = float(len(segments) - 1)
        for c, s, t in segments:
            total += self.bubble_resistance(c, s, t)
        return total

    def __call__(self, a: int, b: int) -> float:
        return self.resistance(a, b)


def effective_resistance(graph: Graph, a: int, b: int, tol: float = 1e-9, method: str = "auto",
                         cuts: CutStructure | None = None) -> float:
    """Effective resistance between ``a`` and ``b`` with unit edge resistances.

    ``method`` is ``"auto"`` / ``"series"`` (cut-bond decomposition) or
    ``"dense"`` (the brute-force oracle).
    """
    if method == "dense":
        return brute_resistance_oracle(graph, a, b)
    if method not in ("auto", "series"):
        raise ValueError(f"unknown method {method!r}")
    if cuts is None:
        cuts = CutStructure(graph, root=a)
    return ResistanceEngine(graph, cuts, tol).resistance(a, b)


def brute_resistance_oracle(graph: Graph, a: int, b: int) -> float:
    """Dense Laplacian solve with ``b`` grounded; reference answer."""
    if graph.n > ORACLE_LIMIT:
        raise TooLarge(f"oracle limited to {ORACLE_LIMIT} vertices")
    dist = graph.distances_from(a)
    if dist[b] < 0:
        raise Disconnected("terminals are not connected")
    if a == b:
        return 0.0
    comp = np.flatnonzero(dist >= 0)
    lap = graph.laplacian(comp).toarray()
    local = np.full(graph.n, -1)
    local[comp] = np.arange(len(comp))
    ia, ib = local[a], local[b]
    keep = np.arange(len(comp)) != ib
    rhs = np.zeros(len(comp))
    rhs[ia] = 1.0
    x = np.linalg.solve(lap[np.ix_(keep, keep)], rhs[keep])
    return float(x[ia - (ia > ib)])


# ---------------------------------------------------------------------------
# triangles

def _steiner_region(cuts: CutStructure, terminals) -> np.ndarray:
    bubbles = set()
    first = int(cuts.bubble_id[terminals[0]])
    for t in terminals[1:]:
        bubbles.update(cuts.bubble_path(first, int(cuts.bubble_id[t])))
    bubbles.add(first)
    return np.sort(np.concatenate([cuts.members(c) for c in sorted(bubbles)]))


def terminal_conductances(graph: Graph, terminals, region=None, cuts: CutStructure | None = None) -> np.ndarray:
    """Schur complement of the Laplacian onto ``terminals``.

    ``region`` lists the vertices kept; parts of the graph attached to the
    region through a single terminal do not change off-diagonal entries, so
    they may be left out.  Off-diagonal entries are minus the effective
    conductances between terminal pairs.
    """
    terminals = [int(t) for t in terminals]
    if len(set(terminals)) != len(terminals):
        raise ValueError("terminals must be distinct")
    if region is None:
        dist = graph.distances_from(terminals[0])
        if np.any(dist[terminals] < 0):
            raise NotInSameComponent("terminals lie in different components")
        if cuts is None:
            cuts = CutStructure(graph, root=terminals[0]) if np.all(dist >= 0) else None
        if cuts is None:
            region = np.flatnonzero(dist >= 0)
        else:
            region = _steiner_region(cuts, terminals)
    region = np.asarray(region)
    lap = graph.laplacian(region).tocsr()
    local = np.full(graph.n, -1, np.int64)
    local[region] = np.arange(len(region))
    bnd = local[terminals]
    if np.any(bnd < 0):
        raise NotInSameComponent("terminal outside the region")
    inner = np.setdiff1d(np.arange(len(region)), bnd)
    l_bb = lap[bnd][:, bnd].toarray()
    if len(inner) == 0:
        return l_bb
    l_ib = lap[inner][:, bnd]
    l_ii = lap[inner][:, inner]
    if len(inner) <= DIRECT_LIMIT:
        sol = np.linalg.solve(l_ii.toarray(), l_ib.toarray())
    else:
        sol = splinalg.spsolve(l_ii.tocsc(), l_ib.toarray())
    schur = l_bb - (l_ib.T @ sol)
    return 0.5 * (schur + schur.T)


def escape_probabilities(graph: Graph, x: int, y: int, z: int, region=None, cuts=None) -> dict:
    """P_u[T_v < T_w and T_v < T_u^+] for the ordered terminal pairs (u, v)."""
    cond = -terminal_conductances(graph, (x, y, z), region, cuts)
    deg = graph.degree
    names = (x, y, z)
    out = {}
    for i in range(3):
        for j in range(3):
            if i != j:
                out[(names[i], names[j])] = cond[i, j] / deg[names[i]]
    return out


def triangle_escape_resistances(graph: Graph, x: int, y: int, z: int, region=None, cuts=None):
    """Triangle resistances (R_xy, R_yz, R_zx) equivalent to the network
    seen from the three terminals.

    1/R_xy = deg(x) * P_x[T_y < T_z, T_y < T_x^+]; infinite when every x-y
    path passes through z.
    """
    p = escape_probabilities(graph, x, y, z, region, cuts)
    deg = graph.degree
    out = []
    for u, v in ((x, y), (y, z), (z, x)):
        # symmetric by reversibility; average the two estimates
        c = 0.5 * (deg[u] * p[(u, v)] + deg[v] * p[(v, u)])
        out.append(np.inf if c <= 1e-300 else float(1.0 / c))
    return tuple(out)


def star_from_triangle(r_xy: float, r_yz: float, r_zx: float):
    """Star resistances (R_xv, R_yv, R_zv) equivalent to a triangle."""
    r = np.array([r_xy, r_yz, r_zx], dtype=float)
    if np.any(~(r > 0)):
        raise NonPositiveInput("triangle resistances must be positive")
    if np.all(np.isfinite(r)):
        total = r.sum()
        return (r_xy * r_zx / total, r_xy * r_yz / total, r_yz * r_zx / total)
    return star_from_conductances(*(1.0 / r))


def star_from_conductances(c_xy: float, c_yz: float, c_zx: float):
    """Same transform written with conductances; tolerates zero entries."""
    s = c_xy * c_yz + c_yz * c_zx + c_zx * c_xy
    if not s > 0:
        raise NonPositiveInput("at least two conductances must be positive")
    return (c_yz / s, c_zx / s, c_xy / s)
