"""Continuum objects: Brownian excursions, the trees they code, Gaussian
embeddings of finite trees and Brownian motion on metric trees."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateSample, StepTooCoarse
from .spatial_tree import GraphSpatialTree, shape_code, spatial_tree_distance_D  # noqa: F401


@dataclass(frozen=True, eq=False)
class Excursion:
    """Values g(j/m), j = 0..m, of a nonnegative path vanishing at 0 and 1;
    evaluated between grid points by linear interpolation."""

    values: np.ndarray

    @property
    def mesh(self) -> int:
        return len(self.values) - 1

    def __call__(self, t):
        grid = np.linspace(0.0, 1.0, self.mesh + 1)
        return np.interp(t, grid, self.values)

    def minimum(self, s: float, t: float) -> float:
        """Minimum of g over the interval between s and t."""
        s, t = min(s, t), max(s, t)
        m = self.mesh
        inner = self.values[int(np.floor(s * m)) + 1:int(np.ceil(t * m))]
        ends = min(float(self(s)), float(self(t)))
        return min(ends, float(inner.min())) if len(inner) else ends


def sample_excursion(mesh: int, rng: np.random.Generator) -> Excursion:
    """Discretised normalised Brownian excursion via the Vervaat transform:
    a Brownian bridge on the mesh, rotated to start at its minimum and
    shifted up by that minimum."""
    if mesh < 2:
        raise ValueError("mesh must be >= 2")
    steps = rng.normal(0.0, np.sqrt(1.0 / mesh), size=mesh)
    walk = np.concatenate(([0.0], np.cumsum(steps)))
    bridge = walk - np.linspace(0.0, 1.0, mesh + 1) * walk[-1]
    k = int(np.argmin(bridge[:-1]))
    rotated = np.concatenate((bridge[k:-1], bridge[:k + 1])) - bridge[k]
    rotated[0] = rotated[-1] = 0.0
    return Excursion(np.maximum(rotated, 0.0))


def excursion_tree_distance(g, s: float, t: float) -> float:
    """d_g(s, t) = g(s) + g(t) - 2 min_{[s,t]} g."""
    if not isinstance(g, Excursion):
        g = Excursion(np.asarray(g, dtype=float))
    if s == t:
        return 0.0
    return float(g(s) + g(t) - 2.0 * g.minimum(s, t))


def reduced_continuum_tree(g, times, tol: float = 1e-12) -> GraphSpatialTree:
    """Subtree of the tree coded by ``g`` spanned by the root and the points
    at the given times; leaf ``i`` carries label ``i``.

    Built recursively from the minima of g between time-consecutive points:
    the branch point of two groups sits at height equal to that minimum.
    """
    if not isinstance(g, Excursion):
        g = Excursion(np.asarray(g, dtype=float))
    times = np.asarray(times, dtype=float)
    if len(np.unique(times)) != len(times):
        raise DegenerateSample("marked times must be distinct")
    order = np.argsort(times)
    t = times[order]
    heights = g(t)
    gaps = np.array([g.minimum(t[i], t[i + 1]) for i in range(len(t) - 1)])

    parent, height, labels = [-1], [0.0], [()]

    def build(lo, hi, up):
        me = len(parent)
        parent.append(up)
        if lo == hi:
            height.append(float(heights[lo]))
            labels.append((int(order[lo]),))
            return
        j = lo + int(np.argmin(gaps[lo:hi]))
        height.append(float(gaps[j]))
        labels.append(())
        build(lo, j, me)
        build(j + 1, hi, me)

    build(0, len(t) - 1, 0)
    height = np.array(height)
    parent = np.array(parent)
    length = np.zeros(len(parent))
    length[1:] = height[1:] - height[parent[1:]]
    if np.any(length[1:] <= tol):
        raise DegenerateSample("coinciding branch points or a leaf on a branch")
    return GraphSpatialTree(parent=parent, length=length, labels=tuple(labels))


def gaussian_embed(tree: GraphSpatialTree, d: int, rng: np.random.Generator,
                   segments: int = 32) -> GraphSpatialTree:
    """Brownian embedding: the root goes to 0 and every edge of length L
    carries an independent d-dimensional Brownian path run for time L,
    sampled at ``segments`` equally spaced points."""
    pos = np.zeros((tree.n, d))
    paths = [None]
    s = np.linspace(0.0, 1.0, segments + 1)
    for v in range(1, tree.n):
        length = tree.length[v]
        if not length > 0:
            raise ValueError("edge lengths must be positive")
        inc = rng.normal(0.0, np.sqrt(length / segments), size=(segments, d))
        pts = pos[tree.parent[v]] + np.vstack((np.zeros(d), np.cumsum(inc, axis=0)))
        pos[v] = pts[-1]
        paths.append((s, pts))
    return GraphSpatialTree(tree.parent, tree.length, tree.labels, pos, tuple(paths), tree.resistance)


# ---------------------------------------------------------------------------
# Brownian motion on a metric tree, approximated on a mesh

class TreeMesh:
    """Random walk on an h-mesh of a metric tree.

    Each edge of length L is cut into k = ceil(L/h) pieces of length L/k.
    From a mesh point the walk jumps to a neighbour with probability
    proportional to 1/(piece length), so hitting probabilities are exactly
    linear in tree distance.  The time spent per step is the mean exit time
    of Brownian motion from the star of adjacent pieces,
    (sum_i rho_i h_i) / (sum_i 1/h_i), where rho_i is the density of the
    speed measure on piece i: h^2 inside an edge with Lebesgue measure.
    """

    def __init__(self, tree: GraphSpatialTree, h: float, measure="lebesgue"):
        lengths = tree.length[1:]
        if not np.all(lengths > 0):
            raise ValueError("edge lengths must be positive")
        if h > lengths.min() / 2:
            raise StepTooCoarse(f"step {h} too coarse for shortest edge {lengths.min()}")
        self.tree = tree
        if isinstance(measure, str):
            if measure == "lebesgue":
                density = np.ones(tree.n)
            elif measure == "normalized":
                density = np.full(tree.n, 1.0 / tree.total_length)
            else:
                raise ValueError(f"unknown measure {measure!r}")
        else:
            density = np.asarray(measure, dtype=float)
        self.edge_of, self.frac = [], []
        nbrs = [[] for _ in range(tree.n)]  # (neighbour, piece length, density)
        edge_of = [0] * tree.n
        frac = [1.0] * tree.n
        frac[0] = 0.0
        self.pieces = {}
        count = tree.n
        for v in range(1, tree.n):
            k = int(np.ceil(tree.length[v] / h - 1e-9))
            piece = tree.length[v] / k
            chain = [tree.parent[v]] + list(range(count, count + k - 1)) + [v]
            for j in range(1, k):
                nbrs.append([])
                edge_of.append(v)
                frac.append(j / k)
            count += k - 1
            for a, b in zip(chain, chain[1:]):
                nbrs[a].append((b, piece, density[v]))
                nbrs[b].append((a, piece, density[v]))
            self.pieces[v] = chain
        self.n = count
        self.edge_of = np.array(edge_of)
        self.frac = np.array(frac)
        self.indptr = np.zeros(count + 1, np.int64)
        self.indptr[1:] = np.cumsum([len(x) for x in nbrs])
        self.nbr = np.array([b for x in nbrs for b, _, _ in x], dtype=np.int64)
        cum = []
        dt = np.empty(count)
        for i, x in enumerate(nbrs):
            c = np.array([1.0 / p for _, p, _ in x])
            cum.extend(np.cumsum(c) / c.sum())
            dt[i] = sum(rho * p for _, p, rho in x) / c.sum()
        self.cumprob = np.array(cum)
        self.dt = dt
        self.max_degree = int(np.diff(self.indptr).max())

    def node_at(self, v: int, s: float) -> int:
        """Mesh node closest to fraction s along the edge into v."""
        if v == 0 or s >= 1.0:
            return v
        chain = self.pieces[v]
        j = int(round(s * (len(chain) - 1)))
        return int(chain[j])

    def position(self, nodes) -> np.ndarray:
        """Embedded R^d image of mesh nodes (needs an embedded tree)."""
        nodes = np.asarray(nodes)
        out = np.empty((len(nodes), self.tree.positions.shape[1]))
        for i, u in enumerate(nodes):
            out[i] = self.tree.positions[0] if u == 0 else self.tree.edge_point(self.edge_of[u], self.frac[u])[0]
        return out

    def _step(self, state: np.ndarray, rng) -> np.ndarray:
        u = rng.random(len(state))
        base = self.indptr[state]
        deg = self.indptr[state + 1] - base
        k = np.zeros(len(state), np.int64)
        for j in range(self.max_degree - 1):
            k += (j < deg - 1) & (u > self.cumprob[np.minimum(base + j, len(self.cumprob) - 1)])
        return self.nbr[base + k]

    def simulate(self, start: int, duration: float, rng: np.random.Generator):
        """One path until elapsed time reaches ``duration``: (times, nodes)."""
        times, nodes = [0.0], [start]
        state = np.array([start])
        t = 0.0
        while t < duration:
            t += self.dt[state[0]]
            state = self._step(state, rng)
            times.append(t)
            nodes.append(int(state[0]))
        return np.array(times), np.array(nodes)

    def first_hits(self, start: int, targets, n_paths: int, rng: np.random.Generator,
                   max_steps: int = 10**8) -> np.ndarray:
        """Index into ``targets`` of the first target reached by each path."""
        targets = np.asarray(targets)
        which = np.full(self.n, -1, np.int64)
        which[targets] = np.arange(len(targets))
        state = np.full(n_paths, start, np.int64)
        out = np.full(n_paths, -1, np.int64)
        active = np.arange(n_paths)
        for _ in range(max_steps):
            if len(active) == 0:
                break
            state = self._step(state, rng)
            hit = which[state]
            done = hit >= 0
            out[active[done]] = hit[done]
            active, state = active[~done], state[~done]
        return out

    def occupation(self, start: int, target: int, n_paths: int, rng: np.random.Generator,
                   max_steps: int = 10**8) -> np.ndarray:
        """Mean time spent at each mesh node before hitting ``target``."""
        occ = np.zeros(self.n)
        state = np.full(n_paths, start, np.int64)
        for _ in range(max_steps):
            if len(state) == 0:
                break
            np.add.at(occ, state, self.dt[state])
            state = self._step(state, rng)
            state = state[state != target]
        return occ / n_paths


def bm_on_graph_tree(tree: GraphSpatialTree, h: float, duration: float, rng: np.random.Generator,
                     measure="lebesgue", start: int = 0):
    """Brownian motion on a metric tree approximated on an h-mesh.

    Returns (times, edge ids, edge fractions, R^d positions or None).
    """
    mesh = TreeMesh(tree, h, measure)
    times, nodes = mesh.simulate(start, duration, rng)
    image = mesh.position(nodes) if tree.positions is not None else None
    return times, mesh.edge_of[nodes], mesh.frac[nodes], image
