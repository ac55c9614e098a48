"""Two-sided infinite backbone with independent critical bushes, sampled on
a finite window of backbone indices, and its pivotal points."""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .laws import OffspringLaw, size_biased_law
from .trace import TraceGraph, _first_appearance_ids, _row_keys, trace_from_steps


def _unit_steps(rng, count: int, d: int) -> np.ndarray:
    steps = np.zeros((count, d), np.int32)
    steps[np.arange(count), rng.integers(d, size=count)] = 2 * rng.integers(2, size=count) - 1
    return steps


def _grow_bushes(law: OffspringLaw, roots: np.ndarray, depth_cap: int, rng):
    """Breadth-first growth of one bush per entry of ``roots`` (row ids).

    Root offspring follow the size-biased law minus one, all others follow
    ``law``.  Returns (parent row of every new vertex, bush of every new
    vertex, depth of every new vertex, bushes that hit the depth cap).
    New vertices are numbered after the roots, generation by generation.
    """
    biased = size_biased_law(law)
    nroots = len(roots)
    current_rows = np.asarray(roots)
    owner = np.arange(nroots)
    counts = biased.sample(rng, nroots) - 1
    parents, bushes, depths = [], [], []
    next_row = int(np.max(roots)) + 1 if nroots else 0
    truncated = np.zeros(nroots, bool)
    depth = 1
    while counts.sum() > 0:
        if depth > depth_cap:
            truncated[np.unique(owner[counts > 0])] = True
            break
        child_parent = np.repeat(current_rows, counts)
        child_owner = np.repeat(owner, counts)
        k = len(child_parent)
        parents.append(child_parent)
        bushes.append(child_owner)
        depths.append(np.full(k, depth, np.int64))
        current_rows = np.arange(next_row, next_row + k)
        next_row += k
        owner = child_owner
        counts = law.sample(rng, k)
        depth += 1
    cat = (lambda xs, dt: np.concatenate(xs) if xs else np.zeros(0, dt))
    return cat(parents, np.int64), cat(bushes, np.int64), cat(depths, np.int64), truncated


def _place(base: np.ndarray, parent_row: np.ndarray, depth: np.ndarray, rng) -> np.ndarray:
    """Positions of grown vertices; rows below ``len(base)`` are ``base``."""
    nb, d = base.shape
    pos = np.empty((len(parent_row), d), np.int32)
    steps = _unit_steps(rng, len(parent_row), d)
    start = 0
    while start < len(parent_row):
        stop = start + int(np.searchsorted(depth[start:], depth[start], side="right"))
        par = parent_row[start:stop]
        from_base = par < nb
        pos[start:stop][from_base] = base[par[from_base]]
        pos[start:stop][~from_base] = pos[par[~from_base] - nb]
        pos[start:stop] += steps[start:stop]
        start = stop
    return pos


@dataclass(frozen=True, eq=False)
class BackboneModel:
    """Backbone walk on indices ``lo..hi`` with an embedded bush at each index.

    Rows ``0..hi-lo`` of ``points`` are the backbone points (row ``i - lo``
    is index ``i``); later rows are bush vertices, with ``parent_row``
    giving their parent's row and ``bush_index`` the backbone index of the
    bush they belong to.
    """

    law: OffspringLaw
    d: int
    lo: int
    hi: int
    bush_depth_cap: int
    points: np.ndarray
    parent_row: np.ndarray
    bush_index: np.ndarray
    depth: np.ndarray
    truncated: np.ndarray

    @property
    def indices(self) -> np.ndarray:
        return np.arange(self.lo, self.hi + 1)

    @property
    def backbone(self) -> np.ndarray:
        return self.points[:self.hi - self.lo + 1]

    def alpha(self, i: int) -> np.ndarray:
        return self.points[i - self.lo]

    @cached_property
    def row_bush(self) -> np.ndarray:
        """Backbone index of the bush containing each row."""
        return np.concatenate((self.indices, self.bush_index))

    def bush_sizes(self) -> np.ndarray:
        """Vertex count of each bush, root included."""
        return 1 + np.bincount(self.bush_index - self.lo, minlength=self.hi - self.lo + 1)

    def bush(self, i: int):
        """Positions and parent pointers (local, root first) of bush ``i``."""
        rows = np.concatenate(([i - self.lo], np.flatnonzero(self.row_bush == i)[1:]))
        local = {int(r): k for k, r in enumerate(rows)}
        parent = np.array([-1] + [local[int(self.parent_row[r - len(self.backbone)])] for r in rows[1:]])
        return self.points[rows], parent

    @cached_property
    def trace(self) -> TraceGraph:
        nb = self.hi - self.lo + 1
        tail = np.concatenate((np.arange(nb - 1), self.parent_row))
        head = np.concatenate((np.arange(1, nb), np.arange(nb, len(self.points))))
        return trace_from_steps(self.points, tail, head)

    @cached_property
    def pivotal_indices(self) -> np.ndarray:
        """Indices i whose bushes up to i and bushes after i have disjoint
        images (within the window)."""
        if "trace" in self.__dict__:
            ids, m = self.trace.tree_to_graph, self.trace.n
        else:
            ids, first_rows = _first_appearance_ids(_row_keys(self.points))
            m = len(first_rows)
        bush = self.row_bush
        first = np.full(m, np.iinfo(np.int64).max)
        last = np.full(m, np.iinfo(np.int64).min)
        np.minimum.at(first, ids, bush)
        np.maximum.at(last, ids, bush)
        shared = first < last
        # index i is blocked when some point is hit by a bush <= i and one > i
        nb = self.hi - self.lo + 1
        diff = np.zeros(nb + 1, np.int64)
        np.add.at(diff, first[shared] - self.lo, 1)
        np.add.at(diff, last[shared] - self.lo, -1)
        blocked = np.cumsum(diff)[:nb] > 0
        return self.indices[~blocked]


def sample_ibic_window(law: OffspringLaw, d: int, W: int, bush_depth_cap: int,
                       rng: np.random.Generator, one_sided: bool = False) -> BackboneModel:
    """Backbone simple random walk on indices [-W, W] (or [0, W]) through
    the origin, carrying independent bushes embedded by unit steps."""
    if W < 1 or d < 1:
        raise ValueError("need W >= 1 and d >= 1")
    lo = 0 if one_sided else -W
    nb = W - lo + 1
    steps = _unit_steps(rng, nb - 1, d)
    backbone = np.zeros((nb, d), np.int32)
    backbone[1:] = np.cumsum(steps, axis=0)
    backbone -= backbone[-lo]
    parent_row, owner, depth, truncated = _grow_bushes(law, np.arange(nb), bush_depth_cap, rng)
    pos = _place(backbone, parent_row, depth, rng)
    points = np.concatenate((backbone, pos))
    return BackboneModel(law, d, lo, W, bush_depth_cap, points, parent_row, owner + lo, depth, truncated)


def sample_bush(law: OffspringLaw, d: int, depth_cap: int, rng: np.random.Generator, root=None):
    """One embedded bush: positions (root first) and parent pointers."""
    root = np.zeros(d, np.int32) if root is None else np.asarray(root, np.int32)
    parent_row, _, depth, truncated = _grow_bushes(law, np.array([0]), depth_cap, rng)
    pos = np.concatenate((root[None, :], _place(root[None, :], parent_row, depth, rng)))
    return pos, np.concatenate(([-1], parent_row)), bool(truncated[0])
