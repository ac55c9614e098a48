"""Plane trees, Galton-Watson samplers, encodings and enumeration."""
from __future__ import annotations

import io
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

from . import _kernels
from .errors import IncompatibleSize, RetryExhausted, TooLarge
from .laws import OffspringLaw, size_biased_law


@dataclass(frozen=True, eq=False)
class PlaneTree:
    """A rooted ordered tree with vertices numbered in lexicographic order.

    The tree is determined by ``offspring``, the number of children of each
    vertex listed in depth-first (lexicographic) order; vertex 0 is the root
    and a child always has a larger index than its parent.
    """

    offspring: np.ndarray
    truncated: bool = False
    marks: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        z = np.ascontiguousarray(self.offspring, dtype=np.int64)
        z.setflags(write=False)
        object.__setattr__(self, "offspring", z)

    @classmethod
    def from_parents(cls, parent, **kw) -> "PlaneTree":
        """Build from a preorder parent array (``parent[0] == -1``)."""
        parent = np.asarray(parent, dtype=np.int64)
        if parent[0] != -1 or np.any(parent[1:] >= np.arange(1, len(parent))) or np.any(parent[1:] < 0):
            raise ValueError("parent array is not in preorder")
        tree = cls(np.bincount(parent[1:], minlength=len(parent)), **kw)
        if not np.array_equal(tree.parent, parent):
            raise ValueError("parent array is not in preorder")
        return tree

    @property
    def n(self) -> int:
        return len(self.offspring)

    def __len__(self):
        return self.n

    def __eq__(self, other):
        return isinstance(other, PlaneTree) and np.array_equal(self.offspring, other.offspring)

    def __hash__(self):
        return hash(self.offspring.tobytes())

    @cached_property
    def parent(self) -> np.ndarray:
        parent = _kernels.decode_parents(self.offspring)
        if parent[0] == -2:
            raise ValueError("offspring sequence does not describe a finite tree")
        parent.setflags(write=False)
        return parent

    @cached_property
    def depth(self) -> np.ndarray:
        depth = _kernels.depths_from_parents(self.parent)
        depth.setflags(write=False)
        return depth

    @cached_property
    def child_ptr(self) -> np.ndarray:
        """CSR offsets into ``children_flat``."""
        ptr = np.zeros(self.n + 1, np.int64)
        np.cumsum(self.offspring, out=ptr[1:])
        return ptr

    @cached_property
    def children_flat(self) -> np.ndarray:
        # stable sort by parent keeps children in lexicographic order
        kids = np.argsort(self.parent[1:], kind="stable") + 1
        return kids

    def children(self, v: int) -> np.ndarray:
        return self.children_flat[self.child_ptr[v]:self.child_ptr[v + 1]]

    @property
    def height(self) -> int:
        return int(self.depth.max())

    @cached_property
    def subtree_size(self) -> np.ndarray:
        return _kernels.subtree_sizes(self.parent)

    def is_ancestor(self, a: int, v: int) -> bool:
        """True when ``a`` lies on the root path of ``v`` (``a == v`` included)."""
        return a <= v < a + self.subtree_size[a]

    def ancestors(self, v: int) -> np.ndarray:
        """Root path of ``v`` from the root down to ``v``."""
        path = [v]
        parent = self.parent
        while v > 0:
            v = int(parent[v])
            path.append(v)
        return np.array(path[::-1], dtype=np.int64)


# ---------------------------------------------------------------------------
# encodings

@dataclass(frozen=True)
class TreeEncodings:
    lukasiewicz: np.ndarray
    height: np.ndarray
    search_depth: np.ndarray


def lukasiewicz_path(tree: PlaneTree) -> np.ndarray:
    """Queue sizes Q_0 = 1, Q_i = Q_{i-1} - 1 + Z_i."""
    q = np.empty(tree.n + 1, np.int64)
    q[0] = 1
    np.cumsum(tree.offspring - 1, out=q[1:])
    q[1:] += 1
    return q


def search_depth(tree: PlaneTree) -> np.ndarray:
    """Depth along the contour (depth-first search) walk, 2(n-1)+1 values."""
    n = tree.n
    depth = tree.depth
    out = np.empty(2 * (n - 1) + 1, np.int64)
    size = tree.subtree_size
    # before entering v the walk made v down-steps and v - depth(v) up-steps
    entry = 2 * np.arange(n) - depth
    out[entry] = depth
    exits = entry + 2 * (size - 1)
    mask = np.arange(n) > 0
    # after leaving v we stand at the parent
    out[exits[mask] + 1] = depth[mask] - 1
    return out


def tree_encodings(tree: PlaneTree) -> TreeEncodings:
    return TreeEncodings(lukasiewicz_path(tree), tree.depth.copy(), search_depth(tree))


def decode_lukasiewicz(q) -> PlaneTree:
    q = np.asarray(q, dtype=np.int64)
    if q[0] != 1 or q[-1] != 0 or np.any(q[1:-1] <= 0):
        raise ValueError("not a Lukasiewicz excursion")
    z = np.diff(q) + 1
    if np.any(z < 0):
        raise ValueError("not a Lukasiewicz excursion")
    return PlaneTree(z)


# ---------------------------------------------------------------------------
# samplers

def _cycle_rotate(z: np.ndarray) -> np.ndarray:
    """Rotate a sequence with sum(z - 1) == -1 into its unique excursion."""
    walk = np.cumsum(z - 1)
    k = int(np.argmin(walk))  # first time the minimum is reached
    return np.roll(z, -(k + 1))


def _conditioned_degrees(law: OffspringLaw, n: int, rng: np.random.Generator,
                         max_tries: int = 100_000) -> np.ndarray:
    s = n - 1
    if law.kind == "poisson":
        return rng.multinomial(s, np.full(n, 1.0 / n)).astype(np.int64)
    if law.kind == "geometric":
        # i.i.d. geometric given the sum is uniform over weak compositions
        bars = np.sort(rng.choice(s + n - 1, size=n - 1, replace=False))
        edges = np.concatenate(([-1], bars, [s + n - 1]))
        return (np.diff(edges) - 1).astype(np.int64)
    support = law.support
    if np.array_equal(support, [0, 2]):
        z = np.zeros(n, np.int64)
        z[rng.choice(n, size=s // 2, replace=False)] = 2
        return z
    for _ in range(max_tries):
        z = law.sample(rng, n)
        if z.sum() == s:
            return z
    raise RetryExhausted(f"no degree sequence of sum {s} after {max_tries} draws")


def sample_gw_size(law: OffspringLaw, n: int, rng: np.random.Generator) -> PlaneTree:
    """Exact sample of a Galton-Watson tree conditioned to have ``n`` vertices.

    Draw exchangeable offspring counts conditioned on their sum being n - 1,
    then apply the cycle lemma to obtain the unique rotation which is a
    valid depth-first sequence.
    """
    if not law.size_possible(n):
        raise IncompatibleSize(f"no tree with {n} vertices under {law.name}")
    if n == 1:
        return PlaneTree(np.zeros(1, np.int64))
    return PlaneTree(_cycle_rotate(_conditioned_degrees(law, n, rng)))


def _grow_by_generations(law, rng, size_cap, first_level=1, first_counts=None, depth_cap=None):
    """Breadth-first offspring counts, generation by generation.

    Returns (counts, level_sizes, truncated).  ``first_counts`` overrides the
    root's offspring count.
    """
    counts = []
    levels = [first_level]
    total = first_level
    width = first_level
    generation = 0
    while width > 0:
        if depth_cap is not None and generation >= depth_cap:
            counts.append(np.zeros(width, np.int64))
            break
        if generation == 0 and first_counts is not None:
            z = np.asarray(first_counts, dtype=np.int64)
        else:
            z = law.sample(rng, width)
        counts.append(z)
        width = int(z.sum())
        total += width
        generation += 1
        if width:
            levels.append(width)
        if total > size_cap:
            return None, levels, True
    return np.concatenate(counts), levels, False


def sample_gw(law: OffspringLaw, rng: np.random.Generator, size_cap: int = 10**6):
    """Unconditioned Galton-Watson tree.

    Returns the tree, or ``None`` when the progeny exceeded ``size_cap``
    (the truncation flag).
    """
    counts, _, truncated = _grow_by_generations(law, rng, size_cap)
    if truncated:
        return None
    order = _kernels.breadth_to_preorder(counts)
    return PlaneTree(counts[order])


def sample_gw_height(law: OffspringLaw, h: int, rng: np.random.Generator, mode: str = ">=",
                     max_tries: int = 1_000_000, size_cap: int = 10**7) -> PlaneTree:
    """Galton-Watson tree conditioned on its height, by rejection.

    ``mode`` is ``">="`` for H >= h or ``"=="`` for H == h.  Generations are
    grown breadth-first so that early extinction is rejected cheaply.
    """
    if h < 1:
        raise ValueError("h must be >= 1")
    if mode not in (">=", "=="):
        raise ValueError("mode must be '>=' or '=='")
    for _ in range(max_tries):
        depth_cap = h + 1 if mode == "==" else None
        counts, levels, truncated = _grow_by_generations(law, rng, size_cap, depth_cap=depth_cap)
        height = len(levels) - 1
        if truncated or height < h:
            continue
        if mode == "==" and height != h:
            continue
        order = _kernels.breadth_to_preorder(counts)
        return PlaneTree(counts[order])
    raise RetryExhausted(f"no tree of height {mode} {h} in {max_tries} attempts")


def sample_iic_truncated(law: OffspringLaw, depth: int, rng: np.random.Generator,
                         size_cap: int = 10**7) -> PlaneTree:
    """Size-biased (Kesten) tree with its spine cut at ``depth``.

    Spine vertices have Z~ children, one of which (uniformly placed) continues
    the spine; the others start ordinary Galton-Watson subtrees.  The result
    carries ``marks`` (True on the spine) and ``truncated`` if the total size
    reached ``size_cap``.
    """
    if depth < 1:
        raise ValueError("depth must be >= 1")
    zt = size_biased_law(law).sample(rng, depth)
    counts_levels, spine_levels = [], []
    spine = np.array([True])
    total = 1
    truncated = False
    level = 0
    while len(spine):
        z = np.zeros(len(spine), np.int64)
        normal = ~spine
        if not truncated and normal.any():
            z[normal] = law.sample(rng, int(normal.sum()))
        s = np.flatnonzero(spine)
        if len(s) and level < depth:
            z[s[0]] = zt[level]
        offsets = np.concatenate(([0], np.cumsum(z)))
        next_spine = np.zeros(int(offsets[-1]), bool)
        if len(s) and level < depth:
            next_spine[offsets[s[0]] + rng.integers(z[s[0]])] = True
        counts_levels.append(z)
        spine_levels.append(spine)
        total += int(offsets[-1])
        truncated = truncated or total > size_cap
        spine = next_spine
        level += 1
    counts = np.concatenate(counts_levels)
    flags = np.concatenate(spine_levels)
    order = _kernels.breadth_to_preorder(counts)
    return PlaneTree(counts[order], truncated=truncated, marks=flags[order])


# ---------------------------------------------------------------------------
# enumeration oracle

def _compositions(total, parts):
    if parts == 1:
        yield (total,)
        return
    for first in range(total + 1):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


def enumerate_plane_trees(n: int, law: OffspringLaw | None = None):
    """All plane trees with ``n`` vertices and their Galton-Watson weights.

    Returns a list of (tree, weight) pairs in lexicographic order of the
    offspring sequence; weights are products of offspring probabilities
    (all 1.0 when ``law`` is None).
    """
    if n > 12:
        raise TooLarge("enumeration is limited to n <= 12")
    if n < 1:
        raise ValueError("n must be positive")
    out = []
    for z in _compositions(n - 1, n):
        q = np.cumsum(np.asarray(z) - 1) + 1
        if np.any(q[:-1] <= 0):
            continue
        w = 1.0 if law is None else float(np.prod([law.p(k) for k in z]))
        out.append((PlaneTree(np.array(z)), w))
    return out


# ---------------------------------------------------------------------------
# serialization

_TREE_MAGIC = "# critbrw-tree v1"


def write_tree(tree: PlaneTree, path_or_buf, law_name: str = "", seed=None) -> None:
    """Line-based format: magic line, ``n``, ``law``, ``seed`` headers, then
    one parent index per line (root is -1)."""
    lines = [_TREE_MAGIC, f"n {tree.n}", f"law {law_name or '-'}", f"seed {'-' if seed is None else seed}"]
    lines.extend(str(int(p)) for p in tree.parent)
    text = "\n".join(lines) + "\n"
    if isinstance(path_or_buf, (str, Path)):
        Path(path_or_buf).write_text(text)
    else:
        path_or_buf.write(text)


def read_tree(path_or_buf):
    """Inverse of :func:`write_tree`; returns (tree, header dict)."""
    if isinstance(path_or_buf, (str, Path)):
        text = Path(path_or_buf).read_text()
    else:
        text = path_or_buf.read()
    lines = text.splitlines()
    if not lines or lines[0] != _TREE_MAGIC:
        raise ValueError("not a tree file")
    header = {}
    for line in lines[1:4]:
        key, _, value = line.partition(" ")
        header[key] = value
    n = int(header["n"])
    parent = np.loadtxt(io.StringIO("\n".join(lines[4:])), dtype=np.int64, ndmin=1)
    if len(parent) != n:
        raise ValueError(f"expected {n} parents, found {len(parent)}")
    return PlaneTree.from_parents(parent), header
