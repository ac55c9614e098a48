"""Simple random walk on trace graphs: paths, rescaling, return
probabilities, displacement and log-log exponent fits."""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import PathTooShort, TooLarge
from .graph import Graph

EXACT_LIMIT = 2000
_BATCH = 256


@dataclass(frozen=True, eq=False)
class WalkPath:
    vertices: np.ndarray
    positions: np.ndarray | None
    start: int
    seed: object = None

    @property
    def steps(self) -> int:
        return len(self.vertices) - 1


@dataclass(frozen=True, eq=False)
class RescaledPath:
    times: np.ndarray
    values: np.ndarray


@dataclass(frozen=True, eq=False)
class Profile:
    """Statistic on a grid of times with standard errors."""

    m: np.ndarray
    estimate: np.ndarray
    stderr: np.ndarray
    name: str = "statistic"

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            out = csv.writer(fh)
            out.writerow(["m", self.name, "stderr"])
            for row in zip(self.m.tolist(), self.estimate.tolist(), self.stderr.tolist()):
                out.writerow(row)


@dataclass(frozen=True)
class SlopeFit:
    slope: float
    stderr: float
    intercept: float
    r2: float
    points: int


def _coords(graph):
    coords = getattr(graph, "coords", None)
    return None if coords is None else np.ascontiguousarray(coords, dtype=np.float64)


def simulate_walk(graph: Graph, start: int, steps: int, rng: np.random.Generator, seed=None) -> WalkPath:
    """Simple random walk: a uniform neighbour at every step."""
    if not 0 <= start < graph.n:
        raise ValueError("start vertex not in graph")
    if graph.degree[start] == 0:
        raise ValueError("start vertex is isolated")
    uniforms = rng.random((1, steps))
    vertices = _kernels.walk_paths(graph.indptr, graph.indices, int(start), int(steps), uniforms)[0]
    coords = getattr(graph, "coords", None)
    return WalkPath(vertices, None if coords is None else coords[vertices], int(start), seed)


def dyadic_grid(m_max: int, first: int = 1) -> np.ndarray:
    if m_max < first:
        raise ValueError("m_max below the first grid point")
    return 2 ** np.arange(int(np.log2(first)), int(np.log2(m_max)) + 1)


def rescaled_path(path: WalkPath, n: int, T: float, dt: float) -> RescaledPath:
    """Values n^{-1/4} X_{floor(t n^{3/2})} on the grid t = 0, dt, .., T."""
    if path.positions is None:
        raise ValueError("path has no lattice positions")
    needed = int(np.floor(T * n ** 1.5))
    if path.steps < needed:
        raise PathTooShort(f"need {needed} steps, have {path.steps}")
    times = np.arange(0.0, T + dt / 2, dt)
    idx = np.minimum(np.floor(times * n ** 1.5).astype(np.int64), needed)
    values = (path.positions[idx] - path.positions[0]) / n ** 0.25
    return RescaledPath(times, values)


def walk_observables(graph: Graph, origin: int, times, walkers: int, rng: np.random.Generator):
    """Return indicators and Euclidean displacements of independent walkers
    at the given (sorted) times, as (walkers, len(times)) arrays."""
    times = np.asarray(times, dtype=np.int64)
    coords = _coords(graph)
    if coords is None:
        coords = np.zeros((graph.n, 1))
    steps = int(times.max()) if len(times) else 0
    returned, disp = [], []
    for lo in range(0, walkers, _BATCH):
        u = rng.random((min(_BATCH, walkers - lo), steps))
        r, x = _kernels.walk_observables(graph.indptr, graph.indices, coords, int(origin), steps, u, times)
        returned.append(r)
        disp.append(x)
    return np.concatenate(returned), np.concatenate(disp)


def return_probability_profile(graph: Graph, origin: int, m_max: int, replicas: int,
                               rng: np.random.Generator) -> Profile:
    """Empirical p_{2m}(origin, origin) on the dyadic grid m = 1, 2, 4, ..."""
    if m_max < 2:
        raise ValueError("m_max must be >= 2")
    m = dyadic_grid(m_max)
    returned, _ = walk_observables(graph, origin, 2 * m, replicas, rng)
    p = returned.mean(axis=0)
    return Profile(m, p, np.sqrt(p * (1 - p) / replicas), "return_probability")


def displacement_profile(graph: Graph, origin: int, m_max: int, replicas: int,
                         rng: np.random.Generator) -> Profile:
    """Empirical E|X_m - X_0| on the grid m = 0, 1, 2, 4, ..."""
    if _coords(graph) is None:
        raise ValueError("graph has no lattice coordinates")
    m = np.concatenate(([0], dyadic_grid(m_max)))
    _, disp = walk_observables(graph, origin, m, replicas, rng)
    return Profile(m, disp.mean(axis=0), disp.std(axis=0, ddof=1) / np.sqrt(replicas), "mean_displacement")


def _transition_matrix(graph: Graph) -> np.ndarray:
    if graph.n > EXACT_LIMIT:
        raise TooLarge(f"exact chain limited to {EXACT_LIMIT} vertices")
    p = np.zeros((graph.n, graph.n))
    for v in range(graph.n):
        nbrs = graph.neighbors(v)
        p[v, nbrs] = 1.0 / len(nbrs)
    return p


def exact_distributions(graph: Graph, origin: int, times) -> np.ndarray:
    """Law of X_t for each requested t, by powers of the transition matrix."""
    p = _transition_matrix(graph)
    out = []
    row = np.zeros(graph.n)
    row[origin] = 1.0
    t_now = 0
    for t in sorted(int(t) for t in times):
        while t_now < t:
            row = row @ p
            t_now += 1
        out.append(row.copy())
    return np.array(out)


def exact_return_probabilities(graph: Graph, origin: int, m) -> np.ndarray:
    m = np.asarray(m)
    return exact_distributions(graph, origin, 2 * m)[:, origin]


def exact_displacements(graph: Graph, origin: int, m) -> np.ndarray:
    coords = _coords(graph)
    dist = np.linalg.norm(coords - coords[origin], axis=1)
    return exact_distributions(graph, origin, np.asarray(m)) @ dist


def loglog_slope(x, y, yerr=None, window=None) -> SlopeFit:
    """Weighted least squares of log y on log x.

    Weights are inverse variances of log y (delta method) when ``yerr`` is
    given.  ``window`` = (lo, hi) restricts x.
    """
    x, y = np.asarray(x, float), np.asarray(y, float)
    keep = (x > 0) & (y > 0)
    if window is not None:
        keep &= (x >= window[0]) & (x <= window[1])
    if yerr is not None:
        yerr = np.asarray(yerr, float)
        keep &= yerr > 0
    if keep.sum() < 2:
        raise ValueError("need at least two positive points to fit")
    lx, ly = np.log(x[keep]), np.log(y[keep])
    w = np.ones_like(lx) if yerr is None else (y[keep] / yerr[keep]) ** 2
    design = np.stack((np.ones_like(lx), lx), axis=1)
    a = design.T @ (w[:, None] * design)
    coef = np.linalg.solve(a, design.T @ (w * ly))
    resid = ly - design @ coef
    dof = max(len(lx) - 2, 1)
    scale = (w * resid ** 2).sum() / dof if yerr is None else max(1.0, (w * resid ** 2).sum() / dof)
    cov = np.linalg.inv(a) * scale
    mean = np.average(ly, weights=w)
    ss_tot = (w * (ly - mean) ** 2).sum()
    r2 = 1.0 - (w * resid ** 2).sum() / ss_tot if ss_tot > 0 else 1.0
    return SlopeFit(float(coef[1]), float(np.sqrt(cov[1, 1])), float(coef[0]), float(r2), int(len(lx)))
