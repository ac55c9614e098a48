"""Report types, seeded replica execution and small statistics helpers."""
from __future__ import annotations

import csv
import math
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from functools import partial

import numpy as np
from scipy import stats

SCHEMA_VERSION = 1
Z95 = float(stats.norm.ppf(0.975))


@dataclass
class EstimateReport:
    name: str
    estimate: float
    stderr: float
    ci_low: float
    ci_high: float
    replicas: int
    level: float = 0.95
    truncation: dict = field(default_factory=dict)
    seeds: dict = field(default_factory=dict)
    wall_time: float | None = None

    def __post_init__(self):
        if self.replicas <= 0:
            raise ValueError("replica count must be positive")
        if math.isfinite(self.estimate) and not self.ci_low <= self.estimate <= self.ci_high:
            raise ValueError("confidence interval must contain the estimate")

    @classmethod
    def normal(cls, name, estimate, stderr, replicas, **kw):
        half = Z95 * stderr
        return cls(name, float(estimate), float(stderr), float(estimate - half), float(estimate + half),
                   int(replicas), **kw)

    def to_dict(self, with_time: bool = False) -> dict:
        out = asdict(self)
        if not with_time:
            out.pop("wall_time")
        return out


@dataclass
class ModelConstants:
    """Constants of the scaling limit; derived ones follow from the rest."""

    sigma_z: float
    rho1: float
    sigma_g: float
    nu: float | None = None
    nu_vertex: float | None = None

    @property
    def sigma(self) -> float:
        return 2.0 / self.sigma_z

    @property
    def rho(self) -> float:
        return self.rho1 / self.sigma_g

    @property
    def sigma_d(self) -> float:
        return self.sigma * self.sigma_g

    @property
    def sigma_phi(self) -> float:
        return self.sigma_g ** -0.5

    def to_dict(self) -> dict:
        return {"sigma_z": self.sigma_z, "sigma": self.sigma, "rho1": self.rho1, "rho2": self.sigma_g,
                "sigma_g": self.sigma_g, "rho": self.rho, "nu": self.nu, "nu_vertex": self.nu_vertex,
                "sigma_d": self.sigma_d, "sigma_phi": self.sigma_phi}


@dataclass
class Table:
    """Raw rows written as CSV."""

    name: str
    columns: list
    rows: list

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            out = csv.writer(fh)
            out.writerow(self.columns)
            out.writerows(self.rows)


@dataclass
class PlotData:
    """One figure: columns x, y, yerr, optionally grouped by ``series``."""

    name: str
    title: str
    xlabel: str
    ylabel: str
    x: list
    y: list
    yerr: list
    series: list | None = None
    loglog: bool = False
    fit: dict | None = None


@dataclass
class ExperimentResult:
    experiment: str
    params: dict
    reports: list = field(default_factory=list)
    tables: list = field(default_factory=list)
    plots: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)
    failures: list = field(default_factory=list)
    replicas_attempted: int = 0

    def report(self, name: str) -> EstimateReport:
        for r in self.reports:
            if r.name == name:
                return r
        raise KeyError(name)

    def table(self, name: str) -> Table:
        for t in self.tables:
            if t.name == name:
                return t
        raise KeyError(name)

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "experiment": self.experiment,
            "params": self.params,
            "reports": [r.to_dict() for r in self.reports],
            "summary": self.summary,
            "failures": [{"stage": s, "replica": i, "error": e} for s, i, e in self.failures],
            "replicas_attempted": self.replicas_attempted,
        }


# ---------------------------------------------------------------------------
# seeded replicas

def stream_id(label: str) -> int:
    return zlib.crc32(label.encode())


def replica_rng(seed: int, stream: str, index: int) -> np.random.Generator:
    """Generator for one replica, a pure function of (seed, stream, index)."""
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(stream_id(stream), int(index))))


def _call(task, seed, stream, params, index):
    try:
        return index, task(replica_rng(seed, stream, index), **params), None
    except Exception as exc:  # reported per replica, never fatal
        return index, None, f"{type(exc).__name__}: {exc}"


def run_replicas(task, params: dict, seed: int, stream: str, count: int, workers: int = 1):
    """Run ``task(rng, **params)`` for replicas 0..count-1.

    Returns (values in replica order with None for failures, list of
    (replica, message) failures).  Output does not depend on ``workers``.
    """
    job = partial(_call, task, seed, stream, params)
    if workers <= 1 or count <= 1:
        outcomes = [job(i) for i in range(count)]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(job, range(count), chunksize=max(1, count // (4 * workers))))
    outcomes.sort(key=lambda o: o[0])
    values = [v for _, v, _ in outcomes]
    failures = [(i, e) for i, _, e in outcomes if e is not None]
    return values, failures


# ---------------------------------------------------------------------------
# statistics

def mean_report(name, samples, **kw) -> EstimateReport:
    x = np.asarray(samples, float)
    se = x.std(ddof=1) / np.sqrt(len(x)) if len(x) > 1 else float("nan")
    return EstimateReport.normal(name, x.mean(), se, len(x), **kw)


def ratio_report(name, num, den, **kw) -> EstimateReport:
    """sum(num) / sum(den) with a delta-method standard error over replicas."""
    a, b = np.asarray(num, float), np.asarray(den, float)
    r = a.sum() / b.sum()
    k = len(a)
    se = np.sqrt(k / max(k - 1, 1) * ((a - r * b) ** 2).sum()) / b.sum() if k > 1 else float("nan")
    return EstimateReport.normal(name, r, se, k, **kw)


def proportion_report(name, hits, trials, **kw) -> EstimateReport:
    """Wilson score interval."""
    p = hits / trials
    z = Z95
    centre = (p + z * z / (2 * trials)) / (1 + z * z / trials)
    half = z * np.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials)) / (1 + z * z / trials)
    lo, hi = min(centre - half, p), max(centre + half, p)
    return EstimateReport(name, float(p), float(np.sqrt(p * (1 - p) / trials)), float(lo), float(hi), int(trials), **kw)


def ks_two_sample(x, y, rng: np.random.Generator, resamples: int = 199):
    """KS statistic with a permutation p-value."""
    x, y = np.asarray(x, float), np.asarray(y, float)
    res = stats.permutation_test(
        (x, y), lambda a, b: stats.ks_2samp(a, b).statistic, permutation_type="independent",
        n_resamples=resamples, alternative="greater", random_state=rng)
    return float(res.statistic), float(res.pvalue)


def total_variation(counts_a: dict, counts_b: dict) -> float:
    na, nb = sum(counts_a.values()), sum(counts_b.values())
    keys = set(counts_a) | set(counts_b)
    return 0.5 * sum(abs(counts_a.get(k, 0) / na - counts_b.get(k, 0) / nb) for k in keys)


def quantiles(x, qs=(0.5, 0.9)) -> dict:
    x = np.asarray(x, float)
    return {f"q{int(round(q * 100))}": float(np.quantile(x, q)) for q in qs}
