"""Statistical checks of the resistance, volume, geometry and thinness
hypotheses on size-conditioned branching random walk traces."""
from __future__ import annotations

from collections import Counter

import numpy as np
from scipy import stats

from ..continuum import reduced_continuum_tree, sample_excursion
from ..cuts import CutStructure
from ..errors import DegenerateSample, NoCutPoints
from ..laws import get_law
from ..resistance import ResistanceEngine
from ..skeleton import build_GK, reduced_tree, sausage_stats, skeletonize, volume_discrepancy
from ..trace import build_trace, cumulative_volumes, embed_tree
from ..trees import sample_gw_size
from .core import (EstimateReport, ExperimentResult, PlotData, Table, ks_two_sample, mean_report,
                   proportion_report, quantiles, replica_rng, run_replicas, total_variation)

MAX_RESAMPLES = 50


def sample_marked_trace(law, d: int, n: int, K: int, rng):
    """Trace of a size-n tree with K marked points, each the cut-point
    projection of the image of a uniform tree vertex.

    Resamples the whole configuration when the trace has no cut-points or a
    marked point lands on the origin.  Returns (spatial, trace, cuts,
    marked, resamples).
    """
    for attempt in range(MAX_RESAMPLES):
        tree = sample_gw_size(law, n, rng)
        spatial = embed_tree(tree, d, rng)
        trace = build_trace(spatial)
        cuts = CutStructure(trace)
        picks = rng.integers(n, size=K)
        try:
            marked = cuts.project(trace.tree_to_graph[picks])
        except NoCutPoints:
            continue
        if np.any(marked == trace.origin):
            continue
        return spatial, trace, cuts, marked, attempt
    raise NoCutPoints(f"no usable configuration after {MAX_RESAMPLES} attempts")


# ---------------------------------------------------------------------------
# (R): resistance against graph distance

def _ratio_task(rng, law, d, n):
    _, trace, cuts, marked, resamples = sample_marked_trace(get_law(law), d, n, 1, rng)
    x = int(marked[0])
    r = ResistanceEngine(trace, cuts).resistance(trace.origin, x)
    dist = int(trace.distances_from(trace.origin)[x])
    return {"ratio": r / dist, "resistance": r, "distance": dist, "resamples": resamples}


def check_condition_R(law: str = "geometric", d: int = 15, sizes=(2000, 8000, 32000), replicas: int = 400,
                      seed: int = 0, workers: int = 1, rho=None) -> ExperimentResult:
    """Ratio of effective resistance to graph distance between the origin
    and the projection of a uniform point, across tree sizes."""
    sizes = [int(n) for n in sizes]
    result = ExperimentResult("condition-R", dict(law=law, d=d, sizes=sizes, replicas=replicas, rho=rho, seed=seed),
                              replicas_attempted=replicas * len(sizes))
    means, errs, cvs = [], [], []
    for n in sizes:
        stream = f"ratio-{n}"
        values, failures = run_replicas(_ratio_task, dict(law=law, d=d, n=n), seed, stream, replicas, workers)
        result.failures += [(stream, i, e) for i, e in failures]
        ok = [(i, v) for i, v in enumerate(values) if v is not None]
        ratios = np.array([v["ratio"] for _, v in ok])
        rep = mean_report(f"ratio_mean_n{n}", ratios, truncation=dict(n=n), seeds=dict(master=seed, stream=stream))
        result.reports.append(rep)
        cv = float(ratios.std(ddof=1) / ratios.mean())
        means.append(rep.estimate)
        errs.append(rep.stderr)
        cvs.append(cv)
        result.tables.append(Table(f"ratios_n{n}", ["replica", "ratio", "resistance", "distance", "resamples"],
                                   [(i, v["ratio"], v["resistance"], v["distance"], v["resamples"]) for i, v in ok]))
        result.summary.setdefault("per_size", []).append(
            dict(n=n, mean=rep.estimate, ci=[rep.ci_low, rep.ci_high], std=float(ratios.std(ddof=1)), cv=cv,
                 max_ratio=float(ratios.max()), replicas=len(ok)))
    result.summary["cv_strictly_decreasing"] = bool(all(b < a for a, b in zip(cvs, cvs[1:])))
    result.summary["all_ratios_at_most_one"] = bool(all(s["max_ratio"] <= 1 + 1e-9 for s in result.summary["per_size"]))
    if rho is not None:
        lo, hi = rho
        last = result.reports[-1]
        result.summary["overlaps_rho_ci"] = bool(last.ci_low <= hi and lo <= last.ci_high)
    result.tables.append(Table("ratio_summary", ["n", "mean_ratio", "cv"], list(zip(sizes, means, cvs))))
    result.plots.append(PlotData("ratio_concentration", "Resistance / distance", "n", "mean ratio",
                                 sizes, means, [1.96 * e for e in errs]))
    result.plots.append(PlotData("ratio_cv", "Ratio coefficient of variation", "n", "CV", sizes, cvs,
                                 [0.0] * len(sizes), loglog=True))
    return result


# ---------------------------------------------------------------------------
# skeleton based checks

def _skeleton_task(rng, law, d, n, K, with_stats=True, with_shape=False):
    spatial, trace, cuts, marked, resamples = sample_marked_trace(get_law(law), d, n, K, rng)
    gk = build_GK(trace, cuts, marked)
    out = {"thin": bool(gk.thin), "max_clique": int(gk.max_clique), "resamples": resamples,
           "edges_over_n": trace.n_edges / n}
    if not gk.thin:
        return out
    sk = skeletonize(trace, cuts, gk, volume_scale=n, with_resistance=False)
    out["skeleton"] = {"length": sk.length, "parent": sk.parent, "mass": sk.mass}
    root_dist = sk.root_distance()
    out["root_to_first"] = float(root_dist[sk.node_of(int(marked[0]))])
    out["first_position"] = trace.coords[marked[0]].astype(float)
    if with_stats:
        ss = sausage_stats(sk)
        out["diam_lattice"] = ss.diameter_lattice
        out["diam_intrinsic"] = ss.diameter_intrinsic
    if with_shape:
        out["shape"] = reduced_tree(sk).shape_code
    return out


def _discrepancy(skel, nu):
    return volume_discrepancy(skel["length"], skel["parent"], skel["mass"], nu)


def _edge_slope(rng, law, d, n):
    grid = np.linspace(0.1, 0.9, 9)
    spatial = embed_tree(sample_gw_size(get_law(law), n, rng), d, rng)
    _, edge = cumulative_volumes(spatial)
    return float(np.polyfit(grid, edge[np.floor(grid * n).astype(int)] / n, 1)[0])


def _nu_from_volume(law, d, n, replicas, seed, workers):
    """Edge volume constant from the slope of the cumulative edge profile."""
    slopes, _ = run_replicas(_edge_slope, dict(law=law, d=d, n=n), seed, f"nu-{n}", replicas, workers)
    return float(np.mean([s for s in slopes if s is not None]))


def check_condition_V(law: str = "geometric", d: int = 15, sizes=(4000, 32000), K: int = 10, replicas: int = 200,
                      seed: int = 0, workers: int = 1, nu=None, nu_replicas: int = 50) -> ExperimentResult:
    """Sup over skeleton vertices of |nu * length fraction below - mass below|."""
    sizes = [int(n) for n in sizes]
    if nu is None:
        nu = _nu_from_volume(law, d, max(sizes), nu_replicas, seed, workers)
    result = ExperimentResult("condition-V", dict(law=law, d=d, sizes=sizes, K=K, replicas=replicas, seed=seed,
                                                   nu=nu, nu_replicas=nu_replicas), replicas_attempted=replicas * len(sizes))
    medians = []
    for n in sizes:
        stream = f"skeleton-{n}-{K}"
        values, failures = run_replicas(_skeleton_task, dict(law=law, d=d, n=n, K=K, with_stats=False),
                                        seed, stream, replicas, workers)
        result.failures += [(stream, i, e) for i, e in failures]
        rows = [(i, _discrepancy(v["skeleton"], nu)) for i, v in enumerate(values) if v is not None and "skeleton" in v]
        stat = np.array([s for _, s in rows])
        med = float(np.median(stat))
        medians.append(med)
        boot = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(n, K)))
        meds = np.median(boot.choice(stat, size=(500, len(stat))), axis=1)
        lo, hi = np.quantile(meds, [0.025, 0.975])
        result.reports.append(EstimateReport(f"median_discrepancy_n{n}", med, float(meds.std(ddof=1)),
                                             float(min(lo, med)), float(max(hi, med)), len(stat),
                                             truncation=dict(n=n, K=K), seeds=dict(master=seed, stream=stream)))
        result.summary.setdefault("per_size", []).append(dict(n=n, median=med, thin_used=len(stat), **quantiles(stat)))
        result.tables.append(Table(f"discrepancy_n{n}", ["replica", "discrepancy"], rows))
    result.summary["nu"] = nu
    result.summary["median_decreasing"] = bool(all(b < a for a, b in zip(medians, medians[1:])))
    result.plots.append(PlotData("condition_v", "Volume discrepancy", "n", "median sup discrepancy",
                                 sizes, medians, [r.ci_high - r.estimate for r in result.reports]))
    return result


def check_thinness(law: str = "geometric", d: int = 15, sizes=(4000, 32000), Ks=(1, 3, 10), replicas: int = 200,
                   seed: int = 0, workers: int = 1) -> ExperimentResult:
    """Thinness rates and sausage diameters per (n, K)."""
    sizes, Ks = [int(n) for n in sizes], [int(k) for k in Ks]
    result = ExperimentResult("thinness", dict(law=law, d=d, sizes=sizes, Ks=Ks, replicas=replicas, seed=seed),
                              replicas_attempted=replicas * len(sizes) * len(Ks))
    rows, xs, ys, es, series = [], [], [], [], []
    for n in sizes:
        for K in Ks:
            stream = f"skeleton-{n}-{K}"
            values, failures = run_replicas(_skeleton_task, dict(law=law, d=d, n=n, K=K), seed, stream,
                                            replicas, workers)
            result.failures += [(stream, i, e) for i, e in failures]
            ok = [v for v in values if v is not None]
            thin = sum(v["thin"] for v in ok)
            rep = proportion_report(f"p_thin_n{n}_K{K}", thin, len(ok), truncation=dict(n=n, K=K),
                                    seeds=dict(master=seed, stream=stream))
            result.reports.append(rep)
            lat = np.array([v["diam_lattice"] for v in ok if v["thin"]]) / n ** 0.25
            intr = np.array([v["diam_intrinsic"] for v in ok if v["thin"]]) / n ** 0.5
            entry = dict(n=n, K=K, p_thin=rep.estimate, ci=[rep.ci_low, rep.ci_high],
                         lattice=quantiles(lat), intrinsic=quantiles(intr))
            result.summary.setdefault("cells", []).append(entry)
            rows.append((n, K, rep.estimate, rep.ci_low, rep.ci_high, *entry["lattice"].values(),
                         *entry["intrinsic"].values()))
            xs.append(K)
            ys.append(entry["lattice"]["q50"])
            es.append(0.0)
            series.append(f"n={n}")
    cells = result.summary["cells"]
    by_n = {n: [c for c in cells if c["n"] == n] for n in sizes}
    result.summary["quantiles_decrease_in_K"] = {
        str(n): bool(all(b["lattice"]["q50"] <= a["lattice"]["q50"] and b["intrinsic"]["q50"] <= a["intrinsic"]["q50"]
                         for a, b in zip(c, c[1:]))) for n, c in by_n.items()}
    result.tables.append(Table("thinness", ["n", "K", "p_thin", "ci_low", "ci_high", "lattice_q50", "lattice_q90",
                                            "intrinsic_q50", "intrinsic_q90"], rows))
    result.plots.append(PlotData("sausage_diameter", "Largest sausage lattice diameter", "K",
                                 "median n^-1/4 diameter", xs, ys, es, series=series))
    return result


# ---------------------------------------------------------------------------
# (G): comparison with the continuum

def _continuum_task(rng, K, mesh):
    for _ in range(MAX_RESAMPLES):
        g = sample_excursion(mesh, rng)
        times = rng.random(K)
        try:
            tree = reduced_continuum_tree(g, times)
        except DegenerateSample:
            continue
        return {"height": float(g(times[0])), "shape": tree.shape_code}
    raise DegenerateSample("continuum sample kept degenerating")


def check_condition_G(law: str = "geometric", d: int = 15, sizes=(8000, 32000), K: int = 3, replicas: int = 1000,
                      seed: int = 0, workers: int = 1, sigma_g=None, mesh: int = 4096,
                      rho_replicas: int = 50) -> ExperimentResult:
    """Two-sample comparisons of rescaled skeleton statistics with their
    continuum counterparts."""
    from .constants import estimate_rho_constants

    sizes = [int(n) for n in sizes]
    lw = get_law(law)
    if sigma_g is None:
        sigma_g = estimate_rho_constants(law, d, replicas=rho_replicas, seed=seed, workers=workers).report("rho2").estimate
    sigma_d = lw.sigma * sigma_g
    sigma_phi = sigma_g ** -0.5
    result = ExperimentResult("condition-G", dict(law=law, d=d, sizes=sizes, K=K, replicas=replicas, seed=seed,
                                                   sigma_g=sigma_g, mesh=mesh, rho_replicas=rho_replicas),
                              replicas_attempted=replicas * (len(sizes) + 1))
    values, failures = run_replicas(_continuum_task, dict(K=K, mesh=mesh), seed, f"continuum-{K}", replicas, workers)
    result.failures += [(f"continuum-{K}", i, e) for i, e in failures]
    cont = [v for v in values if v is not None]
    cont_dist = sigma_d * np.array([v["height"] for v in cont])
    cont_shapes = Counter(v["shape"] for v in cont)
    # |phi| is sqrt(height) times a standard Gaussian norm; unit lattice
    # steps have covariance Id/d, hence the 1/d
    chi_rng = replica_rng(seed, f"continuum-radius-{K}", 0)
    radius = np.sqrt(stats.chi2.rvs(d, size=len(cont), random_state=chi_rng) / d)
    cont_disp = sigma_phi * np.sqrt(cont_dist) * radius
    ks_rng = replica_rng(seed, "ks", 0)
    per_size, ks_stats, tvs = [], [], []
    for n in sizes:
        stream = f"skeleton-{n}-{K}"
        values, failures = run_replicas(_skeleton_task, dict(law=law, d=d, n=n, K=K, with_stats=False,
                                                             with_shape=True), seed, stream, replicas, workers)
        result.failures += [(stream, i, e) for i, e in failures]
        ok = [v for v in values if v is not None and "skeleton" in v]
        disc = np.array([v["root_to_first"] for v in ok]) / np.sqrt(n)
        disp = np.array([np.linalg.norm(v["first_position"]) for v in ok]) / n ** 0.25
        shapes = Counter(v["shape"] for v in ok)
        ks_d, p_d = ks_two_sample(disc, cont_dist, ks_rng)
        ks_x, p_x = ks_two_sample(disp, cont_disp, ks_rng)
        ks_exact = float(stats.kstest(disc / sigma_d, lambda x: 1 - np.exp(-2 * np.maximum(x, 0) ** 2)).statistic)
        tv = total_variation(shapes, cont_shapes)
        ks_stats.append(ks_d)
        tvs.append(tv)
        entry = dict(n=n, ks_distance=ks_d, p_distance=p_d, ks_distance_exact_law=ks_exact, ks_embedding=ks_x,
                     p_embedding=p_x, shape_tv=tv, replicas=len(ok),
                     shape_counts=dict(sorted(shapes.items())))
        per_size.append(entry)
        result.reports.append(EstimateReport.normal(f"ks_distance_n{n}", ks_d, 0.0, len(ok), truncation=dict(n=n, K=K),
                                                    seeds=dict(master=seed, stream=stream)))
        result.tables.append(Table(f"skeleton_n{n}", ["replica", "root_to_first_scaled", "displacement_scaled", "shape"],
                                   [(i, float(a), float(b), v["shape"]) for i, (a, b, v) in enumerate(zip(disc, disp, ok))]))
    result.summary.update(per_size=per_size, continuum_shape_counts=dict(sorted(cont_shapes.items())),
                          sigma_d=sigma_d, sigma_phi=sigma_phi,
                          ks_decreasing=bool(all(b < a for a, b in zip(ks_stats, ks_stats[1:]))),
                          shape_tv_last=tvs[-1])
    result.tables.append(Table("continuum", ["replica", "distance_scaled", "displacement_scaled", "shape"],
                               [(i, float(a), float(b), v["shape"]) for i, (a, b, v) in
                                enumerate(zip(cont_dist, cont_disp, cont))]))
    result.plots.append(PlotData("ks_distance", "KS distance to continuum", "n", "KS statistic", sizes, ks_stats,
                                 [0.0] * len(sizes), series=["root-to-V1 distance"] * len(sizes)))
    result.plots.append(PlotData("shape_tv", "Reduced shape total variation", "n", "TV", sizes, tvs, [0.0] * len(sizes)))
    return result
