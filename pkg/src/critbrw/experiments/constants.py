"""Estimators for the constants of the model: resistance and distance
growth along the two-sided backbone, volume growth, pivotal point
statistics and bush intersection probabilities."""
from __future__ import annotations

import numpy as np

from ..cuts import CutStructure
from ..errors import NoPivotalFound
from ..ibic import sample_bush, sample_ibic_window
from ..laws import get_law
from ..resistance import ResistanceEngine
from ..trace import _row_keys, build_trace, cumulative_volumes, embed_tree
from ..trees import sample_gw_size
from ..walk import loglog_slope
from .core import (EstimateReport, ExperimentResult, ModelConstants, PlotData, Table, mean_report,
                   proportion_report, ratio_report, run_replicas)


def bulk_limits(W: int, lo: int, hi: int):
    """Indices kept after discarding W^0.9 at each end of the window."""
    edge = int(np.ceil(W ** 0.9))
    return lo + edge, hi - edge


# ---------------------------------------------------------------------------
# resistance and distance between pivotal points

def _pivotal_increments(rng, law, d, W, bush_depth_cap):
    model = sample_ibic_window(get_law(law), d, W, bush_depth_cap, rng)
    a, b = bulk_limits(W, model.lo, model.hi)
    piv = model.pivotal_indices
    piv = piv[(piv >= a) & (piv <= b)]
    if len(piv) < 2:
        raise NoPivotalFound(f"{len(piv)} pivotal points in the bulk")
    trace = model.trace
    points = trace.tree_to_graph[piv - model.lo]
    cuts = CutStructure(trace)
    engine = ResistanceEngine(trace, cuts)
    dist = trace.distances_from(int(points[0]))[points]
    res = np.array([engine.resistance(int(u), int(v)) for u, v in zip(points[:-1], points[1:])])
    return {
        "gaps": np.diff(piv),
        "resistance": res,
        "distance": np.diff(dist).astype(float),
        "truncated_bushes": int(model.truncated.sum()),
    }


def estimate_rho_constants(law: str = "geometric", d: int = 15, W: int = 1000, bush_depth_cap: int = 100,
                           replicas: int = 100, seed: int = 0, workers: int = 1) -> ExperimentResult:
    """Ratios of resistance and graph distance to backbone index increments
    between consecutive pivotal points of the two-sided backbone model."""
    params = dict(law=law, d=d, W=W, bush_depth_cap=bush_depth_cap)
    values, failures = run_replicas(_pivotal_increments, params, seed, "rho", replicas, workers)
    ok = [v for v in values if v is not None]
    result = ExperimentResult("estimate-rho", dict(params, replicas=replicas, seed=seed),
                              failures=[("rho", i, e) for i, e in failures], replicas_attempted=replicas)
    if len(ok) < 2:
        result.summary["error"] = "fewer than two replicas found pivotal points"
        return result
    r_sum = np.array([v["resistance"].sum() for v in ok])
    d_sum = np.array([v["distance"].sum() for v in ok])
    g_sum = np.array([v["gaps"].sum() for v in ok], float)
    trunc = dict(W=W, bush_depth_cap=bush_depth_cap, edge_discard=int(np.ceil(W ** 0.9)),
                 truncated_bushes=int(sum(v["truncated_bushes"] for v in ok)))
    seeds = dict(master=seed, stream="rho")
    rho1 = ratio_report("rho1", r_sum, g_sum, truncation=trunc, seeds=seeds)
    rho2 = ratio_report("rho2", d_sum, g_sum, truncation=trunc, seeds=seeds)
    rho = ratio_report("rho", r_sum, d_sum, truncation=trunc, seeds=seeds)
    result.reports += [rho1, rho2, rho]
    constants = ModelConstants(get_law(law).sigma_z, rho1.estimate, rho2.estimate)
    result.summary.update(
        constants=constants.to_dict(),
        successful_replicas=len(ok),
        resistance_below_distance=bool(all(np.all(v["resistance"] <= v["distance"] + 1e-9) for v in ok)),
        rho1_below_rho2=bool(np.all(r_sum <= d_sum + 1e-9)),
        pivotal_segments=int(sum(len(v["gaps"]) for v in ok)),
    )
    rows = [(i, int(g), float(r), float(x)) for i, v in enumerate(values) if v is not None
            for g, r, x in zip(v["gaps"], v["resistance"], v["distance"])]
    result.tables.append(Table("pivotal_segments", ["replica", "gap", "resistance", "distance"], rows))
    result.tables.append(Table("replica_sums", ["replica", "resistance", "distance", "gap"],
                               [(i, float(a), float(b), float(c)) for i, a, b, c in
                                zip([i for i, v in enumerate(values) if v is not None], r_sum, d_sum, g_sum)]))
    names = ["rho1", "rho2", "rho"]
    result.plots.append(PlotData("rho_constants", "Backbone ratio constants", "constant", "estimate",
                                 names, [r.estimate for r in (rho1, rho2, rho)],
                                 [r.ci_high - r.estimate for r in (rho1, rho2, rho)]))
    return result


# ---------------------------------------------------------------------------
# volume growth

def _volume_profile(rng, law, d, n, grid):
    tree = sample_gw_size(get_law(law), n, rng)
    spatial = embed_tree(tree, d, rng)
    vertex, edge = cumulative_volumes(spatial)
    idx = np.floor(np.asarray(grid) * n).astype(np.int64)
    return edge[idx] / n, vertex[idx] / n


def _line_fit(x, y):
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss = ((y - y.mean()) ** 2).sum()
    return float(slope), float(intercept), float(1 - (resid ** 2).sum() / ss) if ss > 0 else 1.0


def estimate_nu(law: str = "geometric", d: int = 5, n: int = 20000, replicas: int = 200, seed: int = 0,
                workers: int = 1, points: int = 17) -> ExperimentResult:
    """Slopes of the distinct edge and vertex counts among the first an tree
    vertices (lexicographic order), as functions of a in [0.1, 0.9]."""
    if d < 1 or n < 10:
        raise ValueError("need d >= 1 and n >= 10")
    grid = np.linspace(0.1, 0.9, points)
    params = dict(law=law, d=d, n=n, grid=grid)
    values, failures = run_replicas(_volume_profile, params, seed, "nu", replicas, workers)
    ok = [v for v in values if v is not None]
    edges = np.array([v[0] for v in ok])
    verts = np.array([v[1] for v in ok])
    result = ExperimentResult("estimate-nu", dict(law=law, d=d, n=n, replicas=replicas, points=points, seed=seed),
                              failures=[("nu", i, e) for i, e in failures], replicas_attempted=replicas)
    per_edge = [_line_fit(grid, row) for row in edges]
    per_vertex = [_line_fit(grid, row) for row in verts]
    slopes_e = np.array([p[0] for p in per_edge])
    slopes_v = np.array([p[0] for p in per_vertex])
    trunc = dict(n=n, a_range=[0.1, 0.9])
    seeds = dict(master=seed, stream="nu")
    nu = mean_report("nu", slopes_e, truncation=trunc, seeds=seeds)
    nu_v = mean_report("nu_vertex", slopes_v, truncation=trunc, seeds=seeds)
    result.reports += [nu, nu_v]
    mean_e, mean_v = edges.mean(axis=0), verts.mean(axis=0)
    pooled = _line_fit(grid, mean_e)
    pooled_v = _line_fit(grid, mean_v)
    result.summary.update(
        r2_mean_profile=pooled[2], r2_mean_profile_vertex=pooled_v[2],
        r2_replica_median=float(np.median([p[2] for p in per_edge])),
        r2_replica_min=float(np.min([p[2] for p in per_edge])),
        nu_cv=float(slopes_e.std(ddof=1) / slopes_e.mean()),
        nu_vertex_cv=float(slopes_v.std(ddof=1) / slopes_v.mean()),
        nu_at_most_one=bool(np.all(slopes_e <= 1 + 1e-12) and np.all(slopes_v <= 1 + 1e-12)),
    )
    se_e = edges.std(axis=0, ddof=1) / np.sqrt(len(ok))
    se_v = verts.std(axis=0, ddof=1) / np.sqrt(len(ok))
    result.tables.append(Table("volume_profile", ["a", "edges_over_n", "edges_se", "vertices_over_n", "vertices_se"],
                               [tuple(map(float, r)) for r in zip(grid, mean_e, se_e, mean_v, se_v)]))
    result.tables.append(Table("replica_slopes", ["replica", "nu", "nu_vertex", "r2", "r2_vertex"],
                               [(i, a, b, p[2], q[2]) for i, (a, b, p, q) in
                                enumerate(zip(slopes_e, slopes_v, per_edge, per_vertex))]))
    result.plots.append(PlotData(
        "volume_linearity", "Cumulative volume profile", "a", "volume / n",
        list(grid) * 2, list(mean_e) + list(mean_v), list(se_e) + list(se_v),
        series=["edges"] * points + ["vertices"] * points,
        fit={"slope": pooled[0], "intercept": pooled[1], "r2": pooled[2]}))
    return result


# ---------------------------------------------------------------------------
# pivotal points

def _pivotal_task(rng, law, d, W, bush_depth_cap):
    model = sample_ibic_window(get_law(law), d, W, bush_depth_cap, rng)
    a, b = bulk_limits(W, model.lo, model.hi)
    piv = model.pivotal_indices
    bulk = piv[(piv >= a) & (piv <= b)]
    return {"origin": bool(np.any(piv == 0)), "bulk_fraction": len(bulk) / (b - a + 1), "gaps": np.diff(bulk)}


def survival_fit(gaps, min_count: int = 5):
    """Empirical P[gap >= g] on g = 1, 2, 4, ... and a log-log fit over
    g >= 2 where at least ``min_count`` gaps reach g."""
    gaps = np.asarray(gaps)
    top = max(int(gaps.max()), 1)
    grid = 2 ** np.arange(int(np.log2(top)) + 1)
    counts = np.array([(gaps >= g).sum() for g in grid])
    surv = counts / len(gaps)
    err = np.sqrt(surv * (1 - surv) / len(gaps))
    usable = (grid >= 2) & (counts >= min_count)
    fit = None
    if usable.sum() >= 2:
        fit = loglog_slope(grid[usable], surv[usable], np.where(err[usable] > 0, err[usable], 1.0 / len(gaps)))
    return grid, surv, err, fit


def pivotal_statistics(law: str = "geometric", d: int = 15, W: int = 1000, bush_depth_cap: int = 100,
                       replicas: int = 1000, seed: int = 0, workers: int = 1) -> ExperimentResult:
    params = dict(law=law, d=d, W=W, bush_depth_cap=bush_depth_cap)
    values, failures = run_replicas(_pivotal_task, params, seed, "pivotal", replicas, workers)
    ok = [v for v in values if v is not None]
    result = ExperimentResult("pivotal", dict(params, replicas=replicas, seed=seed),
                              failures=[("pivotal", i, e) for i, e in failures], replicas_attempted=replicas)
    trunc = dict(W=W, bush_depth_cap=bush_depth_cap, edge_discard=int(np.ceil(W ** 0.9)))
    seeds = dict(master=seed, stream="pivotal")
    hits = sum(v["origin"] for v in ok)
    result.reports.append(proportion_report("p_origin_pivotal", hits, len(ok), truncation=trunc, seeds=seeds))
    result.reports.append(mean_report("bulk_pivotal_fraction", [v["bulk_fraction"] for v in ok],
                                      truncation=trunc, seeds=seeds))
    gaps = np.concatenate([v["gaps"] for v in ok])
    grid, surv, err, fit = survival_fit(gaps)
    if fit is not None:
        result.reports.append(EstimateReport.normal("gap_tail_slope", fit.slope, fit.stderr, len(ok),
                                                     truncation=trunc, seeds=seeds))
        result.summary["gap_tail_fit"] = {"slope": fit.slope, "stderr": fit.stderr, "points": fit.points}
    result.summary.update(gap_count=int(len(gaps)), mean_gap=float(gaps.mean()), max_gap=int(gaps.max()))
    result.tables.append(Table("gap_survival", ["gap", "survival", "stderr"],
                               [(int(g), float(s), float(e)) for g, s, e in zip(grid, surv, err)]))
    result.tables.append(Table("gap_counts", ["gap", "count"],
                               [(int(g), int(c)) for g, c in zip(*np.unique(gaps, return_counts=True))]))
    result.plots.append(PlotData("gap_survival", "Pivotal gap tail", "gap", "P[gap >= g]",
                                 list(grid), list(surv), list(err), loglog=True,
                                 fit=None if fit is None else {"slope": fit.slope, "intercept": fit.intercept}))
    return result


# ---------------------------------------------------------------------------
# bush intersections

def _intersection_task(rng, law, d, separations, depth_cap):
    lw = get_law(law)
    hits = []
    for r in separations:
        a, _, ta = sample_bush(lw, d, depth_cap, rng)
        shift = np.zeros(d, np.int32)
        shift[0] = r
        b, _, tb = sample_bush(lw, d, depth_cap, rng, root=shift)
        keys = _row_keys(np.concatenate((a, b)))
        if keys.ndim == 1:
            hit = len(np.intersect1d(keys[:len(a)], keys[len(a):])) > 0
        else:
            set_a = {row.tobytes() for row in keys[:len(a)]}
            hit = any(row.tobytes() in set_a for row in keys[len(a):])
        hits.append((hit, ta or tb))
    return hits


def estimate_intersection_decay(law: str = "geometric", d: int = 8, separations=(2, 4, 8, 16),
                                replicas: int = 1000, bush_depth_cap: int = 400, seed: int = 0,
                                workers: int = 1, cap_sensitivity: bool = True) -> ExperimentResult:
    """Frequency with which independent bushes rooted at 0 and R e_1 meet."""
    separations = [int(r) for r in separations]
    result = ExperimentResult("intersection-decay",
                              dict(law=law, d=d, separations=separations, replicas=replicas,
                                   bush_depth_cap=bush_depth_cap, cap_sensitivity=cap_sensitivity, seed=seed),
                              replicas_attempted=replicas)
    caps = [bush_depth_cap] + ([bush_depth_cap // 2] if cap_sensitivity and bush_depth_cap >= 2 else [])
    curves = {}
    for cap in caps:
        stream = f"intersect-{cap}"
        values, failures = run_replicas(_intersection_task, dict(law=law, d=d, separations=separations,
                                                                 depth_cap=cap), seed, stream, replicas, workers)
        result.failures += [(stream, i, e) for i, e in failures]
        ok = [v for v in values if v is not None]
        hits = np.array([[h for h, _ in v] for v in ok])
        trunc = np.array([[t for _, t in v] for v in ok])
        q = hits.mean(axis=0)
        se = np.sqrt(q * (1 - q) / len(ok))
        curves[cap] = (q, se, trunc.mean(axis=0))
        if cap == bush_depth_cap:
            counts, trials = hits.sum(axis=0), len(ok)
    q, se, tr = curves[bush_depth_cap]
    seeds = dict(master=seed, stream=f"intersect-{bush_depth_cap}")
    for r, hits in zip(separations, counts):
        result.reports.append(proportion_report(f"q_{r}", int(hits), trials,
                                                truncation=dict(bush_depth_cap=bush_depth_cap), seeds=seeds))
    usable = q > 0
    if usable.sum() >= 2:
        fit = loglog_slope(np.array(separations)[usable], q[usable], np.maximum(se[usable], 1e-12))
        result.summary["slope"] = {"slope": fit.slope, "stderr": fit.stderr, "points": fit.points}
    result.summary["nonincreasing_within_ci"] = bool(all(
        q[i + 1] <= q[i] + 1.96 * np.hypot(se[i], se[i + 1]) for i in range(len(q) - 1)))
    if len(caps) > 1:
        result.summary["cap_sensitivity"] = {str(c): [float(x) for x in curves[c][0]] for c in caps}
    rows = [(c, r, float(qq), float(ss), float(tt)) for c in caps
            for r, qq, ss, tt in zip(separations, *curves[c])]
    result.tables.append(Table("intersection", ["depth_cap", "separation", "q", "stderr", "truncated_fraction"], rows))
    result.plots.append(PlotData("intersection_decay", "Bush intersection probability", "separation R", "q(R)",
                                 separations, list(q), list(se), loglog=True, fit=result.summary.get("slope")))
    return result
