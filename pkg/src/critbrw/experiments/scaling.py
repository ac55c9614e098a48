"""Space-time scaling of the simple random walk on the trace, started at
the image of the tree root."""
from __future__ import annotations

import numpy as np

from ..laws import get_law
from ..trace import build_trace, embed_tree
from ..trees import sample_gw_size
from ..walk import dyadic_grid, loglog_slope, walk_observables
from .core import EstimateReport, ExperimentResult, PlotData, Table, run_replicas

RETURN_TARGET = -2 / 3
DISPLACEMENT_TARGET = 1 / 6


def _walk_task(rng, law, d, n, walkers, m_return, m_disp):
    trace = build_trace(embed_tree(sample_gw_size(get_law(law), n, rng), d, rng))
    times = np.unique(np.concatenate(([0], m_disp, 2 * m_return)))
    returned, disp = walk_observables(trace, 0, times, walkers, rng)
    return {
        "return": returned[:, np.searchsorted(times, 2 * m_return)].mean(axis=0),
        "displacement": disp[:, np.searchsorted(times, m_disp)].mean(axis=0),
    }


def _slope_report(name, fit, graphs, window, seed):
    return EstimateReport.normal(name, fit.slope, fit.stderr, graphs,
                                 truncation={"window": list(window)}, seeds={"master": seed, "stream": "scaling"})


def scaling_exponents(law: str = "geometric", d: int = 15, n: int = 100_000, graphs: int = 100,
                      walkers: int = 1000, steps: int = 10_000, return_window=(8, 4096),
                      displacement_window=(8, 8192), seed: int = 0, workers: int = 1) -> ExperimentResult:
    """Log-log slopes of the annealed return probability p_2m(0, 0) and of
    the mean displacement E|X_m| on dyadic grids.

    Each graph contributes the mean over its walkers; standard errors come
    from the spread across graphs.
    """
    m_ret = dyadic_grid(steps // 2)
    m_disp = dyadic_grid(steps)
    params = dict(law=law, d=d, n=n, walkers=walkers, m_return=m_ret, m_disp=m_disp)
    values, failures = run_replicas(_walk_task, params, seed, "scaling", graphs, workers)
    ok = [v for v in values if v is not None]
    result = ExperimentResult(
        "scaling-exponents",
        dict(law=law, d=d, n=n, graphs=graphs, walkers=walkers, steps=steps,
             return_window=list(return_window), displacement_window=list(displacement_window), seed=seed),
        failures=[("walk", i, e) for i, e in failures], replicas_attempted=graphs)
    if len(ok) < 2:
        result.summary["error"] = "fewer than two graphs completed"
        return result
    ret = np.array([v["return"] for v in ok])
    disp = np.array([v["displacement"] for v in ok])
    k = len(ok)
    p_mean, p_se = ret.mean(0), ret.std(0, ddof=1) / np.sqrt(k)
    x_mean, x_se = disp.mean(0), disp.std(0, ddof=1) / np.sqrt(k)
    ret_fit = loglog_slope(m_ret, p_mean, p_se, return_window)
    disp_fit = loglog_slope(m_disp, x_mean, x_se, displacement_window)
    result.reports += [_slope_report("return_slope", ret_fit, k, return_window, seed),
                       _slope_report("displacement_slope", disp_fit, k, displacement_window, seed)]
    result.summary.update(
        return_slope={"slope": ret_fit.slope, "stderr": ret_fit.stderr, "r2": ret_fit.r2,
                      "points": ret_fit.points, "target": RETURN_TARGET},
        displacement_slope={"slope": disp_fit.slope, "stderr": disp_fit.stderr, "r2": disp_fit.r2,
                            "points": disp_fit.points, "target": DISPLACEMENT_TARGET},
        successful_graphs=k,
    )
    result.tables.append(Table("return_profile", ["m", "return_probability", "stderr"],
                               [(int(t), float(a), float(b)) for t, a, b in zip(m_ret, p_mean, p_se)]))
    result.tables.append(Table("displacement_profile", ["m", "mean_displacement", "stderr"],
                               [(int(t), float(a), float(b)) for t, a, b in zip(m_disp, x_mean, x_se)]))
    result.plots.append(PlotData("return_probability", "Return probability", "m", "p_2m(0,0)",
                                 m_ret.tolist(), p_mean.tolist(), p_se.tolist(), loglog=True,
                                 fit={"slope": ret_fit.slope, "intercept": ret_fit.intercept,
                                      "window": list(return_window)}))
    result.plots.append(PlotData("mean_displacement", "Mean displacement", "m", "E|X_m - X_0|",
                                 m_disp.tolist(), x_mean.tolist(), x_se.tolist(), loglog=True,
                                 fit={"slope": disp_fit.slope, "intercept": disp_fit.intercept,
                                      "window": list(displacement_window)}))
    return result
