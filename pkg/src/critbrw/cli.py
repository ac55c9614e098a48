"""Command-line front end.

Subcommands: ``run``, ``report``, ``list-experiments``, ``validate-config``.
Parameters come from built-in defaults, then the config file, then the
command line, each overriding the previous.  Exit codes: 0 success, 2
configuration error, 3 partial failure (some replicas raised).
"""
from __future__ import annotations

import argparse
import configparser
import hashlib
import inspect
import json
import os
import platform
import re
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ConfigError, MissingManifest
from .experiments import REGISTRY, SCHEMA_VERSION, get_experiment
from .experiments.core import PlotData
from .laws import PRESETS

EXIT_OK, EXIT_CONFIG, EXIT_PARTIAL = 0, 2, 3
OUTPUT_ROOT_ENV = "CRITBRW_OUTPUT_ROOT"
MANIFEST = "manifest.json"
RUN_KEYS = ("experiment", "seed", "workers", "output")
_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


@dataclass
class RunConfig:
    experiment: str
    params: dict = field(default_factory=dict)
    seed: int = 0
    workers: int = 1
    output: str | None = None

    def resolved(self) -> dict:
        """Every parameter of the experiment, defaults filled in."""
        fn = get_experiment(self.experiment).run
        out = {k: p.default for k, p in inspect.signature(fn).parameters.items()
               if k not in ("seed", "workers")}
        out.update(self.params)
        return {k: list(v) if isinstance(v, tuple) else v for k, v in out.items()}

    def config_hash(self) -> str:
        """Digest of everything that determines the results (not workers or output)."""
        blob = json.dumps({"experiment": self.experiment, "params": self.resolved(), "seed": self.seed},
                          sort_keys=True, default=_jsonable)
        return hashlib.sha256(blob.encode()).hexdigest()

    def output_dir(self) -> Path:
        if self.output:
            return Path(self.output)
        root = Path(os.environ.get(OUTPUT_ROOT_ENV, "results"))
        return root / f"{self.experiment}-seed{self.seed}"


# ---------------------------------------------------------------------------
# configuration

def _convert(kind: str, key: str, raw, line=None, path=None):
    text = str(raw).strip()
    try:
        if kind == "int":
            value = int(text)
        elif kind == "float":
            value = float(text)
        elif kind == "float?":
            value = None if text.lower() in ("", "none") else float(text)
        elif kind == "interval?":
            value = None
            if text.lower() not in ("", "none"):
                value = tuple(float(t) for t in re.split(r"[,\s]+", text) if t)
                if len(value) != 2 or value[0] > value[1]:
                    raise ValueError("expected 'low, high' with low <= high")
        elif kind == "ints":
            value = tuple(int(t) for t in re.split(r"[,\s]+", text) if t)
            if not value:
                raise ValueError("empty list")
        elif kind == "bool":
            if text.lower() not in _TRUE | _FALSE:
                raise ValueError(f"not a boolean: {text!r}")
            value = text.lower() in _TRUE
        else:
            value = text
    except ValueError as exc:
        raise ConfigError(f"bad value for {key!r} ({kind}): {exc}", line, path) from None
    numbers = value if isinstance(value, tuple) else (value,)
    if kind != "bool" and any(isinstance(v, (int, float)) and not v > 0 for v in numbers):
        raise ConfigError(f"{key!r} must be positive, got {text!r}", line, path)
    return value


def _option_lines(text: str) -> dict:
    """(section, key) -> 1-based line number, for error messages."""
    lines, section = {}, None
    for i, line in enumerate(text.splitlines(), 1):
        stripped = line.strip()
        if stripped.startswith("[") and stripped.endswith("]"):
            section = stripped[1:-1].strip()
        elif section and stripped and stripped[0] not in "#;" and ("=" in stripped or ":" in stripped):
            key = re.split(r"[=:]", stripped, maxsplit=1)[0].strip()
            lines[(section, key.lower())] = i
    return lines


def read_config(path) -> tuple[dict, dict]:
    """Raw (run options, experiment parameters) from an INI file.

    Sections: ``[run]`` with experiment, seed, workers, output, and
    ``[parameters]`` with experiment parameters.  Values are converted and
    checked later by :func:`build_config`; the returned dicts map keys to
    (value, line).
    """
    path = str(path)
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", path=path) from None
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    try:
        parser.read_string(text, source=path)
    except configparser.DuplicateOptionError as exc:
        raise ConfigError(f"duplicate option {exc.option!r}", exc.lineno, path) from None
    except configparser.DuplicateSectionError as exc:
        raise ConfigError(f"duplicate section {exc.section!r}", exc.lineno, path) from None
    except configparser.MissingSectionHeaderError as exc:
        raise ConfigError("content before the first [section] header", exc.lineno, path) from None
    except configparser.ParsingError as exc:
        lineno, bad = exc.errors[0]
        raise ConfigError(f"cannot parse {bad.strip()}", lineno, path) from None
    lines = _option_lines(text)
    for section in parser.sections():
        if section not in ("run", "parameters"):
            line = next((i for i, s in enumerate(text.splitlines(), 1) if s.strip() == f"[{section}]"), None)
            raise ConfigError(f"unknown section [{section}]; expected [run] and [parameters]", line, path)
    run, params = {}, {}
    for section, target in (("run", run), ("parameters", params)):
        if parser.has_section(section):
            for key, value in parser.items(section):
                target[key] = (value, lines.get((section, key.lower())))
    for key, (_, line) in run.items():
        if key not in RUN_KEYS:
            raise ConfigError(f"unknown [run] option {key!r}; expected one of {', '.join(RUN_KEYS)}", line, path)
    return run, params


def build_config(experiment=None, config_path=None, overrides=None, seed=None, workers=None,
                 output=None) -> RunConfig:
    """Merge defaults, config file and command-line values and validate them."""
    run, params = read_config(config_path) if config_path else ({}, {})
    path = str(config_path) if config_path else None
    name = experiment or (run["experiment"][0].strip() if "experiment" in run else None)
    if not name:
        raise ConfigError("no experiment given (positional argument or [run] experiment)", path=path)
    if name not in REGISTRY:
        raise ConfigError(f"unknown experiment {name!r}; available: {', '.join(REGISTRY)}",
                          run.get("experiment", (None, None))[1], path)
    kinds = REGISTRY[name].parameters
    merged = {}
    for key, (value, line) in params.items():
        if key not in kinds:
            raise ConfigError(f"{name} has no parameter {key!r}; known: {', '.join(kinds)}", line, path)
        merged[key] = _convert(kinds[key], key, value, line, path)
    for key, value in (overrides or {}).items():
        if key not in kinds:
            raise ConfigError(f"{name} has no parameter {key!r}; known: {', '.join(kinds)}")
        merged[key] = _convert(kinds[key], key, value)
    if "law" in merged and merged["law"] not in PRESETS:
        raise ConfigError(f"unknown law {merged['law']!r}; choose from {', '.join(sorted(PRESETS))}",
                          params.get("law", (None, None))[1], path)

    def pick(key, given, kind):
        if given is not None:
            return _convert(kind, key, given)
        if key in run:
            return _convert(kind, key, run[key][0], run[key][1], path)
        return None

    cfg_seed = pick("seed", seed, "str")
    try:
        seed_value = int(cfg_seed) if cfg_seed is not None else 0
        if seed_value < 0:
            raise ValueError
    except ValueError:
        raise ConfigError(f"seed must be a nonnegative integer, got {cfg_seed!r}",
                          run.get("seed", (None, None))[1], path) from None
    n_workers = pick("workers", workers, "int") or 1
    out = pick("output", output, "str")
    return RunConfig(name, merged, seed_value, n_workers, out)


# ---------------------------------------------------------------------------
# outputs

def _jsonable(value):
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, tuple):
        return list(value)
    raise TypeError(f"cannot serialise {type(value).__name__}")


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, default=_jsonable) + "\n"


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _versions() -> dict:
    import numba
    import scipy
    return {"python": platform.python_version(), "numpy": np.__version__, "scipy": scipy.__version__,
            "numba": numba.__version__, "critbrw": __version__}


def _plot_dict(plot: PlotData) -> dict:
    return {"name": plot.name, "title": plot.title, "xlabel": plot.xlabel, "ylabel": plot.ylabel,
            "x": list(plot.x), "y": list(plot.y), "yerr": list(plot.yerr), "series": plot.series,
            "loglog": plot.loglog, "fit": plot.fit}


def execute(config: RunConfig) -> tuple[int, Path]:
    """Run one experiment and write its artifacts; returns (exit code, dir)."""
    entry = get_experiment(config.experiment)
    outdir = config.output_dir()
    outdir.mkdir(parents=True, exist_ok=True)
    start = time.perf_counter()
    result = entry.run(**config.params, seed=config.seed, workers=config.workers)
    wall = time.perf_counter() - start

    files = []
    report = result.to_dict()
    report["config_hash"] = config.config_hash()
    report["plots"] = [_plot_dict(p) for p in result.plots]
    (outdir / "report.json").write_text(_dump(report))
    files.append("report.json")
    for table in result.tables:
        name = f"{table.name}.csv"
        table.write_csv(outdir / name)
        files.append(name)
    (outdir / "config.ini").write_text(render_config(config))
    files.append("config.ini")

    partial = bool(result.failures) or "error" in result.summary
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "experiment": config.experiment,
        "config_hash": config.config_hash(),
        "seed": config.seed,
        "workers": config.workers,
        "versions": _versions(),
        "wall_time_seconds": round(wall, 3),
        "status": "partial" if partial else "ok",
        "failures": len(result.failures),
        "replicas_attempted": result.replicas_attempted,
        "files": {name: _sha256(outdir / name) for name in files},
    }
    (outdir / MANIFEST).write_text(_dump(manifest))
    return (EXIT_PARTIAL if partial else EXIT_OK), outdir


def render_config(config: RunConfig) -> str:
    lines = ["[run]", f"experiment = {config.experiment}", f"seed = {config.seed}", "", "[parameters]"]
    for key, value in config.resolved().items():
        if isinstance(value, (list, tuple)):
            value = ", ".join(str(v) for v in value)
        lines.append(f"{key} = {'none' if value is None else value}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# report

def load_manifest(directory) -> dict:
    path = Path(directory) / MANIFEST
    if not path.is_file():
        raise MissingManifest(f"no {MANIFEST} in {directory}")
    return json.loads(path.read_text())


def _format(value) -> str:
    if isinstance(value, float):
        return f"{value:.6g}"
    if isinstance(value, (dict, list)):
        return json.dumps(value, default=_jsonable)
    return str(value)


def _table_text(rows: list, columns: list) -> str:
    cells = [[_format(r.get(c, "")) for c in columns] for r in rows]
    widths = [max(len(c), *(len(row[i]) for row in cells)) for i, c in enumerate(columns)]
    out = ["  ".join(c.ljust(w) for c, w in zip(columns, widths))]
    out += ["  ".join(v.ljust(w) for v, w in zip(row, widths)) for row in cells]
    return "\n".join(out)


def summary_text(report: dict, manifest: dict) -> str:
    parts = [f"experiment: {report['experiment']}  status: {manifest['status']}  "
             f"failures: {manifest['failures']}  seed: {manifest['seed']}"]
    if report["reports"]:
        parts.append(_table_text(report["reports"], ["name", "estimate", "stderr", "ci_low", "ci_high", "replicas"]))
    for key, value in report["summary"].items():
        if isinstance(value, list) and value and all(isinstance(v, dict) for v in value):
            columns = [c for c in value[0] if not isinstance(value[0][c], (dict, list))]
            columns.sort(key=lambda c: c not in ("n", "K"))
            parts.append(f"{key}:\n" + _table_text(value, columns))
        else:
            parts.append(f"{key}: {_format(value)}")
    return "\n\n".join(parts) + "\n"


def write_plot_data(plot: dict, path: Path) -> None:
    """Whitespace-separated columns x, y, yerr (and series when present),
    preceded by ``#`` header lines describing the figure."""
    header = [f"# title: {plot['title']}", f"# xlabel: {plot['xlabel']}", f"# ylabel: {plot['ylabel']}",
              f"# loglog: {str(plot['loglog']).lower()}"]
    if plot.get("fit"):
        header.append(f"# fit: {json.dumps(plot['fit'], sort_keys=True)}")
    columns = ["x", "y", "yerr"] + (["series"] if plot.get("series") else [])
    header.append("# " + " ".join(columns))
    rows = []
    for i, (x, y, e) in enumerate(zip(plot["x"], plot["y"], plot["yerr"])):
        row = [_format(x).replace(" ", "_"), repr(float(y)), repr(float(e))]
        if plot.get("series"):
            row.append(str(plot["series"][i]).replace(" ", "_"))
        rows.append(" ".join(row))
    path.write_text("\n".join(header + rows) + "\n")


def render_figure(plot: dict, path: Path) -> None:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(5.5, 4.0))
    x = plot["x"]
    categorical = any(isinstance(v, str) for v in x)
    labels = plot.get("series") or [None] * len(x)
    for label in dict.fromkeys(labels):
        idx = [i for i, s in enumerate(labels) if s == label]
        xs = [i if categorical else x[i] for i in idx]
        ax.errorbar(xs, [plot["y"][i] for i in idx], yerr=[plot["yerr"][i] for i in idx],
                    fmt="o-" if not categorical else "o", capsize=3, label=label)
    if categorical:
        ax.set_xticks(range(len(x)), [str(v) for v in x])
    fit = plot.get("fit")
    if fit and "slope" in fit and not categorical:
        lo, hi = fit.get("window", [min(x), max(x)])
        grid = np.geomspace(lo, hi, 50)
        ax.plot(grid, np.exp(fit["intercept"]) * grid ** fit["slope"], "k--", lw=1,
                label=f"slope {fit['slope']:.3f}")
    if plot["loglog"]:
        ax.set_xscale("log")
        ax.set_yscale("log")
    ax.set_xlabel(plot["xlabel"])
    ax.set_ylabel(plot["ylabel"])
    ax.set_title(plot["title"])
    if ax.get_legend_handles_labels()[0]:
        ax.legend(frameon=False)
    fig.tight_layout()
    fig.savefig(path, dpi=120, metadata={"Software": None})
    plt.close(fig)


def build_report(directory, figures: bool = True) -> str:
    """Summary text plus plot-data files (and PNGs) under ``directory``.

    The new files are added to the manifest with their checksums.
    """
    directory = Path(directory)
    manifest = load_manifest(directory)
    report = json.loads((directory / "report.json").read_text())
    text = summary_text(report, manifest)
    written = {"summary.txt": text}
    (directory / "summary.txt").write_text(text)
    plots_dir = directory / "plots"
    if report.get("plots"):
        plots_dir.mkdir(exist_ok=True)
    for plot in report.get("plots", []):
        data = plots_dir / f"{plot['name']}.dat"
        write_plot_data(plot, data)
        written[f"plots/{plot['name']}.dat"] = None
        if figures:
            render_figure(plot, plots_dir / f"{plot['name']}.png")
            written[f"plots/{plot['name']}.png"] = None
    files = dict(manifest["files"])
    files.update({name: _sha256(directory / name) for name in written})
    manifest["files"] = files
    (directory / MANIFEST).write_text(_dump(manifest))
    return text


# ---------------------------------------------------------------------------
# entry point

def _all_parameter_keys() -> list:
    keys = []
    for entry in REGISTRY.values():
        keys += [k for k in entry.parameters if k not in keys]
    return keys


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="critbrw", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment and write its artifacts")
    run.add_argument("experiment", nargs="?", help="registry name (or [run] experiment in the config)")
    run.add_argument("--config", help="INI file with [run] and [parameters] sections")
    run.add_argument("--seed", help="master seed")
    run.add_argument("--workers", help="worker processes (results do not depend on it)")
    run.add_argument("--output", help=f"output directory (default ${OUTPUT_ROOT_ENV}/<experiment>-seed<seed>)")
    run.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override a parameter")
    run.add_argument("--report", action="store_true", help="also build the report")
    for key in _all_parameter_keys():
        flags = {f"--{key}", f"--{key.replace('_', '-')}"}
        run.add_argument(*sorted(flags), dest=f"param_{key}", metavar="VALUE", help=argparse.SUPPRESS)

    check = sub.add_parser("validate-config", help="check a config file and print the resolved parameters")
    check.add_argument("config")
    check.add_argument("experiment", nargs="?")

    rep = sub.add_parser("report", help="summarise a run directory and write plot data")
    rep.add_argument("directory")
    rep.add_argument("--no-figures", action="store_true", help="skip PNG rendering")

    sub.add_parser("list-experiments", help="show registered experiments and their parameters")
    return parser


def _overrides(args) -> dict:
    out = {}
    for item in args.set:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        key, value = item.split("=", 1)
        out[key.strip()] = value.strip()
    for name, value in vars(args).items():
        if name.startswith("param_") and value is not None:
            out[name[len("param_"):]] = value
    return out


def list_experiments() -> str:
    lines = []
    for entry in REGISTRY.values():
        sig = inspect.signature(entry.run).parameters
        params = ", ".join(f"{k}={sig[k].default!r}" for k in entry.parameters)
        lines.append(f"{entry.name}: {entry.description}\n    {params}")
    return "\n".join(lines)


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.command == "list-experiments":
            print(list_experiments())
            return EXIT_OK
        if args.command == "validate-config":
            config = build_config(args.experiment, args.config)
            print(render_config(config), end="")
            return EXIT_OK
        if args.command == "report":
            print(build_report(args.directory, figures=not args.no_figures), end="")
            return EXIT_OK
        config = build_config(args.experiment, args.config, _overrides(args), args.seed, args.workers, args.output)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        if "unknown experiment" in str(exc):
            print(list_experiments(), file=sys.stderr)
        return EXIT_CONFIG
    except MissingManifest as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    code, outdir = execute(config)
    if args.report:
        print(build_report(outdir), end="")
    print(f"wrote {outdir}" + (" (some replicas failed)" if code == EXIT_PARTIAL else ""))
    return code


if __name__ == "__main__":
    sys.exit(main())
