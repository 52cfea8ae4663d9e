"""Command-line entry point: ``icsfree <command> [options]``.

Commands
--------
smooth      MPL-smooth raw samples (long CSV ``unit_id,value``) into densities.
ics         Solve ICS and write the solution, scores and spectrum.
outlier     ICS outlier detection with plot-ready CSVs and figures.
sweep       Repeat detection over a grid of smoothing parameters.
benchmark   ROC/AUC benchmark on simulated density samples.
cutoff      Table of Monte-Carlo cutoffs.

Options may come from an INI file (``--config``); command-line flags win.
"""
from __future__ import annotations

import argparse
import configparser
import csv
import json
import logging
import os
import re
import sys
import warnings
from collections import OrderedDict
from dataclasses import asdict, dataclass, fields
from typing import List, Optional, Tuple

import numpy as np

from . import __version__
from .bayes_spline import SplineSpaceSpec, clr_fn, density_floor, eigendensities, ics_density
from .eucspace import ICSError
from .ics import solve_ics
from .mpl import MPLConfig, mpl_fit, smooth_clr_spline
from .outlier import KappaRule, detect, make_spec, monte_carlo_cutoff, param_grid_sweep
from .scatter import COV, COV4, CoordinateSample
from .simgen import SCHEMES, DetectorConfig, run_benchmark, scheme_config_from_mapping, write_benchmark_csv
from .simplex import coda_sample, read_compositions_csv

log = logging.getLogger("icsfree")

KINDS = ("multivariate", "compositional", "sample", "density_grid")
EIGEN_GRID = 512


class UnitError(ICSError):
    """One or more units failed; carries the per-unit messages."""

    def __init__(self, errors):
        self.errors = errors
        super().__init__("; ".join(f"unit {u}: {m}" for u, m in errors))


@dataclass
class PipelineConfig:
    input: Optional[str] = None
    kind: str = "multivariate"
    id_column: Optional[str] = None
    alr_index: int = 0
    degree: int = 4
    knots: Optional[int] = None
    placement: str = "quantile"
    interval: Optional[Tuple[float, float]] = None
    lam: float = 0.1
    penalty_order: int = 3
    smoothing: float = 0.0
    kappa: str = "dagostino:0.05"
    level: float = 0.975
    reps: int = 10000
    seed: int = 0
    out_dir: str = "out"
    threads: int = 1
    plots: bool = True

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown data kind {self.kind!r}; choose from {KINDS}")
        KappaRule.parse(self.kappa)

    def to_ini_section(self) -> "OrderedDict[str, str]":
        out = OrderedDict()
        for f in fields(self):
            v = getattr(self, f.name)
            if v is None:
                continue
            if isinstance(v, tuple):
                v = ",".join(repr(float(x)) for x in v)
            elif isinstance(v, float):
                v = repr(v)
            out[f.name] = str(v)
        return out

    @classmethod
    def from_mapping(cls, m) -> "PipelineConfig":
        kw = {}
        for f in fields(cls):
            if f.name not in m or m[f.name] in (None, ""):
                continue
            raw = m[f.name]
            default = f.default
            if f.name == "interval":
                vals = [float(x) for x in str(raw).split(",")] if isinstance(raw, str) else list(raw)
                if len(vals) != 2:
                    raise ValueError("interval needs two numbers 'a,b'")
                kw[f.name] = (vals[0], vals[1])
            elif f.name == "plots":
                kw[f.name] = raw if isinstance(raw, bool) else str(raw).lower() in ("1", "true", "yes", "on")
            elif f.name == "knots":
                kw[f.name] = int(raw)
            elif isinstance(default, bool):
                kw[f.name] = bool(raw)
            elif isinstance(default, int):
                kw[f.name] = int(raw)
            elif isinstance(default, float):
                kw[f.name] = float(raw)
            else:
                kw[f.name] = str(raw)
        return cls(**kw)

    def to_dict(self) -> dict:
        d = asdict(self)
        if d["interval"] is not None:
            d["interval"] = list(d["interval"])
        return d


# ---------------------------------------------------------------------------
# input


def read_table(path, id_column=None):
    """Header-first numeric CSV; returns ``(ids, matrix, column_names)``."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], [r for r in rows[1:] if r]
    ids = [str(i + 1) for i in range(len(body))]
    names = list(header)
    if id_column is not None:
        k = header.index(id_column)
        ids = [r[k] for r in body]
        body = [r[:k] + r[k + 1:] for r in body]
        names = header[:k] + header[k + 1:]
    return ids, np.array(body, dtype=float), names


def _grouped(rows, key):
    groups = OrderedDict()
    for r in rows:
        groups.setdefault(r[key], []).append(r)
    return groups


def read_long_samples(path) -> "OrderedDict[str, np.ndarray]":
    """Long CSV with columns ``unit_id,value``; unit order follows first appearance."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    if not rows or not {"unit_id", "value"} <= set(rows[0]):
        raise ValueError(f"{path}: expected columns unit_id,value")
    return OrderedDict((u, np.array([float(r["value"]) for r in rs])) for u, rs in _grouped(rows, "unit_id").items())


def read_density_grid(path):
    """Long CSV ``unit_id,t,density`` on a common grid; returns ``(ids, t, values)``."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    if not rows or not {"unit_id", "t", "density"} <= set(rows[0]):
        raise ValueError(f"{path}: expected columns unit_id,t,density")
    groups = _grouped(rows, "unit_id")
    ids, grid, vals = [], None, []
    for u, rs in groups.items():
        t = np.array([float(r["t"]) for r in rs])
        order = np.argsort(t, kind="stable")
        if grid is None:
            grid = t[order]
        elif t.size != grid.size or not np.allclose(t[order], grid, rtol=0, atol=1e-12):
            raise ValueError(f"unit {u}: density grid differs from the first unit's grid")
        ids.append(u)
        vals.append(np.array([float(r["density"]) for r in rs])[order])
    return ids, grid, np.vstack(vals)


def auto_knots(n_units: int, degree: int) -> int:
    """Largest knot count keeping about 10 observations per basis dimension."""
    return max(0, n_units // 10 - degree)


def sample_spec(cfg: PipelineConfig, samples) -> SplineSpaceSpec:
    pooled = np.concatenate(list(samples.values()))
    k = cfg.knots if cfg.knots is not None else auto_knots(len(samples), cfg.degree)
    return make_spec(pooled, cfg.placement, k, cfg.degree, cfg.interval)


def grid_spec(cfg: PipelineConfig, grid, n_units) -> SplineSpaceSpec:
    interval = cfg.interval or (float(grid[0]), float(grid[-1]))
    k = cfg.knots if cfg.knots is not None else auto_knots(n_units, cfg.degree)
    if cfg.placement == "quantile":
        log.info("density grids have no pooled sample; using equally spaced knots")
    return SplineSpaceSpec.equally_spaced(interval, cfg.degree, k)


def fit_samples(cfg: PipelineConfig, samples, spec):
    """MPL fit per unit; returns ``(results dict, errors list)``."""
    mcfg = MPLConfig(spec, cfg.lam, penalty_order=min(cfg.penalty_order, spec.degree))

    def one(item):
        uid, x = item
        try:
            return uid, mpl_fit(x, mcfg, full_output=True), None
        except (ICSError, ValueError, np.linalg.LinAlgError) as exc:
            return uid, None, f"{type(exc).__name__}: {exc}"

    items = list(samples.items())
    if cfg.threads > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(cfg.threads) as ex:
            out = list(ex.map(one, items))
    else:
        out = [one(it) for it in items]
    results = OrderedDict((u, r) for u, r, _ in out)
    errors = [(u, e) for u, _, e in out if e is not None]
    return results, errors


def load_data(cfg: PipelineConfig):
    """Returns ``(unit_ids, data, spec)`` with data a CoordinateSample or list of DensitySpline."""
    if not cfg.input or not os.path.exists(cfg.input):
        raise FileNotFoundError(f"input file not found: {cfg.input}")
    if cfg.kind == "multivariate":
        ids, x, _ = read_table(cfg.input, cfg.id_column)
        return ids, CoordinateSample.euclidean(x), None
    if cfg.kind == "compositional":
        ids, parts, _ = read_compositions_csv(cfg.input, cfg.id_column)
        return ids, coda_sample(parts, cfg.alr_index), None
    if cfg.kind == "sample":
        samples = read_long_samples(cfg.input)
        spec = sample_spec(cfg, samples)
        res, errors = fit_samples(cfg, samples, spec)
        if errors:
            raise UnitError(errors)
        return list(res), [r.density for r in res.values()], spec
    ids, grid, values = read_density_grid(cfg.input)
    spec = grid_spec(cfg, grid, len(ids))
    clr = clr_fn(density_floor(values, grid), grid)
    dens = smooth_clr_spline(grid, clr, spec, cfg.smoothing, min(2, spec.degree))
    return ids, dens, spec


# ---------------------------------------------------------------------------
# output helpers


def _f(x) -> str:
    return "" if x is None or (isinstance(x, float) and np.isnan(x)) else repr(float(x))


def write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
    return path


def write_json(path, obj):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=False)
        fh.write("\n")
    return path


def safe_name(uid: str) -> str:
    return re.sub(r"[^A-Za-z0-9._-]+", "_", uid) or "unit"


def write_run_meta(out_dir, command, cfg: PipelineConfig, extra=None):
    meta = {"command": command, "version": __version__, "config": cfg.to_dict()}
    if extra:
        meta.update(extra)
    return write_json(os.path.join(out_dir, "run.json"), meta)


# ---------------------------------------------------------------------------
# commands


def cmd_smooth(cfg: PipelineConfig) -> int:
    if cfg.kind != "sample":
        raise ValueError("smooth needs kind = sample")
    if not cfg.input or not os.path.exists(cfg.input):
        raise FileNotFoundError(f"input file not found: {cfg.input}")
    samples = read_long_samples(cfg.input)
    spec = sample_spec(cfg, samples)
    res, errors = fit_samples(cfg, samples, spec)
    err = dict(errors)
    dens_dir = os.path.join(cfg.out_dir, "densities")
    os.makedirs(dens_dir, exist_ok=True)
    rows = []
    for uid, r in res.items():
        if r is None:
            rows.append([uid, "error", "", "", "", "", err[uid]])
            continue
        with open(os.path.join(dens_dir, safe_name(uid) + ".json"), "w", encoding="utf-8") as fh:
            fh.write(r.density.to_json(indent=2) + "\n")
        rows.append([uid, "ok", r.iterations, _f(r.gradient_norm), _f(r.log_likelihood), _f(r.penalty), ""])
    write_csv(os.path.join(cfg.out_dir, "fit_report.csv"),
              ["unit_id", "status", "iterations", "final_gradient_norm", "log_likelihood", "penalty", "error"],
              rows)
    write_run_meta(cfg.out_dir, "smooth", cfg, {"spline_space": spec.to_dict()})
    for uid, msg in errors:
        log.error("unit %s: %s", uid, msg)
    return 1 if errors else 0


def _scree_rows(spectrum, kappa=None, pvalues=None):
    rows = []
    for j, lam in enumerate(spectrum):
        pv = None if pvalues is None else pvalues[j]
        sel = "" if kappa is None else int(j < kappa)
        rows.append([j + 1, _f(lam), sel, _f(pv)])
    return rows


def cmd_ics(cfg: PipelineConfig) -> int:
    ids, data, spec = load_data(cfg)
    sample = data if isinstance(data, CoordinateSample) else None
    if sample is None:
        sol = ics_density(data)
    else:
        sol = solve_ics(sample, COV, COV4)
    os.makedirs(cfg.out_dir, exist_ok=True)
    with open(os.path.join(cfg.out_dir, "ics_solution.json"), "w", encoding="utf-8") as fh:
        fh.write(sol.to_json(indent=2) + "\n")
    p = sol.spectrum.size
    write_csv(os.path.join(cfg.out_dir, "scores.csv"), ["unit_id"] + [f"ic{j + 1}" for j in range(p)],
              [[u] + [_f(v) for v in row] for u, row in zip(ids, sol.scores)])
    write_csv(os.path.join(cfg.out_dir, "scree.csv"), ["component", "eigenvalue", "selected", "pvalue"],
              _scree_rows(sol.spectrum))
    if spec is not None:
        _write_eigendensities(cfg, sol, spec)
    if cfg.plots:
        from . import plotting

        plotting.plot_scree(sol.spectrum, os.path.join(cfg.out_dir, "scree.png"))
        plotting.plot_scores(sol.scores, os.path.join(cfg.out_dir, "scores.png"))
    write_run_meta(cfg.out_dir, "ics", cfg)
    return 0


def _write_eigendensities(cfg, sol, spec):
    a, b = spec.interval
    t = np.linspace(a, b, EIGEN_GRID)
    ev = eigendensities(sol, spec, t, dual=True)
    write_csv(os.path.join(cfg.out_dir, "eigendensities.csv"),
              ["t"] + [f"h{j + 1}" for j in range(ev.shape[0])],
              [[_f(t[i])] + [_f(v) for v in ev[:, i]] for i in range(t.size)])
    return t, ev


def cmd_outlier(cfg: PipelineConfig) -> int:
    ids, data, spec = load_data(cfg)
    rule = KappaRule.parse(cfg.kappa)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        rep = detect(data, rule, cfg.level, cfg.reps, cfg.seed, unit_ids=ids)
    for w in caught:
        log.warning("%s", w.message)
    os.makedirs(cfg.out_dir, exist_ok=True)
    report = rep.to_dict()
    report["config"] = cfg.to_dict()
    report["kappa_rule"] = str(rule)
    write_json(os.path.join(cfg.out_dir, "outlier_report.json"), report)
    cut = rep.cutoff if np.isfinite(rep.cutoff) else None
    write_csv(os.path.join(cfg.out_dir, "scree.csv"), ["component", "eigenvalue", "selected", "pvalue"],
              _scree_rows(rep.spectrum, rep.kappa, rep.pvalues))
    write_csv(os.path.join(cfg.out_dir, "distances.csv"), ["unit_id", "distance", "cutoff", "flagged"],
              [[u, _f(d), _f(cut), int(fl)] for u, d, fl in zip(ids, rep.distances, rep.flags)])
    z = rep.solution.scores
    q = min(2, z.shape[1])
    write_csv(os.path.join(cfg.out_dir, "scores.csv"), ["unit_id"] + [f"ic{j + 1}" for j in range(q)],
              [[u] + [_f(v) for v in row[:q]] for u, row in zip(ids, z)])
    ev = None
    if spec is not None:
        t, ev = _write_eigendensities(cfg, rep.solution, spec)
    if cfg.plots:
        from . import plotting

        d = cfg.out_dir
        plotting.plot_scree(rep.spectrum, os.path.join(d, "scree.png"), rep.kappa)
        plotting.plot_distances(rep.distances, rep.cutoff, os.path.join(d, "distances.png"), ids)
        plotting.plot_scores(z, os.path.join(d, "scores.png"), rep.flags)
        if ev is not None:
            plotting.plot_eigendensities(t, ev, os.path.join(d, "eigendensities.png"), n_show=max(rep.kappa, 2))
    write_run_meta(cfg.out_dir, "outlier", cfg)
    return 0


def parse_number_list(text, integer=False) -> List[float]:
    """``"1,2,5"`` or a range ``"start:stop[:step]"`` (inclusive)."""
    out = []
    for part in str(text).split(","):
        part = part.strip()
        if not part:
            continue
        if ":" in part:
            bits = [float(b) for b in part.split(":")]
            start, stop = bits[0], bits[1]
            step = bits[2] if len(bits) > 2 else 1.0
            n = int(round((stop - start) / step)) + 1
            out.extend(start + step * np.arange(n))
        else:
            out.append(float(part))
    return [int(round(v)) for v in out] if integer else [float(v) for v in out]


def cmd_sweep(cfg: PipelineConfig, knots, log_lambdas, placements) -> int:
    if cfg.kind != "sample":
        raise ValueError("sweep needs kind = sample")
    if not cfg.input or not os.path.exists(cfg.input):
        raise FileNotFoundError(f"input file not found: {cfg.input}")
    samples = read_long_samples(cfg.input)
    lams = [10.0 ** v for v in log_lambdas]
    res = param_grid_sweep(samples, knots, lams, placements, KappaRule.parse(cfg.kappa), cfg.degree,
                           cfg.penalty_order, cfg.interval, cfg.level, cfg.reps, cfg.seed, cfg.threads)
    os.makedirs(cfg.out_dir, exist_ok=True)
    write_csv(os.path.join(cfg.out_dir, "sweep_cells.csv"),
              ["placement", "n_knots", "lambda", "status", "kappa", "error"],
              [[c.placement, c.n_knots, _f(c.lam), "ok" if c.ok else "missing",
                "" if c.kappa is None else c.kappa, c.error or ""] for c in res.cells])
    flag_rows = []
    for c in res.cells:
        for i, uid in enumerate(res.unit_ids):
            flag_rows.append([c.placement, c.n_knots, _f(c.lam), uid, int(c.flags[i]) if c.ok else ""])
    write_csv(os.path.join(cfg.out_dir, "sweep_flags.csv"),
              ["placement", "n_knots", "lambda", "unit_id", "flagged"], flag_rows)
    write_csv(os.path.join(cfg.out_dir, "frequency.csv"), ["unit_id", "cells_run", "cells_flagged", "frequency"],
              [[u, r, f, _f(q)] for u, r, f, q in res.frequency_rows()])
    if cfg.plots:
        from . import plotting

        plotting.plot_frequency(res.unit_ids, res.frequency, os.path.join(cfg.out_dir, "frequency.png"))
    write_run_meta(cfg.out_dir, "sweep", cfg, {"knots": list(knots), "log10_lambda": list(log_lambdas),
                                               "placements": list(placements)})
    return 0


def cmd_benchmark(cfg: PipelineConfig, scheme_cfgs, n_reps, detector: DetectorConfig) -> int:
    res = run_benchmark(scheme_cfgs, detector, n_reps, cfg.seed, cfg.threads)
    write_benchmark_csv(res, cfg.out_dir)
    if cfg.plots:
        from . import plotting

        plotting.plot_roc(res, os.path.join(cfg.out_dir, "roc.png"))
    extra = {"n_reps": n_reps,
             "schemes": [dict((f.name, getattr(s, f.name)) for f in fields(s)) for s in scheme_cfgs],
             "detector": {k: (str(v) if isinstance(v, KappaRule) else v) for k, v in asdict(detector).items()},
             "skipped_no_outlier": {k: v.skipped_no_outlier for k, v in res.items()},
             "failures": {k: v.failures for k, v in res.items()}}
    write_run_meta(cfg.out_dir, "benchmark", cfg, extra)
    return 0


def cmd_cutoff(cfg: PipelineConfig, ns, ps, kappas) -> int:
    rows = []
    for n in ns:
        for p in ps:
            for ktext in kappas:
                rule = KappaRule.parse(ktext)
                c, meta = monte_carlo_cutoff(n, p, rule, cfg.level, cfg.reps, cfg.seed, full_output=True)
                rows.append([n, p, str(rule), _f(cfg.level), cfg.reps, cfg.seed, _f(c) if np.isfinite(c) else "",
                             meta["replicates_used"]])
    os.makedirs(cfg.out_dir, exist_ok=True)
    write_csv(os.path.join(cfg.out_dir, "cutoff_table.csv"),
              ["n", "p", "kappa_rule", "level", "reps", "seed", "cutoff", "replicates_used"], rows)
    write_run_meta(cfg.out_dir, "cutoff", cfg)
    return 0


# ---------------------------------------------------------------------------
# argument handling


def _common(p):
    p.add_argument("--config", help="INI file with a [pipeline] section (and command sections)")
    p.add_argument("--seed", type=int)
    p.add_argument("--out-dir", dest="out_dir")
    p.add_argument("--threads", type=int)
    p.add_argument("--no-plots", dest="plots", action="store_false", default=None)
    p.add_argument("-v", "--verbose", action="store_true")


def _data_opts(p):
    p.add_argument("input", nargs="?")
    p.add_argument("--kind", choices=KINDS)
    p.add_argument("--id-column", dest="id_column")
    p.add_argument("--alr-index", dest="alr_index", type=int)
    p.add_argument("--degree", type=int)
    p.add_argument("--knots", type=int)
    p.add_argument("--placement", choices=("quantile", "equally_spaced"))
    p.add_argument("--interval", help="a,b")
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--penalty-order", dest="penalty_order", type=int)
    p.add_argument("--smoothing", type=float, help="penalty for clr smoothing of density grids")
    p.add_argument("--kappa", help="fixed:K, scree:K or dagostino[:level]")
    p.add_argument("--level", type=float)
    p.add_argument("--reps", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="icsfree", description="Invariant coordinate selection toolkit")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, hlp in [("smooth", "MPL density smoothing of raw samples"),
                      ("ics", "solve ICS"),
                      ("outlier", "ICS outlier detection")]:
        p = sub.add_parser(name, help=hlp)
        _common(p)
        _data_opts(p)
    p = sub.add_parser("sweep", help="detection frequency over smoothing parameters")
    _common(p)
    _data_opts(p)
    p.add_argument("--knot-grid", dest="knot_grid", help="e.g. 4,6,8 or 2:10:2")
    p.add_argument("--log-lambda-grid", dest="log_lambda_grid", help="base-10 exponents, e.g. -2:2")
    p.add_argument("--placements", help="comma list of quantile,equally_spaced")
    p = sub.add_parser("benchmark", help="ROC/AUC benchmark on simulated densities")
    _common(p)
    p.add_argument("--schemes", help=f"comma list from {','.join(SCHEMES)}")
    p.add_argument("--n-reps", dest="n_reps", type=int)
    p.add_argument("--n", type=int)
    p.add_argument("--outlier-rate", dest="outlier_rate", type=float)
    p = sub.add_parser("cutoff", help="Monte-Carlo cutoff table")
    _common(p)
    p.add_argument("--n", help="comma list of sample sizes")
    p.add_argument("--p", help="comma list of dimensions")
    p.add_argument("--kappa-rules", dest="kappa_rules", help="rules separated by ';', e.g. 'fixed:1;fixed:2'")
    p.add_argument("--level", type=float)
    p.add_argument("--reps", type=int)
    return parser


def _read_ini(path):
    if path is None:
        return configparser.ConfigParser()
    if not os.path.exists(path):
        raise FileNotFoundError(f"config file not found: {path}")
    ini = configparser.ConfigParser()
    ini.read(path, encoding="utf-8")
    return ini


def _section(ini, name):
    return dict(ini[name]) if ini.has_section(name) else {}


def resolve_config(args, ini) -> PipelineConfig:
    merged = _section(ini, "pipeline")
    for k, v in vars(args).items():
        if k in {f.name for f in fields(PipelineConfig)} and v is not None:
            merged[k] = v
    return PipelineConfig.from_mapping(merged)


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    ini = _read_ini(args.config)
    cfg = resolve_config(args, ini)
    cmd = args.command
    if cmd == "smooth":
        return cmd_smooth(cfg)
    if cmd == "ics":
        return cmd_ics(cfg)
    if cmd == "outlier":
        return cmd_outlier(cfg)
    if cmd == "sweep":
        sec = _section(ini, "sweep")
        knots = parse_number_list(args.knot_grid or sec.get("knots", "4,6,8"), integer=True)
        loglam = parse_number_list(args.log_lambda_grid or sec.get("log_lambda", "-2:2"))
        placements = [s.strip() for s in (args.placements or sec.get("placements", "quantile,equally_spaced")).split(",")]
        return cmd_sweep(cfg, knots, loglam, placements)
    if cmd == "benchmark":
        sec = _section(ini, "benchmark")
        names = [s.strip() for s in (args.schemes or sec.get("schemes", ",".join(SCHEMES))).split(",")]
        n_reps = args.n_reps or int(sec.get("n_reps", 50))
        schemes = []
        for name in names:
            over = {"scheme": name, "seed": cfg.seed}
            for key in ("n", "outlier_rate"):
                if sec.get(key) is not None:
                    over[key] = sec[key]
                if getattr(args, key) is not None:
                    over[key] = getattr(args, key)
            schemes.append(scheme_config_from_mapping(_section(ini, f"scheme:{name}"), **over))
        det = DetectorConfig(kappa_rule=KappaRule.parse(cfg.kappa))
        return cmd_benchmark(cfg, schemes, n_reps, det)
    if cmd == "cutoff":
        sec = _section(ini, "cutoff")
        ns = parse_number_list(args.n or sec.get("n", "200"), integer=True)
        ps = parse_number_list(args.p or sec.get("p", "6"), integer=True)
        kappas = [s.strip() for s in (args.kappa_rules or sec.get("kappa_rules", "fixed:2")).split(";") if s.strip()]
        return cmd_cutoff(cfg, ns, ps, kappas)
    raise AssertionError(cmd)


def main(argv=None) -> int:
    try:
        return run(argv)
    except UnitError as exc:
        for uid, msg in exc.errors:
            print(f"icsfree: unit {uid}: {msg}", file=sys.stderr)
        return 1
    except (ICSError, ValueError, FileNotFoundError, np.linalg.LinAlgError) as exc:
        print(f"icsfree: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
