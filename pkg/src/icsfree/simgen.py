"""Simulated density samples with planted outliers, and the ROC/AUC harness.

Three generating schemes:

``gp_clr``
    Gaussian-process paths on (0, 1) (exponential covariance), outliers
    with a mean bump; each centred path is mapped to a density by clr^{-1}.
``gp_margin``
    Gaussian-process paths, outliers with inflated variance; the time axis
    is dropped and the path values are a raw sample smoothed by MPL.
``gumbel``
    Gumbel densities whose (location, scale) come from a two-component
    bivariate Gaussian mixture; outliers are location shifted.

The GP parameters are stand-ins chosen for this package, not published
values.
"""
from __future__ import annotations

import csv
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields
from typing import Dict, List, Optional, Sequence

import numpy as np
from scipy.stats import norm

from .bayes_spline import (
    DensitySpline,
    SplineSpaceSpec,
    clr_fn,
    clr_inv,
    density_floor,
    density_sample,
)
from .eucspace import ICSError, spd_sqrt
from .mpl import MPLConfig, mpl_fit, smooth_clr_spline
from .outlier import KappaRule, ics_distance, select_components
from .ics import solve_ics

SCHEMES = ("gp_clr", "gp_margin", "gumbel")
Z975 = float(norm.ppf(0.975))


@dataclass(frozen=True)
class SchemeConfig:
    scheme: str = "gp_clr"
    n: int = 200
    grid_size: int = 100
    outlier_rate: float = 0.02
    seed: int = 0
    # Gaussian processes
    gp_range: float = 0.1
    gp_variance: float = 1.0
    bump_amplitude: float = 2.0
    bump_center: float = 0.5
    bump_width: float = 0.1
    variance_inflation: float = 4.0
    # Gumbel parameter mixture (location, scale)
    gumbel_inlier_mean: tuple = (0.45, 0.08)
    gumbel_outlier_mean: tuple = (0.65, 0.08)
    gumbel_cov_diag: tuple = (1e-4, 1e-4)
    gumbel_min_scale: float = 1e-3

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}; choose from {SCHEMES}")
        if not 0 <= self.outlier_rate < 1:
            raise ValueError("outlier_rate must lie in [0, 1)")
        if self.grid_size < 10:
            raise ValueError("grid_size must be at least 10")

    @property
    def grid(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.grid_size)


@dataclass
class GeneratedSample:
    labels: np.ndarray
    grid: Optional[np.ndarray] = None
    densities: Optional[np.ndarray] = None
    samples: Optional[List[np.ndarray]] = None


def _labels(cfg: SchemeConfig, rng) -> np.ndarray:
    return rng.random(cfg.n) < cfg.outlier_rate


def _exp_cov_factor(t, variance, rng_range):
    c = variance * np.exp(-np.abs(t[:, None] - t[None, :]) / rng_range)
    return np.linalg.cholesky(c + 1e-10 * np.eye(t.size))


def _rng(cfg, rng):
    return rng if rng is not None else np.random.default_rng(cfg.seed)


def gen_gp_clr(cfg: SchemeConfig, rng=None) -> GeneratedSample:
    rng = _rng(cfg, rng)
    t = cfg.grid
    labels = _labels(cfg, rng)
    chol = _exp_cov_factor(t, cfg.gp_variance, cfg.gp_range)
    paths = rng.standard_normal((cfg.n, t.size)) @ chol.T
    bump = cfg.bump_amplitude * np.exp(-0.5 * ((t - cfg.bump_center) / cfg.bump_width) ** 2)
    paths[labels] += bump
    paths -= (np.trapezoid(paths, t, axis=1) / (t[-1] - t[0]))[:, None]
    return GeneratedSample(labels, t, clr_inv(paths, t))


def gen_gp_margin(cfg: SchemeConfig, rng=None) -> GeneratedSample:
    rng = _rng(cfg, rng)
    t = cfg.grid
    labels = _labels(cfg, rng)
    chol = _exp_cov_factor(t, cfg.gp_variance, cfg.gp_range)
    paths = rng.standard_normal((cfg.n, t.size)) @ chol.T
    paths[labels] *= np.sqrt(cfg.variance_inflation)
    return GeneratedSample(labels, samples=[row.copy() for row in paths])


def gumbel_pdf(t, mu, beta):
    z = (np.asarray(t) - mu) / beta
    return np.exp(-(z + np.exp(-z))) / beta


def gen_gumbel(cfg: SchemeConfig, rng=None) -> GeneratedSample:
    rng = _rng(cfg, rng)
    t = cfg.grid
    labels = _labels(cfg, rng)
    means = np.where(labels[:, None], cfg.gumbel_outlier_mean, cfg.gumbel_inlier_mean)
    params = means + rng.standard_normal((cfg.n, 2)) * np.sqrt(cfg.gumbel_cov_diag)
    mu = params[:, 0]
    beta = np.maximum(params[:, 1], cfg.gumbel_min_scale)
    with np.errstate(over="ignore", under="ignore"):
        dens = gumbel_pdf(t[None, :], mu[:, None], beta[:, None])
    # the left tail exp(-e^{-z}) underflows; keep it at the smallest normal double
    dens = np.maximum(dens, np.finfo(float).tiny)
    # renormalise on the grid interval (truncation)
    area = np.trapezoid(dens, t, axis=1)
    dens = np.where(area[:, None] > 0, dens / np.where(area > 0, area, 1.0)[:, None], 1.0)
    return GeneratedSample(labels, t, dens)


GENERATORS = {"gp_clr": gen_gp_clr, "gp_margin": gen_gp_margin, "gumbel": gen_gumbel}


def generate(cfg: SchemeConfig, rng=None) -> GeneratedSample:
    return GENERATORS[cfg.scheme](cfg, rng)


# ---------------------------------------------------------------------------
# density pipeline (ICS in the Bayes space)


@dataclass(frozen=True)
class DetectorConfig:
    """Preprocessing for the benchmark's ICS density detector.

    ``n_knots=None`` picks the spline space per dataset: the largest number
    of equally spaced knots (at most ``max_knots``) for which the covariance
    of the coordinates, in an orthonormal basis, has condition number at
    most ``max_condition``.  The raw-sample scheme is first smoothed by MPL
    (``mpl_lambda``, ``mpl_degree``, ``mpl_knots`` at pooled quantiles) and
    evaluated on a regular grid over the pooled range.
    """

    degree: int = 3
    n_knots: Optional[int] = None
    max_knots: int = 8
    max_condition: float = 1e6
    smoothing: float = 1e-4
    smoothing_order: int = 2
    mpl_lambda: float = 1.0
    mpl_degree: int = 3
    mpl_knots: int = 6
    kappa_rule: KappaRule = KappaRule.dagostino(0.05)


def smooth_grid_densities(grid, densities, cfg: DetectorConfig, n_knots: Optional[int] = None) -> List[DensitySpline]:
    t = np.asarray(grid)
    k = cfg.n_knots if n_knots is None else n_knots
    if k is None:
        raise ValueError("n_knots must be given when the detector picks it automatically")
    spec = SplineSpaceSpec.equally_spaced((float(t[0]), float(t[-1])), cfg.degree, k)
    clr = clr_fn(density_floor(densities, t), t)
    return smooth_clr_spline(t, clr, spec, cfg.smoothing, cfg.smoothing_order)


def margin_densities(samples, cfg: DetectorConfig, grid_size: int = 100):
    """MPL-smooth raw samples, then discretise on a regular grid over the pooled range.

    Knots sit at pooled-sample quantiles.  Returns ``(grid, densities)``.
    """
    pooled = np.concatenate([np.asarray(s, dtype=float).ravel() for s in samples])
    interval = (float(pooled.min()), float(pooled.max()))
    spec = SplineSpaceSpec.from_quantiles(pooled, cfg.mpl_degree, cfg.mpl_knots, interval)
    mcfg = MPLConfig(spec, cfg.mpl_lambda, penalty_order=min(3, cfg.mpl_degree))
    grid = np.linspace(interval[0], interval[1], grid_size)
    return grid, np.vstack([mpl_fit(s, mcfg).density(grid) for s in samples])


def _coordinate_condition(dens) -> float:
    smp = density_sample(dens)
    root = spd_sqrt(smp.basis.gram)
    cov = np.cov(smp.coords @ root, rowvar=False, bias=True)
    s = np.linalg.eigvalsh(cov)
    return float(s[-1] / s[0]) if s[0] > 0 else np.inf


def detector_densities(grid, densities, cfg: DetectorConfig):
    """Smoothed densities for ICS; returns ``(densities, n_knots)``."""
    if cfg.n_knots is not None:
        return smooth_grid_densities(grid, densities, cfg), cfg.n_knots
    for k in range(cfg.max_knots, -1, -1):
        dens = smooth_grid_densities(grid, densities, cfg, n_knots=k)
        if _coordinate_condition(dens) <= cfg.max_condition:
            return dens, k
    raise ICSError("no spline space gives a well-conditioned coordinate covariance")


def ics_scores(data: GeneratedSample, cfg: DetectorConfig, full_output: bool = False):
    """Squared ICS distances with the selected kappa (kappa 1 if nothing is selected).

    Returns ``(scores, kappa_selected)``, plus the chosen knot count when
    ``full_output`` is true.
    """
    if data.samples is not None:
        grid, values = margin_densities(data.samples, cfg)
    else:
        grid, values = data.grid, data.densities
    dens, k = detector_densities(grid, values, cfg)
    sol = solve_ics(density_sample(dens))
    sel = select_components(sol.scores, cfg.kappa_rule)
    scores = ics_distance(sol.scores, max(sel.kappa, 1))
    return (scores, sel.kappa, k) if full_output else (scores, sel.kappa)


# ---------------------------------------------------------------------------
# ROC


@dataclass
class RocResult:
    tpr: np.ndarray
    fpr: np.ndarray
    auc: float
    ci_halfwidth: Optional[np.ndarray] = None

    @property
    def pp(self) -> np.ndarray:
        return np.arange(self.tpr.size)


def roc_auc(scores, labels) -> RocResult:
    """ROC curve over the number of predicted positives PP = 0..n.

    Observations are ranked by decreasing score; ties keep their original
    order (stable sort).
    """
    s = np.asarray(scores, dtype=float)
    y = np.asarray(labels, dtype=bool)
    if s.shape != y.shape:
        raise ValueError("scores and labels differ in length")
    npos = int(y.sum())
    nneg = y.size - npos
    if npos == 0 or nneg == 0:
        raise ValueError("ROC needs at least one positive and one negative label")
    order = np.argsort(-s, kind="stable")
    yy = y[order]
    tpr = np.concatenate([[0.0], np.cumsum(yy) / npos])
    fpr = np.concatenate([[0.0], np.cumsum(~yy) / nneg])
    return RocResult(tpr, fpr, float(np.trapezoid(tpr, fpr)))


# ---------------------------------------------------------------------------
# benchmark


@dataclass
class SchemeSummary:
    scheme: str
    tpr_mean: np.ndarray
    fpr_mean: np.ndarray
    tpr_halfwidth: np.ndarray
    aucs: np.ndarray
    skipped_no_outlier: int = 0
    failures: int = 0
    no_structure: int = 0
    outlier_counts: List[int] = field(default_factory=list)

    @property
    def auc_mean(self) -> float:
        return float(np.mean(self.aucs))

    @property
    def auc_sd(self) -> float:
        return float(np.std(self.aucs, ddof=1)) if self.aucs.size > 1 else 0.0


def _one_replicate(scheme_cfg, det_cfg, seed, scheme_idx, r):
    rng = np.random.default_rng([seed, scheme_idx, r])
    data = generate(scheme_cfg, rng)
    n_out = int(data.labels.sum())
    if n_out == 0 or n_out == data.labels.size:
        return "skip", n_out, None
    try:
        scores, kappa = ics_scores(data, det_cfg)
    except (ICSError, ValueError, np.linalg.LinAlgError) as exc:
        return "fail", n_out, str(exc)
    return "ok", n_out, (roc_auc(scores, data.labels), kappa)


def run_benchmark(
    schemes: Sequence[SchemeConfig],
    detector: DetectorConfig = DetectorConfig(),
    n_reps: int = 50,
    seed: int = 0,
    workers: int = 1,
    max_failure_rate: float = 0.05,
) -> Dict[str, SchemeSummary]:
    """Average ROC curves and AUCs of the ICS density detector over replicates.

    Replicate r of scheme i uses the RNG substream ``(seed, i, r)``.  Draws
    without any outlier cannot be scored; they are skipped and further
    replicate indices are used until ``n_reps`` scored datasets are found.
    Pointwise bands are ``z_0.975 * sd(TPR) / sqrt(n_reps)``.
    """
    out = {}
    for i, cfg in enumerate(schemes):
        rocs, counts, kappas = [], [], []
        skipped = failures = 0
        r = 0
        while len(rocs) < n_reps:
            batch = range(r, r + (n_reps - len(rocs)))
            if workers > 1:
                with ThreadPoolExecutor(workers) as ex:
                    res = list(ex.map(lambda j: _one_replicate(cfg, detector, seed, i, j), batch))
            else:
                res = [_one_replicate(cfg, detector, seed, i, j) for j in batch]
            r = batch.stop
            for status, n_out, payload in res:
                if status == "skip":
                    skipped += 1
                elif status == "fail":
                    failures += 1
                    counts.append(n_out)
                else:
                    rocs.append(payload[0])
                    kappas.append(payload[1])
                    counts.append(n_out)
            if failures > max_failure_rate * n_reps:
                raise ICSError(
                    f"scheme {cfg.scheme}: {failures} replicate failures exceed "
                    f"{max_failure_rate:.0%} of {n_reps}"
                )
            if skipped > 10 * n_reps + 100:
                raise ICSError(f"scheme {cfg.scheme}: outlier_rate too small to score replicates")
        tpr = np.vstack([ro.tpr for ro in rocs])
        fpr = np.vstack([ro.fpr for ro in rocs])
        half = Z975 * tpr.std(axis=0, ddof=1) / np.sqrt(len(rocs)) if len(rocs) > 1 else np.zeros(tpr.shape[1])
        out[cfg.scheme] = SchemeSummary(
            cfg.scheme, tpr.mean(axis=0), fpr.mean(axis=0), half,
            np.array([ro.auc for ro in rocs]), skipped, failures,
            int(sum(k == 0 for k in kappas)), counts,
        )
    return out


def write_benchmark_csv(results: Dict[str, SchemeSummary], out_dir) -> tuple:
    os.makedirs(out_dir, exist_ok=True)
    roc_path = os.path.join(out_dir, "roc_curves.csv")
    auc_path = os.path.join(out_dir, "auc_table.csv")
    with open(roc_path, "w", newline="", encoding="utf-8") as fh:
        wr = csv.writer(fh)
        wr.writerow(["scheme", "pp", "tpr_mean", "fpr_mean", "tpr_halfwidth"])
        for name, s in results.items():
            for pp in range(s.tpr_mean.size):
                wr.writerow([name, pp, repr(float(s.tpr_mean[pp])), repr(float(s.fpr_mean[pp])),
                             repr(float(s.tpr_halfwidth[pp]))])
    with open(auc_path, "w", newline="", encoding="utf-8") as fh:
        wr = csv.writer(fh)
        wr.writerow(["scheme", "auc_mean", "auc_sd"])
        for name, s in results.items():
            wr.writerow([name, repr(s.auc_mean), repr(s.auc_sd)])
    return roc_path, auc_path


def scheme_config_from_mapping(section: dict, **overrides) -> SchemeConfig:
    """Build a SchemeConfig from string key-value pairs (e.g. an INI section)."""
    kw = {}
    types = {f.name for f in fields(SchemeConfig)}
    for key, raw in dict(section, **overrides).items():
        if key not in types:
            continue
        default = getattr(SchemeConfig(), key)
        if isinstance(default, tuple):
            kw[key] = tuple(float(v) for v in str(raw).replace(";", ",").split(","))
        elif isinstance(default, bool):
            kw[key] = str(raw).lower() in ("1", "true", "yes")
        elif isinstance(default, int):
            kw[key] = int(raw)
        elif isinstance(default, float):
            kw[key] = float(raw)
        else:
            kw[key] = str(raw)
    return SchemeConfig(**kw)
