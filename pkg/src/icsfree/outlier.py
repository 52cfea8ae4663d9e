"""ICS-based outlier detection for small proportions of outliers.

Three steps, all with the (Cov, Cov4) scatter pair:

1. solve ICS and compute the invariant coordinates;
2. keep the first ``kappa`` components (fixed, or chosen by sequential
   D'Agostino normality tests with a Bonferroni-type schedule) and compute
   squared ICS distances ``sum_{j <= kappa} z_j^2``;
3. flag observations whose distance exceeds the ``level`` quantile of the
   same distances simulated on standard Gaussian samples of the same size.
"""
from __future__ import annotations

import json
import logging
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from typing import List, Optional, Sequence

import numpy as np
from scipy import stats

from .bayes_spline import DensitySpline, SplineSpaceSpec, default_interval, density_sample
from .eucspace import ConditioningError, DimensionError, ICSError
from .ics import ICSSolution, solve_ics
from .mpl import MPLConfig, mpl_fit
from .scatter import COV, COV4, CoordinateSample

log = logging.getLogger(__name__)

SCHEMA = "ics-outlier/1"
DEFAULT_REPS = 10_000
DEFAULT_LEVEL = 0.975
BONFERRONI = "level/j"


@dataclass(frozen=True)
class KappaRule:
    """How many invariant components to keep.

    ``mode`` is ``"fixed"``, ``"scree"`` (a fixed value read off a scree
    plot; the eigenvalues are exported for that purpose) or ``"dagostino"``
    (sequential normality tests at ``level / j`` for component j).
    """

    mode: str = "dagostino"
    kappa: Optional[int] = None
    level: float = 0.05

    def __post_init__(self):
        if self.mode not in ("fixed", "scree", "dagostino"):
            raise ValueError(f"unknown kappa rule {self.mode!r}")
        if self.mode in ("fixed", "scree") and (self.kappa is None or self.kappa < 1):
            raise ValueError(f"{self.mode} rule needs a positive kappa")

    @classmethod
    def fixed(cls, kappa: int) -> "KappaRule":
        return cls("fixed", int(kappa))

    @classmethod
    def dagostino(cls, level: float = 0.05) -> "KappaRule":
        return cls("dagostino", None, float(level))

    @classmethod
    def parse(cls, text: str) -> "KappaRule":
        """Parse ``"fixed:2"``, ``"scree:3"``, ``"dagostino"`` or ``"dagostino:0.01"``."""
        mode, _, arg = str(text).strip().partition(":")
        mode = mode.strip().lower()
        if mode == "dagostino":
            return cls.dagostino(float(arg) if arg else 0.05)
        if mode in ("fixed", "scree"):
            return cls(mode, int(arg))
        if mode.isdigit():
            return cls.fixed(int(mode))
        raise ValueError(f"cannot parse kappa rule {text!r}")

    def __str__(self):
        if self.mode == "dagostino":
            return f"dagostino:{self.level:g}"
        return f"{self.mode}:{self.kappa}"


@dataclass
class Selection:
    kappa: int
    mode: str
    pvalues: Optional[np.ndarray] = None
    no_structure: bool = False


def ics_distance(scores, kappa: int) -> np.ndarray:
    """Squared ICS distances from the first ``kappa`` invariant coordinates."""
    z = np.asarray(scores, dtype=float)
    p = z.shape[-1]
    if not 1 <= kappa <= p:
        raise ValueError(f"kappa must lie in [1, {p}], got {kappa}")
    zk = z[..., :kappa]
    return np.sum(zk * zk, axis=-1)


def dagostino_pvalue(z, axis: int = 0):
    """D'Agostino-Pearson omnibus K^2 normality test p-value."""
    z = np.asarray(z, dtype=float)
    if z.shape[axis] < 20:
        raise DimensionError(f"D'Agostino test needs at least 20 values, got {z.shape[axis]}")
    return stats.normaltest(z, axis=axis).pvalue


def select_components(scores, rule: KappaRule = KappaRule.dagostino()) -> Selection:
    """Number of leading invariant components to keep."""
    if rule.mode in ("fixed", "scree"):
        p = np.shape(scores)[-1]
        if rule.kappa > p:
            raise ValueError(f"kappa={rule.kappa} exceeds the dimension {p}")
        return Selection(rule.kappa, rule.mode)
    pvals = np.atleast_1d(dagostino_pvalue(scores, axis=0))
    kappa = _sequential_kappa(pvals[None, :], rule.level)[0]
    return Selection(int(kappa), "dagostino", pvals, no_structure=kappa == 0)


def _sequential_kappa(pvals: np.ndarray, level: float) -> np.ndarray:
    # pvals: (reps, p); kappa = length of the initial run of rejections
    p = pvals.shape[1]
    reject = pvals < level / np.arange(1, p + 1)
    first_accept = np.where(~reject.all(axis=1), np.argmin(reject, axis=1), p)
    return first_accept


# ---------------------------------------------------------------------------
# Monte Carlo cutoff


def _gaussian_replicates(n, p, seed, start, stop):
    return np.stack([
        np.random.default_rng([seed, r]).standard_normal((n, p)) for r in range(start, stop)
    ])


def batched_ics_scores(x: np.ndarray):
    """(Cov, Cov4) invariant coordinates for a stack of samples, shape (R, n, p).

    Returns ``(scores, spectra, ok)``; ``ok`` marks replicates whose
    covariance was invertible.  No sign convention is applied.
    """
    R, n, p = x.shape
    xc = x - x.mean(axis=1, keepdims=True)
    cov = np.einsum("rni,rnj->rij", xc, xc) / n
    vals, vecs = np.linalg.eigh(cov)
    ok = vals[:, 0] > 1e-10 * vals[:, -1]
    vals = np.where(ok[:, None], vals, 1.0)
    whiten = np.einsum("rij,rj,rkj->rik", vecs, 1.0 / np.sqrt(vals), vecs)
    y = xc @ whiten
    d2 = np.einsum("rni,rni->rn", y, y)
    s2 = np.einsum("rn,rni,rnj->rij", d2 / (p + 2.0), y, y) / n
    lam, u = np.linalg.eigh(s2)
    lam, u = lam[:, ::-1], u[:, :, ::-1]
    return y @ u, lam, ok


@lru_cache(maxsize=64)
def _cutoff_cached(n, p, rule, level, reps, seed, chunk):
    pooled = []
    skipped = 0
    structured = 0
    for start in range(0, reps, chunk):
        stop = min(reps, start + chunk)
        z, _, ok = batched_ics_scores(_gaussian_replicates(n, p, seed, start, stop))
        skipped += int((~ok).sum())
        z = z[ok]
        if rule.mode == "dagostino":
            pv = stats.normaltest(z, axis=1).pvalue
            kap = _sequential_kappa(pv, rule.level)
            for k in range(1, p + 1):
                sel = kap == k
                if sel.any():
                    pooled.append(ics_distance(z[sel], k).ravel())
            structured += int((kap > 0).sum())
        else:
            pooled.append(ics_distance(z, rule.kappa).ravel())
            structured += z.shape[0]
    if skipped > 0.01 * reps:
        raise ICSError(f"{skipped} of {reps} Monte Carlo replicates failed; aborting")
    if not pooled:
        return float("inf"), skipped, structured
    return float(np.quantile(np.concatenate(pooled), level)), skipped, structured


def monte_carlo_cutoff(
    n: int,
    p: int,
    kappa_rule=None,
    level: float = DEFAULT_LEVEL,
    reps: int = DEFAULT_REPS,
    seed: int = 0,
    chunk: int = 250,
    full_output: bool = False,
):
    """``level`` quantile of squared ICS distances under standard Gaussian data.

    Replicate r draws an n x p standard Gaussian sample from the substream
    ``(seed, r)``, so the result depends only on the arguments (not on
    ``chunk``).  Distances of all observations in all replicates are pooled.
    ``kappa_rule`` is an int / fixed rule, or a D'Agostino rule re-applied to
    every replicate (replicates where nothing is selected contribute nothing).
    """
    if n <= p:
        raise DimensionError(f"cutoff needs n > p (n={n}, p={p})")
    if kappa_rule is None:
        raise ValueError("kappa_rule is required")
    rule = KappaRule.fixed(kappa_rule) if isinstance(kappa_rule, (int, np.integer)) else kappa_rule
    if rule.mode == "scree":
        rule = KappaRule.fixed(rule.kappa)
    if rule.mode == "fixed" and rule.kappa > p:
        raise ValueError(f"kappa={rule.kappa} exceeds p={p}")
    if not 0 < level < 1:
        raise ValueError("level must lie in (0, 1)")
    cut, skipped, structured = _cutoff_cached(int(n), int(p), rule, float(level), int(reps), int(seed), int(chunk))
    if not full_output:
        return cut
    return cut, {"reps": int(reps), "level": float(level), "seed": int(seed),
                 "kappa_rule": str(rule), "skipped": skipped, "replicates_used": structured}


# ---------------------------------------------------------------------------
# detection


@dataclass
class OutlierReport:
    kappa: int
    distances: np.ndarray
    cutoff: float
    flags: np.ndarray
    selection_mode: str
    mc_meta: dict
    spectrum: np.ndarray
    pvalues: Optional[np.ndarray] = None
    no_structure: bool = False
    solution: Optional[ICSSolution] = field(default=None, repr=False)
    unit_ids: Optional[List[str]] = None

    def to_dict(self) -> dict:
        return {
            "schema": SCHEMA,
            "n": int(self.distances.size),
            "p": int(self.spectrum.size),
            "kappa": int(self.kappa),
            "selection_mode": self.selection_mode,
            "bonferroni_schedule": BONFERRONI,
            "no_structure": bool(self.no_structure),
            "spectrum": self.spectrum.tolist(),
            "pvalues": None if self.pvalues is None else self.pvalues.tolist(),
            "cutoff": None if not np.isfinite(self.cutoff) else float(self.cutoff),
            "distances": self.distances.tolist(),
            "flags": [bool(v) for v in self.flags],
            "unit_ids": self.unit_ids,
            "mc_meta": self.mc_meta,
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)

    @property
    def flagged(self) -> np.ndarray:
        return np.flatnonzero(self.flags)


def _as_sample(data) -> CoordinateSample:
    if isinstance(data, CoordinateSample):
        return data
    data = list(data)
    if data and isinstance(data[0], DensitySpline):
        return density_sample(data)
    return CoordinateSample.euclidean(np.asarray(data, dtype=float))


def detect(
    data,
    kappa_rule: KappaRule = KappaRule.dagostino(),
    level: float = DEFAULT_LEVEL,
    reps: int = DEFAULT_REPS,
    seed: int = 0,
    reselect: bool = False,
    unit_ids=None,
) -> OutlierReport:
    """Flag outliers in a coordinate sample or a set of spline densities.

    The cutoff is simulated with the kappa chosen on the data held fixed,
    unless ``reselect`` is true, in which case the D'Agostino selection is
    repeated on every simulated sample.
    """
    sample = _as_sample(data)
    n, p = sample.coords.shape
    if n <= p:
        raise DimensionError(
            f"ICS needs more observations than the dimension (n={n}, p={p}); "
            "aim for n around 10 times p"
        )
    try:
        sol = solve_ics(sample, COV, COV4)
    except ConditioningError as exc:
        raise ConditioningError(
            f"{exc}; the coordinates are nearly collinear (for smoothed densities, "
            "try a smaller smoothing parameter or fewer knots)",
            smallest_eigenvalue=exc.smallest_eigenvalue,
            condition=exc.condition,
        ) from exc
    sel = select_components(sol.scores, kappa_rule)
    if sel.kappa == 0:
        warnings.warn("no invariant component rejects normality; nothing is flagged", stacklevel=2)
        meta = {"reps": int(reps), "level": float(level), "seed": int(seed),
                "kappa_rule": str(kappa_rule), "skipped": 0, "replicates_used": 0}
        return OutlierReport(0, np.zeros(n), float("inf"), np.zeros(n, dtype=bool), sel.mode,
                             meta, sol.spectrum, sel.pvalues, True, sol, unit_ids)
    dist = ics_distance(sol.scores, sel.kappa)
    mc_rule = kappa_rule if (reselect and kappa_rule.mode == "dagostino") else KappaRule.fixed(sel.kappa)
    cut, meta = monte_carlo_cutoff(n, p, mc_rule, level, reps, seed, full_output=True)
    meta["cutoff_kappa"] = "reselected" if mc_rule.mode == "dagostino" else sel.kappa
    meta["selection_rule"] = str(kappa_rule)
    return OutlierReport(sel.kappa, dist, cut, dist > cut, sel.mode, meta, sol.spectrum,
                         sel.pvalues, False, sol, unit_ids)


# ---------------------------------------------------------------------------
# preprocessing parameter sweep


@dataclass
class SweepCell:
    placement: str
    n_knots: int
    lam: float
    ok: bool
    flags: Optional[np.ndarray] = None
    kappa: Optional[int] = None
    error: Optional[str] = None


@dataclass
class SweepResult:
    unit_ids: List[str]
    cells: List[SweepCell]

    @property
    def cells_run(self) -> np.ndarray:
        return np.full(len(self.unit_ids), sum(c.ok for c in self.cells))

    @property
    def cells_flagged(self) -> np.ndarray:
        out = np.zeros(len(self.unit_ids), dtype=int)
        for c in self.cells:
            if c.ok:
                out += c.flags.astype(int)
        return out

    @property
    def frequency(self) -> np.ndarray:
        run = self.cells_run
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(run > 0, self.cells_flagged / np.maximum(run, 1), np.nan)

    def frequency_rows(self):
        for uid, r, f, q in zip(self.unit_ids, self.cells_run, self.cells_flagged, self.frequency):
            yield uid, int(r), int(f), float(q)


def make_spec(pooled, placement: str, n_knots: int, degree: int, interval=None) -> SplineSpaceSpec:
    interval = tuple(interval) if interval is not None else default_interval(pooled)
    if placement == "quantile":
        return SplineSpaceSpec.from_quantiles(pooled, degree, n_knots, interval)
    if placement in ("equally_spaced", "equal"):
        return SplineSpaceSpec.equally_spaced(interval, degree, n_knots)
    raise ValueError(f"unknown knot placement {placement!r}")


def fit_densities(samples: Sequence[np.ndarray], config: MPLConfig, workers: int = 1) -> List[DensitySpline]:
    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            return list(ex.map(lambda s: mpl_fit(s, config), samples))
    return [mpl_fit(s, config) for s in samples]


def param_grid_sweep(
    samples,
    knot_counts: Sequence[int],
    lambda_grid: Sequence[float],
    placements: Sequence[str] = ("quantile", "equally_spaced"),
    kappa_rule: KappaRule = KappaRule.dagostino(),
    degree: int = 4,
    penalty_order: int = 3,
    interval=None,
    level: float = DEFAULT_LEVEL,
    reps: int = DEFAULT_REPS,
    seed: int = 0,
    workers: int = 1,
) -> SweepResult:
    """Refit MPL densities and rerun detection for every (placement, k, lambda) cell.

    ``samples`` maps unit ids to raw samples (or is a sequence of raw
    samples).  A cell that fails (typically a conditioning error from
    multicollinear smoothed densities) is recorded as missing, and is not
    counted as a non-detection.
    """
    if isinstance(samples, dict):
        ids = [str(k) for k in samples]
        raw = [np.asarray(v, dtype=float) for v in samples.values()]
    else:
        raw = [np.asarray(v, dtype=float) for v in samples]
        ids = [str(i + 1) for i in range(len(raw))]
    pooled = np.concatenate(raw)
    cells = []
    for placement in placements:
        for k in knot_counts:
            for lam in lambda_grid:
                try:
                    spec = make_spec(pooled, placement, int(k), degree, interval)
                    cfg = MPLConfig(spec, float(lam), penalty_order=penalty_order)
                    dens = fit_densities(raw, cfg, workers)
                    with warnings.catch_warnings():
                        warnings.simplefilter("ignore")
                        rep = detect(dens, kappa_rule, level, reps, seed)
                    cells.append(SweepCell(placement, int(k), float(lam), True, rep.flags, rep.kappa))
                except (ICSError, ValueError, np.linalg.LinAlgError) as exc:
                    log.info("sweep cell %s k=%s lam=%g failed: %s", placement, k, lam, exc)
                    cells.append(SweepCell(placement, int(k), float(lam), False,
                                           error=f"{type(exc).__name__}: {exc}"))
    return SweepResult(ids, cells)
