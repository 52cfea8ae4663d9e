"""Bayes-space machinery for densities on an interval (a, b).

Densities are handled through their clr transform, which maps the Bayes
space B2(a, b) (Lebesgue reference) isometrically onto L2_0(a, b), the
square-integrable functions with zero integral.  Finite-dimensional
approximations live in spline spaces:

* B-splines of degree d on a clamped knot vector, dimension k + d + 1;
* ZB-splines, a basis of the zero-integral subspace, dimension p = k + d;
* CB-splines, the clr^{-1} images of ZB-splines.  A density has the same
  coordinates in the CB basis as its clr in the ZB basis.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np
from scipy.interpolate import BSpline

from .eucspace import DimensionError, GramBasis, ICSError
from .ics import ICSSolution, solve_ics
from .scatter import COV, COV4, CoordinateSample, WeightFunction

SCHEMA = "density-spline/1"
DENSITY_FLOOR = 1e-8
# nodes per knot interval when integrating non-polynomial integrands (exp of a spline)
FINE_NODES = 24


@dataclass(frozen=True, eq=False)
class SplineSpaceSpec:
    """Spline space on ``interval`` with ``degree`` d and ``interior_knots``.

    ``placement`` only documents how the knots were chosen.
    """

    interval: tuple
    degree: int
    interior_knots: tuple = ()
    placement: str = "equally_spaced"

    def __post_init__(self):
        a, b = (float(v) for v in self.interval)
        if not a < b:
            raise ValueError(f"interval must satisfy a < b, got ({a}, {b})")
        if int(self.degree) != self.degree or self.degree < 0:
            raise ValueError(f"degree must be a non-negative integer, got {self.degree}")
        knots = tuple(float(v) for v in np.asarray(self.interior_knots, dtype=float).ravel())
        arr = np.asarray((a,) + knots + (b,))
        if np.any(np.diff(arr) <= 0):
            raise ValueError("interior knots must be strictly increasing and strictly inside (a, b)")
        object.__setattr__(self, "interval", (a, b))
        object.__setattr__(self, "degree", int(self.degree))
        object.__setattr__(self, "interior_knots", knots)

    def __eq__(self, other):
        if not isinstance(other, SplineSpaceSpec):
            return NotImplemented
        return (self.interval, self.degree, self.interior_knots) == (
            other.interval, other.degree, other.interior_knots)

    def __hash__(self):
        return hash((self.interval, self.degree, self.interior_knots))

    @classmethod
    def equally_spaced(cls, interval, degree: int, n_knots: int) -> "SplineSpaceSpec":
        a, b = interval
        knots = np.linspace(a, b, n_knots + 2)[1:-1]
        return cls((a, b), degree, tuple(knots), "equally_spaced")

    @classmethod
    def from_quantiles(cls, pooled_sample, degree: int, n_knots: int, interval=None) -> "SplineSpaceSpec":
        """Knots at the quantiles ``i/(k+1)`` of the pooled sample."""
        x = np.asarray(pooled_sample, dtype=float).ravel()
        if interval is None:
            interval = default_interval(x)
        levels = np.arange(1, n_knots + 1) / (n_knots + 1)
        knots = np.quantile(x, levels)
        return cls(tuple(interval), degree, tuple(knots), "quantile")

    @property
    def k(self) -> int:
        return len(self.interior_knots)

    @property
    def dim(self) -> int:
        """Dimension of the ZB (and CB) space, k + d."""
        return self.k + self.degree

    @property
    def n_bsplines(self) -> int:
        return self.k + self.degree + 1

    @property
    def length(self) -> float:
        return self.interval[1] - self.interval[0]

    @cached_property
    def knot_vector(self) -> np.ndarray:
        a, b = self.interval
        d = self.degree
        return np.concatenate([[a] * (d + 1), self.interior_knots, [b] * (d + 1)])

    @property
    def breakpoints(self) -> np.ndarray:
        a, b = self.interval
        return np.concatenate([[a], self.interior_knots, [b]])

    def to_dict(self) -> dict:
        return {
            "interval": list(self.interval),
            "degree": self.degree,
            "knots": list(self.interior_knots),
            "placement": self.placement,
        }

    @classmethod
    def from_dict(cls, d) -> "SplineSpaceSpec":
        return cls(tuple(d["interval"]), int(d["degree"]), tuple(d["knots"]),
                   d.get("placement", "equally_spaced"))


def default_interval(x, margin: float = 0.01):
    """Sample range widened by ``margin`` of its length on each side."""
    x = np.asarray(x, dtype=float)
    lo, hi = float(np.min(x)), float(np.max(x))
    pad = margin * (hi - lo) if hi > lo else max(abs(lo), 1.0) * margin
    return (lo - pad, hi + pad)


def gauss_legendre(spec: SplineSpaceSpec, nodes_per_interval: int):
    """Composite Gauss-Legendre nodes and weights over the knot intervals."""
    u, w = np.polynomial.legendre.leggauss(nodes_per_interval)
    bp = spec.breakpoints
    lo, hi = bp[:-1, None], bp[1:, None]
    half = 0.5 * (hi - lo)
    x = (lo + hi) * 0.5 + half * u
    return x.ravel(), (half * w).ravel()


def _check_points(spec, points):
    x = np.atleast_1d(np.asarray(points, dtype=float))
    a, b = spec.interval
    tol = 1e-12 * max(1.0, abs(a), abs(b))
    if np.any(x < a - tol) or np.any(x > b + tol):
        bad = x[(x < a - tol) | (x > b + tol)]
        raise ValueError(f"points outside the interval [{a}, {b}]: {bad[:5].tolist()}")
    return np.clip(x, a, b)


def bspline_design(spec: SplineSpaceSpec, points, deriv: int = 0) -> np.ndarray:
    """Values (or derivatives) of all B-splines at ``points``; shape (len(points), k+d+1)."""
    x = _check_points(spec, points)
    K = spec.n_bsplines
    # points are clipped to [a, b]; extrapolation only resolves the closed right end
    basis = BSpline(spec.knot_vector, np.eye(K), spec.degree, extrapolate=True)
    if deriv:
        if deriv > spec.degree:
            return np.zeros((x.size, K))
        basis = basis.derivative(deriv)
    return basis(x)


def bspline_integrals(spec: SplineSpaceSpec) -> np.ndarray:
    """Closed-form integrals ``(t_{j+d+1} - t_j)/(d+1)`` of the B-splines."""
    t = spec.knot_vector
    d = spec.degree
    K = spec.n_bsplines
    return (t[d + 1:d + 1 + K] - t[:K]) / (d + 1)


def bspline_gram(spec: SplineSpaceSpec, deriv: int = 0) -> np.ndarray:
    """``int B_j^(m) B_k^(m)`` computed exactly with d + 2 Gauss nodes per interval."""
    x, w = gauss_legendre(spec, spec.degree + 2)
    B = bspline_design(spec, x, deriv=deriv)
    g = (B * w[:, None]).T @ B
    return 0.5 * (g + g.T)


def penalty_matrix(spec: SplineSpaceSpec, order: int) -> np.ndarray:
    return bspline_gram(spec, deriv=order)


@dataclass(frozen=True, eq=False)
class ZBBasis:
    """ZB-spline basis written in the B-spline basis: ``Z = B @ matrix``.

    ``Z_j = B_j - (int B_j / int B_K) B_K`` for j < K, K the last B-spline.
    """

    spec: SplineSpaceSpec
    matrix: np.ndarray

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]

    def evaluate(self, points, deriv: int = 0) -> np.ndarray:
        return bspline_design(self.spec, points, deriv=deriv) @ self.matrix


def zb_basis(spec: SplineSpaceSpec) -> ZBBasis:
    K = spec.n_bsplines
    ints = bspline_integrals(spec)
    m = np.zeros((K, K - 1))
    m[:K - 1, :] = np.eye(K - 1)
    m[K - 1, :] = -ints[:K - 1] / ints[K - 1]
    return ZBBasis(spec, m)


_GRAM_CACHE: dict = {}


def gram_zb(spec: SplineSpaceSpec) -> np.ndarray:
    """L2(a, b) Gram matrix of the ZB basis."""
    key = hash(spec), spec
    hit = _GRAM_CACHE.get(key)
    if hit is None:
        m = zb_basis(spec).matrix
        hit = m.T @ bspline_gram(spec) @ m
        hit = 0.5 * (hit + hit.T)
        hit.setflags(write=False)
        if len(_GRAM_CACHE) > 256:
            _GRAM_CACHE.clear()
        _GRAM_CACHE[key] = hit
    return hit


def bspline_to_zb(spec: SplineSpaceSpec, coefs) -> np.ndarray:
    """ZB coordinates of the zero-integral projection of ``sum c_j B_j``.

    Since the B-splines sum to one, removing the mean of the function is a
    shift of all coefficients; the remaining first K-1 coefficients are the
    ZB coordinates.
    """
    c = np.asarray(coefs, dtype=float)
    ints = bspline_integrals(spec)
    shift = (c @ ints) / spec.length
    return (c - shift[..., None] if c.ndim > 1 else c - shift)[..., :-1]


def zb_to_bspline(spec: SplineSpaceSpec, zb_coords) -> np.ndarray:
    return np.asarray(zb_coords, dtype=float) @ zb_basis(spec).matrix.T


# ---------------------------------------------------------------------------
# grid-based clr transforms


def _trapz(y, t):
    return np.trapezoid(y, t, axis=-1)


def _grid(grid, interval=None):
    t = np.asarray(grid, dtype=float)
    if t.ndim != 1 or t.size < 2 or np.any(np.diff(t) <= 0):
        raise ValueError("grid must be a strictly increasing 1-D array")
    if interval is not None:
        a, b = interval
        if t[0] < a - 1e-12 or t[-1] > b + 1e-12:
            raise ValueError("grid exceeds the interval")
    return t


def clr_fn(f, grid, interval=None) -> np.ndarray:
    """clr of density values on a grid: ``log f`` minus its average (trapezoid rule)."""
    t = _grid(grid, interval)
    f = np.asarray(f, dtype=float)
    if np.any(~np.isfinite(f)) or np.any(f <= 0):
        raise ValueError(
            "clr needs strictly positive density values; "
            f"apply density_floor (values below {DENSITY_FLOOR:g} are floored) first"
        )
    lf = np.log(f)
    return lf - (_trapz(lf, t) / (t[-1] - t[0]))[..., None]


def clr_inv(u, grid, interval=None) -> np.ndarray:
    """Normalised exponential: density values with unit trapezoid integral."""
    t = _grid(grid, interval)
    u = np.asarray(u, dtype=float)
    if not np.all(np.isfinite(u)):
        raise ValueError("clr values must be finite")
    e = np.exp(u - u.max(axis=-1, keepdims=True))
    return e / _trapz(e, t)[..., None]


def density_floor(f, grid, epsilon: float = DENSITY_FLOOR) -> np.ndarray:
    """Replace values below ``epsilon`` by ``epsilon`` and renormalise to unit integral."""
    t = _grid(grid)
    f = np.maximum(np.asarray(f, dtype=float), epsilon)
    return f / _trapz(f, t)[..., None]


# ---------------------------------------------------------------------------
# densities as splines


@dataclass(frozen=True, eq=False)
class DensitySpline:
    """Density whose clr is ``sum_j zb_coords[j] Z_j``."""

    spec: SplineSpaceSpec
    zb_coords: np.ndarray

    def __post_init__(self):
        c = np.array(self.zb_coords, dtype=float).ravel()
        if c.size != self.spec.dim:
            raise DimensionError(f"expected {self.spec.dim} ZB coordinates, got {c.size}")
        c.setflags(write=False)
        object.__setattr__(self, "zb_coords", c)

    @property
    def bspline_coords(self) -> np.ndarray:
        return zb_to_bspline(self.spec, self.zb_coords)

    def clr(self, points) -> np.ndarray:
        return bspline_design(self.spec, points) @ self.bspline_coords

    @cached_property
    def log_normalizer(self) -> float:
        x, w = gauss_legendre(self.spec, FINE_NODES)
        g = self.clr(x)
        top = g.max()
        return float(top + np.log(np.sum(w * np.exp(g - top))))

    def log_density(self, points) -> np.ndarray:
        return self.clr(points) - self.log_normalizer

    def density(self, points) -> np.ndarray:
        return np.exp(self.log_density(points))

    def to_dict(self) -> dict:
        d = {"schema": SCHEMA}
        d.update(self.spec.to_dict())
        d["zb_coords"] = self.zb_coords.tolist()
        return d

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_dict(cls, d) -> "DensitySpline":
        if d.get("schema") != SCHEMA:
            raise ValueError(f"unsupported schema {d.get('schema')!r}, expected {SCHEMA!r}")
        return cls(SplineSpaceSpec.from_dict(d), np.asarray(d["zb_coords"], dtype=float))

    @classmethod
    def from_json(cls, text) -> "DensitySpline":
        return cls.from_dict(json.loads(text))

    def write_grid_csv(self, path, n_points: int = 512) -> None:
        """CSV with columns t, f, clr_f on a regular grid."""
        t = np.linspace(*self.spec.interval, n_points)
        clr = self.clr(t)
        f = np.exp(clr - self.log_normalizer)
        with open(path, "w", newline="", encoding="utf-8") as fh:
            wr = csv.writer(fh)
            wr.writerow(["t", "f", "clr_f"])
            for row in zip(t, f, clr):
                wr.writerow([repr(float(v)) for v in row])


def perturb(f: DensitySpline, g: DensitySpline) -> DensitySpline:
    """Bayes-space sum ``f (+) g``: clr values add."""
    if f.spec != g.spec:
        raise ValueError("densities live in different spline spaces")
    return DensitySpline(f.spec, f.zb_coords + g.zb_coords)


def power(alpha: float, f: DensitySpline) -> DensitySpline:
    return DensitySpline(f.spec, alpha * f.zb_coords)


def _as_log_values(obj, x):
    if isinstance(obj, DensitySpline):
        return obj.clr(x)
    return np.log(np.asarray(obj(x), dtype=float))


def bayes_inner(f, g, grid=None) -> float:
    """Bayes inner product ``<clr f, clr g>`` in L2_0 (single integral).

    ``f`` and ``g`` are DensitySplines, or density value arrays on a shared
    ``grid`` (trapezoid rule).
    """
    if isinstance(f, DensitySpline) and isinstance(g, DensitySpline):
        if f.spec.interval != g.spec.interval:
            raise ValueError("densities are defined on different intervals")
        # union of breakpoints so the quadrature is exact for spline products
        bp = np.union1d(f.spec.breakpoints, g.spec.breakpoints)
        u, w = np.polynomial.legendre.leggauss(max(f.spec.degree, g.spec.degree) + 2)
        lo, hi = bp[:-1, None], bp[1:, None]
        x = ((lo + hi) * 0.5 + 0.5 * (hi - lo) * u).ravel()
        wt = (0.5 * (hi - lo) * w).ravel()
        return float(np.sum(wt * f.clr(x) * g.clr(x)))
    if grid is None:
        raise ValueError("grid required for density values")
    t = _grid(grid)
    return float(_trapz(clr_fn(f, t) * clr_fn(g, t), t))


def bayes_inner_double(f, g, grid=None, nodes_per_interval: int = FINE_NODES) -> float:
    """Same inner product through the double integral of log-ratio differences.

    ``1/(2L) int int (log f(t) - log f(s)) (log g(t) - log g(s)) dt ds``.
    """
    if isinstance(f, DensitySpline) and isinstance(g, DensitySpline):
        if f.spec.interval != g.spec.interval:
            raise ValueError("densities are defined on different intervals")
        bp = np.union1d(f.spec.breakpoints, g.spec.breakpoints)
        u, w = np.polynomial.legendre.leggauss(nodes_per_interval)
        lo, hi = bp[:-1, None], bp[1:, None]
        x = ((lo + hi) * 0.5 + 0.5 * (hi - lo) * u).ravel()
        wt = (0.5 * (hi - lo) * w).ravel()
        lf, lg = f.log_density(x), g.log_density(x)
        L = f.spec.length
    else:
        if grid is None:
            raise ValueError("grid required for density values")
        x = _grid(grid)
        wt = np.zeros_like(x)
        dx = np.diff(x)
        wt[:-1] += dx / 2
        wt[1:] += dx / 2
        lf = np.log(np.asarray(f, dtype=float))
        lg = np.log(np.asarray(g, dtype=float))
        L = x[-1] - x[0]
    df = lf[:, None] - lf[None, :]
    dg = lg[:, None] - lg[None, :]
    return float(wt @ (df * dg) @ wt / (2.0 * L))


def density_sample(densities: Sequence[DensitySpline]) -> CoordinateSample:
    densities = list(densities)
    if not densities:
        raise DimensionError("empty density sample")
    spec = densities[0].spec
    for f in densities[1:]:
        if f.spec != spec:
            raise ValueError("all densities must share the same spline space")
    coords = np.vstack([f.zb_coords for f in densities])
    return CoordinateSample(coords, GramBasis(gram_zb(spec)))


def ics_density(
    densities: Sequence[DensitySpline],
    w1: WeightFunction = COV,
    w2: WeightFunction = COV4,
) -> ICSSolution:
    """ICS for a sample of compositional spline densities (ZB coordinates + ZB Gram)."""
    sample = density_sample(densities)
    n, p = sample.coords.shape
    if n <= p:
        raise DimensionError(
            f"ICS needs more densities than the spline dimension (n={n}, p={p}); "
            "choose the number of knots so that n is around 10 times the dimension p = k + d"
        )
    sol = solve_ics(sample, w1, w2)
    sol.meta["spline_space"] = densities[0].spec.to_dict()
    return sol


def eigendensities(solution: ICSSolution, spec: SplineSpaceSpec, points, dual: bool = True) -> np.ndarray:
    """clr^{-1} of the (dual) eigenobjects evaluated at ``points``; shape (p, len(points)).

    Normalised by quadrature over the whole interval, not over ``points``.
    """
    if solution.dim != spec.dim:
        raise DimensionError("solution and spline space dimensions differ")
    coords = solution.dual_coords if dual else solution.eigenbasis_coords
    return np.vstack([DensitySpline(spec, coords[:, j]).density(points) for j in range(spec.dim)])


def require_same_spec(densities) -> SplineSpaceSpec:
    specs = {f.spec for f in densities}
    if len(specs) != 1:
        raise ICSError("densities must share one spline space")
    return specs.pop()
