"""Spline density estimation: maximum penalised likelihood and clr smoothing.

``mpl_fit`` turns a raw sample into a compositional spline density by
maximising

    (1/N) sum_i g(X_i) - log int_a^b exp(g) - lam * int_a^b (g^(m))^2

over splines g = sum_j c_j B_j.  The objective is concave; it is maximised
by damped Newton iterations started from g = 0 (the uniform density).  g is
only defined up to an additive constant, which is removed at the end by
projecting onto the zero-integral subspace.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .bayes_spline import (
    DensitySpline,
    SplineSpaceSpec,
    bspline_design,
    bspline_to_zb,
    density_floor,
    gauss_legendre,
    penalty_matrix,
    zb_basis,
)
from .eucspace import ConditioningError, DimensionError, ICSError

__all__ = [
    "MPLConfig",
    "MPLResult",
    "MPLProblem",
    "ConvergenceError",
    "mpl_fit",
    "density_floor",
    "smooth_clr_spline",
]

ARMIJO = 1e-4
NEWTON_RIDGE = 1e-10


class ConvergenceError(ICSError, RuntimeError):
    def __init__(self, message, gradient_norm=None, iterations=None):
        super().__init__(message)
        self.gradient_norm = gradient_norm
        self.iterations = iterations


@dataclass(frozen=True)
class MPLConfig:
    spec: SplineSpaceSpec
    lam: float = 1.0
    penalty_order: int = 3
    max_iter: int = 200
    grad_tol: float = 1e-8
    nodes_per_interval: Optional[int] = None

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError(f"smoothing parameter must be positive, got {self.lam}")
        if self.penalty_order > self.spec.degree:
            raise ValueError(
                f"penalty order m={self.penalty_order} exceeds the spline degree "
                f"d={self.spec.degree}"
            )

    @property
    def nodes(self) -> int:
        return self.nodes_per_interval or 2 * self.spec.degree + 2


@dataclass
class MPLResult:
    density: DensitySpline
    bspline_coefs: np.ndarray
    iterations: int
    gradient_norm: float
    log_likelihood: float
    penalty: float
    objective_trace: List[float] = field(default_factory=list)


class MPLProblem:
    """Penalised log-likelihood of a sample, as a function of B-spline coefficients."""

    def __init__(self, sample, config: MPLConfig):
        spec = config.spec
        x = np.asarray(sample, dtype=float).ravel()
        if x.size < 10:
            raise DimensionError(f"MPL needs at least 10 observations, got {x.size}")
        a, b = spec.interval
        if np.any(x < a) or np.any(x > b) or not np.all(np.isfinite(x)):
            bad = x[~((x >= a) & (x <= b))]
            raise ValueError(f"sample values outside the interval [{a}, {b}]: {bad[:5].tolist()}")
        self.config = config
        self.n = x.size
        self.mean_design = bspline_design(spec, x).mean(axis=0)
        xq, self.wq = gauss_legendre(spec, config.nodes)
        self.bq = bspline_design(spec, xq)
        self.pen = penalty_matrix(spec, config.penalty_order)
        # square-root factor so the penalty value is a sum of squares; c^T P c
        # cancels badly once the coefficients are large
        xp, wp = gauss_legendre(spec, spec.degree + 2)
        self.pen_root = np.sqrt(wp)[:, None] * bspline_design(spec, xp, deriv=config.penalty_order)
        self.lam = config.lam

    @property
    def dim(self) -> int:
        return self.mean_design.size

    def _log_normalizer(self, c):
        g = self.bq @ c
        top = g.max()
        e = self.wq * np.exp(g - top)
        s = e.sum()
        return top + np.log(s), e / s

    def parts(self, c):
        """``(mean log-likelihood, penalty integral)`` at ``c``."""
        logz, _ = self._log_normalizer(c)
        r = self.pen_root @ c
        return float(self.mean_design @ c - logz), float(r @ r)

    def value(self, c) -> float:
        ll, pen = self.parts(c)
        return ll - self.lam * pen

    def gradient(self, c) -> np.ndarray:
        _, pi = self._log_normalizer(c)
        return self.mean_design - self.bq.T @ pi - 2.0 * self.lam * (self.pen_root.T @ (self.pen_root @ c))

    def hessian(self, c) -> np.ndarray:
        _, pi = self._log_normalizer(c)
        mu = self.bq.T @ pi
        cov = (self.bq * pi[:, None]).T @ self.bq - np.outer(mu, mu)
        h = -cov - 2.0 * self.lam * self.pen
        return 0.5 * (h + h.T)


def mpl_fit(sample, config: MPLConfig, full_output: bool = False):
    """Penalised maximum likelihood spline density of ``sample``.

    Returns a :class:`DensitySpline`, or an :class:`MPLResult` when
    ``full_output`` is true.

    Raises
    ------
    ConvergenceError
        When the gradient norm is still above ``config.grad_tol`` after
        ``config.max_iter`` Newton iterations.
    """
    prob = MPLProblem(sample, config)
    K = prob.dim
    ones = np.ones(K) / np.sqrt(K)
    c = np.zeros(K)
    f = prob.value(c)
    trace = [f]
    grad = prob.gradient(c)
    gnorm = float(np.linalg.norm(grad))
    it = 0
    while gnorm > config.grad_tol and it < config.max_iter:
        neg_h = -prob.hessian(c)
        # constant functions are a null direction of the objective
        ridge = NEWTON_RIDGE * max(1.0, float(np.max(np.diag(neg_h))))
        step = np.linalg.solve(neg_h + ridge * np.outer(ones, ones), grad)
        slope = float(grad @ step)
        if slope <= 0:
            break
        t = 1.0
        while True:
            c_new = c + t * step
            f_new = prob.value(c_new)
            if f_new >= f + ARMIJO * t * slope:
                break
            t *= 0.5
            if t < 1e-12:
                c_new, f_new = c, f
                break
        it += 1
        if f_new == f and np.array_equal(c_new, c):
            # no representable ascent left along the Newton direction
            break
        c, f = c_new, f_new
        trace.append(f)
        grad = prob.gradient(c)
        gnorm = float(np.linalg.norm(grad))

    if gnorm > config.grad_tol and not _stalled_at_optimum(prob, c, grad):
        raise ConvergenceError(
            f"MPL did not converge after {it} iterations (gradient norm {gnorm:.3e})",
            gradient_norm=gnorm,
            iterations=it,
        )
    density = DensitySpline(config.spec, bspline_to_zb(config.spec, c))
    if not full_output:
        return density
    ll, pen = prob.parts(c)
    return MPLResult(density, c, it, gnorm, ll, pen, trace)


def _stalled_at_optimum(prob, c, grad) -> bool:
    # gradient floor set by rounding in lam * P @ c
    scale = 2.0 * prob.lam * np.linalg.norm(prob.pen, 2) * max(1.0, np.linalg.norm(c))
    return float(np.linalg.norm(grad)) <= 1e3 * np.finfo(float).eps * scale


def smooth_clr_spline(grid, clr_values, spec: SplineSpaceSpec, lam: float = 0.0, penalty_order: int = 2):
    """Penalised least-squares fit of discretised clr values in the ZB basis.

    Minimises ``||D c + alpha - y||^2 + lam * c^T P c`` where D is the ZB design
    at the grid points and alpha an unpenalised constant, which makes the fit
    blind to constant shifts of ``y`` (they do not change the density).

    ``clr_values`` may be 1-D (one curve) or 2-D (one curve per row); a
    DensitySpline or a list of them is returned accordingly.
    """
    t = np.asarray(grid, dtype=float)
    y = np.asarray(clr_values, dtype=float)
    single = y.ndim == 1
    y = np.atleast_2d(y)
    if y.shape[1] != t.size:
        raise DimensionError(f"{y.shape[1]} values for {t.size} grid points")
    p = spec.dim
    if np.unique(t).size < p + 1:
        raise DimensionError(
            f"need at least {p + 1} distinct grid points for a {p}-dimensional spline space"
        )
    zb = zb_basis(spec)
    design = np.column_stack([zb.evaluate(t), np.ones(t.size)])
    pen = np.zeros((p + 1, p + 1))
    if lam > 0:
        if penalty_order > spec.degree:
            raise ValueError("penalty order exceeds the spline degree")
        pen[:p, :p] = zb.matrix.T @ penalty_matrix(spec, penalty_order) @ zb.matrix
    lhs = design.T @ design + lam * pen
    s = np.linalg.svd(lhs, compute_uv=False)
    if s[-1] <= 1e-12 * s[0]:
        raise ConditioningError(
            "rank-deficient design for clr smoothing; use fewer knots or more grid points",
            condition=s[0] / s[-1] if s[-1] > 0 else np.inf,
        )
    coef = np.linalg.solve(lhs, design.T @ y.T).T
    out = [DensitySpline(spec, row[:p]) for row in coef]
    return out[0] if single else out
