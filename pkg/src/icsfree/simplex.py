"""Compositional data: log-ratio coordinates and ICS on the simplex.

Compositions are never closed (renormalised); every map below is scale
invariant, so ``x`` and ``c * x`` give identical results.
"""
from __future__ import annotations

import csv
from typing import Optional, Sequence

import numpy as np

from .eucspace import DimensionError, GramBasis
from .ics import ICSSolution, solve_ics
from .scatter import COV, COV4, CoordinateSample, WeightFunction


def _positive(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape[-1] < 2:
        raise DimensionError("a composition needs at least two parts")
    if not np.all(np.isfinite(x)) or np.any(x <= 0):
        raise ValueError("compositions must have strictly positive, finite parts")
    return x


def clr_comp(x) -> np.ndarray:
    """Centred log-ratio transform (works row-wise on 2-D input)."""
    lx = np.log(_positive(x))
    return lx - lx.mean(axis=-1, keepdims=True)


def clr_comp_inv(u) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    e = np.exp(u - u.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def alr_coords(x, j: int) -> np.ndarray:
    """Additive log-ratio coordinates with respect to part ``j`` (0-based).

    Returns ``log(x_i / x_j)`` for every ``i != j``.
    """
    x = _positive(x)
    D = x.shape[-1]
    if not 0 <= j < D:
        raise IndexError(f"alr index {j} out of range for {D} parts")
    lx = np.log(x)
    return np.delete(lx - lx[..., j:j + 1], j, axis=-1)


def gram_alr(p: int) -> np.ndarray:
    """Gram matrix ``I_p - 11^T/(p+1)`` of the basis behind any alr transform."""
    if p < 1:
        raise ValueError("p must be at least 1")
    return np.eye(p) - np.full((p, p), 1.0 / (p + 1))


def perturb(x, y) -> np.ndarray:
    """Aitchison perturbation (component-wise product, left unclosed)."""
    return _positive(x) * _positive(y)


def coda_sample(compositions, j: int = 0) -> CoordinateSample:
    comps = _positive(np.atleast_2d(compositions))
    p = comps.shape[1] - 1
    return CoordinateSample(alr_coords(comps, j), GramBasis(gram_alr(p)))


def ics_coda(
    compositions,
    j: int = 0,
    w1: WeightFunction = COV,
    w2: WeightFunction = COV4,
) -> ICSSolution:
    """ICS on the simplex through alr_j coordinates and their Gram matrix.

    The spectrum does not depend on ``j``.
    """
    return solve_ics(coda_sample(compositions, j), w1, w2)


def read_compositions_csv(path, id_column: Optional[str] = None):
    """Read a header-first CSV of positive parts; returns ``(ids, parts, part_names)``."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [r for r in reader if r]
    names: Sequence[str] = header
    ids = [str(i + 1) for i in range(len(rows))]
    if id_column is not None:
        k = header.index(id_column)
        ids = [r[k] for r in rows]
        rows = [r[:k] + r[k + 1:] for r in rows]
        names = header[:k] + header[k + 1:]
    parts = _positive(np.array(rows, dtype=float))
    return ids, parts, list(names)
