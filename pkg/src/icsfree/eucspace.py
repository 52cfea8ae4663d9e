"""Symmetric positive definite matrix helpers and Gram-matrix bookkeeping.

A finite-dimensional Euclidean space is represented throughout the package by
the Gram matrix of a chosen basis.  Nothing here depends on what the basis
elements actually are (vectors, compositions, splines).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

# smallest admissible eigenvalue, relative to the largest one
PD_RELATIVE_FLOOR = 1e-10
DEFAULT_MAX_CONDITION = 1e12


class ICSError(Exception):
    """Base class for errors raised by this package."""


class NotPositiveDefiniteError(ICSError, ValueError):
    """Matrix is not symmetric positive definite."""

    def __init__(self, message, smallest_eigenvalue=None):
        super().__init__(message)
        self.smallest_eigenvalue = smallest_eigenvalue


class ConditioningError(NotPositiveDefiniteError):
    """Matrix is (numerically) singular; typical of multicollinear data."""

    def __init__(self, message, condition=None, smallest_eigenvalue=None):
        super().__init__(message, smallest_eigenvalue=smallest_eigenvalue)
        self.condition = condition


class DimensionError(ICSError, ValueError):
    """Shapes are inconsistent or the sample is too small for the dimension."""


def _check_symmetric(m: np.ndarray, rtol: float = 1e-12) -> np.ndarray:
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {m.shape}")
    scale = max(np.max(np.abs(m)), np.finfo(float).tiny)
    asym = np.max(np.abs(m - m.T))
    if asym > rtol * scale:
        raise NotPositiveDefiniteError(
            f"matrix is not symmetric (max asymmetry {asym:.3e}, scale {scale:.3e})"
        )
    return 0.5 * (m + m.T)


def _spd_eigh(m, max_condition=None):
    m = _check_symmetric(m)
    vals, vecs = np.linalg.eigh(m)
    lo, hi = vals[0], vals[-1]
    if hi <= 0 or lo <= PD_RELATIVE_FLOOR * hi:
        cond = np.inf if lo <= 0 else hi / lo
        raise ConditioningError(
            f"matrix is not positive definite: smallest eigenvalue {lo:.3e}, "
            f"largest {hi:.3e} (condition estimate {cond:.3e})",
            condition=cond,
            smallest_eigenvalue=lo,
        )
    cond = hi / lo
    if max_condition is not None and cond > max_condition:
        raise ConditioningError(
            f"matrix is ill-conditioned: condition estimate {cond:.3e} exceeds "
            f"{max_condition:.1e} (smallest eigenvalue {lo:.3e})",
            condition=cond,
            smallest_eigenvalue=lo,
        )
    return vals, vecs


def spd_sqrt(m: np.ndarray) -> np.ndarray:
    """Unique symmetric positive definite square root of ``m``."""
    vals, vecs = _spd_eigh(m)
    r = (vecs * np.sqrt(vals)) @ vecs.T
    return 0.5 * (r + r.T)


def spd_inv_sqrt(m: np.ndarray, max_condition: float = DEFAULT_MAX_CONDITION) -> np.ndarray:
    """Inverse of the symmetric square root of ``m``.

    Raises
    ------
    ConditioningError
        If ``m`` is singular or its condition number exceeds ``max_condition``.
        The estimate is attached as ``err.condition``.
    """
    vals, vecs = _spd_eigh(m, max_condition=max_condition)
    r = (vecs / np.sqrt(vals)) @ vecs.T
    return 0.5 * (r + r.T)


def spd_inv(m: np.ndarray, max_condition: float = DEFAULT_MAX_CONDITION) -> np.ndarray:
    vals, vecs = _spd_eigh(m, max_condition=max_condition)
    r = (vecs / vals) @ vecs.T
    return 0.5 * (r + r.T)


@dataclass(frozen=True)
class GramBasis:
    """Basis of a p-dimensional Euclidean space, known through its Gram matrix.

    ``gram[j, k]`` is the inner product of basis elements ``j`` and ``k``.
    """

    gram: np.ndarray
    labels: Optional[Sequence[str]] = field(default=None, compare=False)

    def __post_init__(self):
        g = _check_symmetric(self.gram)
        _spd_eigh(g)
        g.setflags(write=False)
        object.__setattr__(self, "gram", g)
        if self.labels is not None and len(self.labels) != g.shape[0]:
            raise DimensionError(
                f"{len(self.labels)} labels given for a basis of dimension {g.shape[0]}"
            )

    @classmethod
    def orthonormal(cls, dim: int, labels=None) -> "GramBasis":
        return cls(np.eye(dim), labels=labels)

    @property
    def dim(self) -> int:
        return self.gram.shape[0]

    def inner(self, x, y) -> np.ndarray:
        """Inner products of coordinate vectors (broadcast over leading axes)."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        return np.einsum("...i,ij,...j->...", x, self.gram, y)

    def same_space(self, other: "GramBasis", rtol: float = 1e-12) -> bool:
        if self.dim != other.dim:
            return False
        scale = np.max(np.abs(self.gram))
        return bool(np.max(np.abs(self.gram - other.gram)) <= rtol * scale)
