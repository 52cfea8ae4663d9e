"""Empirical weighted covariance operators acting on coordinate samples.

The matrices returned here are computed on the raw coordinate rows.  Which
coordinates are passed in (raw ``[x]_B``, Gram-transformed ``G [x]_B`` ...)
is the caller's business; :mod:`icsfree.ics` applies the Gram transport
before calling into this module.  Since every weighted covariance is affine
equivariant, the Mahalanobis norms used for the weights do not depend on
that choice.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .eucspace import (
    ConditioningError,
    DimensionError,
    GramBasis,
    ICSError,
    spd_inv_sqrt,
)

CHUNK_SIZE = 1024


@dataclass(frozen=True)
class WeightFunction:
    """Weight ``w`` applied to the Mahalanobis norm of each observation.

    ``kind`` is ``"identity"`` (w = 1, plain covariance), ``"cov4"``
    (w(x) = x / sqrt(p + 2), fourth-moment scatter) or ``"custom"``.
    """

    kind: str = "identity"
    func: Optional[Callable[[np.ndarray], np.ndarray]] = None
    name: Optional[str] = None

    def __post_init__(self):
        if self.kind not in ("identity", "cov4", "custom"):
            raise ValueError(f"unknown weight kind {self.kind!r}")
        if self.kind == "custom" and self.func is None:
            raise ValueError("custom weight requires func")

    @classmethod
    def identity(cls) -> "WeightFunction":
        return cls("identity")

    @classmethod
    def cov4(cls) -> "WeightFunction":
        return cls("cov4")

    @classmethod
    def custom(cls, func, name=None) -> "WeightFunction":
        return cls("custom", func=func, name=name)

    @property
    def label(self) -> str:
        if self.kind == "custom":
            return self.name or "custom"
        return {"identity": "Cov", "cov4": "Cov4"}[self.kind]

    def __call__(self, d, p: Optional[int] = None) -> np.ndarray:
        d = np.asarray(d, dtype=float)
        if self.kind == "identity":
            return np.ones_like(d)
        if self.kind == "cov4":
            if p is None:
                raise ValueError("cov4 weight needs the ambient dimension p")
            return d / np.sqrt(p + 2.0)
        return np.asarray(self.func(d), dtype=float)


COV = WeightFunction.identity()
COV4 = WeightFunction.cov4()


@dataclass(frozen=True)
class CoordinateSample:
    """n observations given as coordinate rows in ``basis``."""

    coords: np.ndarray
    basis: GramBasis

    def __post_init__(self):
        c = np.array(self.coords, dtype=float)
        if c.ndim != 2:
            raise DimensionError(f"coords must be 2-D, got shape {c.shape}")
        if c.shape[1] != self.basis.dim:
            raise DimensionError(
                f"coords have {c.shape[1]} columns but the basis has dimension "
                f"{self.basis.dim}"
            )
        if not np.all(np.isfinite(c)):
            raise ValueError("coords contain non-finite values")
        c.setflags(write=False)
        object.__setattr__(self, "coords", c)

    @classmethod
    def euclidean(cls, coords) -> "CoordinateSample":
        coords = np.asarray(coords, dtype=float)
        return cls(coords, GramBasis.orthonormal(coords.shape[1]))

    @property
    def n(self) -> int:
        return self.coords.shape[0]

    @property
    def dim(self) -> int:
        return self.coords.shape[1]


def _rows(sample) -> np.ndarray:
    if isinstance(sample, CoordinateSample):
        return sample.coords
    x = np.asarray(sample, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    return x


def empirical_mean(sample) -> np.ndarray:
    x = _rows(sample)
    if x.shape[0] == 0:
        raise DimensionError("empty sample")
    return x.mean(axis=0)


def _weighted_scatter(xc: np.ndarray, weights2: np.ndarray) -> np.ndarray:
    # chunk partial sums added in chunk order: bit-reproducible for fixed CHUNK_SIZE
    n, p = xc.shape
    acc = np.zeros((p, p))
    for start in range(0, n, CHUNK_SIZE):
        blk = xc[start:start + CHUNK_SIZE]
        acc += (blk * weights2[start:start + CHUNK_SIZE, None]).T @ blk
    acc /= n
    return 0.5 * (acc + acc.T)


class ScatterResult(np.ndarray):
    """ndarray subclass carrying a ``singular`` flag."""

    singular: bool = False


def empirical_cov(sample) -> np.ndarray:
    """Covariance matrix of the rows with divisor n.

    The returned array has a boolean attribute ``singular`` set when the
    sample has no spread in some direction.
    """
    x = _rows(sample)
    n = x.shape[0]
    if n < 2:
        raise DimensionError(f"covariance needs at least 2 observations, got {n}")
    xc = x - x.mean(axis=0)
    cov = _weighted_scatter(xc, np.ones(n)).view(ScatterResult)
    vals = np.linalg.eigvalsh(cov)
    cov.singular = bool(vals[-1] <= 0 or vals[0] <= 1e-10 * vals[-1])
    return cov


def mahalanobis_norms(sample) -> np.ndarray:
    """``||Cov^{-1/2}(x_i - mean)||`` for every row, in the sample's own metric."""
    x = _rows(sample)
    cov = empirical_cov(x)
    if cov.singular:
        raise ConditioningError(
            "empirical covariance is singular; weighted covariances are undefined",
            condition=np.inf,
        )
    w = spd_inv_sqrt(np.asarray(cov))
    return np.linalg.norm((x - x.mean(axis=0)) @ w, axis=1)


def empirical_cov_w(sample, w: WeightFunction) -> np.ndarray:
    """w-weighted covariance ``(1/n) sum w(d_i)^2 (x_i - m)(x_i - m)^T``.

    ``d_i`` is the Mahalanobis norm of row i.  With the identity weight the
    result is bitwise equal to :func:`empirical_cov`.
    """
    x = _rows(sample)
    n, p = x.shape
    if n < 2:
        raise DimensionError(f"covariance needs at least 2 observations, got {n}")
    xc = x - x.mean(axis=0)
    if w.kind == "identity":
        return np.asarray(_weighted_scatter(xc, np.ones(n)))
    d = mahalanobis_norms(x)
    wd = w(d, p)
    if not np.all(np.isfinite(wd)):
        raise ICSError("weight function returned non-finite values")
    return _weighted_scatter(xc, wd * wd)
