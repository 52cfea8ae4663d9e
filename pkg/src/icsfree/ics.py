"""Coordinate-free invariant coordinate selection.

The ICS problem for a sample in a Euclidean space E is reduced to a
multivariate problem on coordinates in an arbitrary basis B of E with Gram
matrix G.  Three equivalent reductions exist:

* route 2: data ``G^{1/2} [x]_B``, eigenbasis ``G^{1/2} [H]_B``
* route 3: data ``G [x]_B``, eigenbasis ``[H]_B``
* route 4: data ``[x]_B``, eigenbasis ``G [H]_B``

Route 3 is the default since it returns ``[H]_B`` without inverting G.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np
from scipy import stats

from .eucspace import DimensionError, GramBasis, ICSError, spd_inv_sqrt, spd_sqrt
from .scatter import COV, COV4, CoordinateSample, WeightFunction, empirical_cov_w

SCHEMA = "ics-solution/1"


@dataclass(frozen=True)
class ICSSolution:
    """Eigenbasis, generalised kurtosis values and invariant coordinates.

    Attributes
    ----------
    eigenbasis_coords : (p, p) array
        Column j holds the coordinates ``[h_j]_B`` of the j-th eigenobject.
    spectrum : (p,) array
        Non-increasing eigenvalues.
    dual_coords : (p, p) array
        Column j holds ``[h*_j]_B``; ``<h_j, h*_k> = delta_jk``.
    scores : (n, p) array
        Invariant coordinates of the training sample.
    mean_coords : (p,) array
        Coordinates of the sample mean.
    basis : GramBasis
    """

    eigenbasis_coords: np.ndarray
    spectrum: np.ndarray
    dual_coords: np.ndarray
    scores: np.ndarray
    mean_coords: np.ndarray
    basis: GramBasis
    scatter_labels: tuple = ("Cov", "Cov4")
    meta: dict = field(default_factory=dict, compare=False)

    @property
    def dim(self) -> int:
        return self.basis.dim

    def to_dict(self) -> dict:
        return {
            "schema": SCHEMA,
            "dim": self.dim,
            "scatter": list(self.scatter_labels),
            "spectrum": self.spectrum.tolist(),
            "eigenbasis_coords": self.eigenbasis_coords.tolist(),
            "dual_coords": self.dual_coords.tolist(),
            "mean_coords": self.mean_coords.tolist(),
            "scores": self.scores.tolist(),
            "gram": self.basis.gram.tolist(),
            "labels": list(self.basis.labels) if self.basis.labels is not None else None,
            "meta": self.meta,
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_dict(cls, d: dict) -> "ICSSolution":
        if d.get("schema") != SCHEMA:
            raise ValueError(f"unsupported schema {d.get('schema')!r}, expected {SCHEMA!r}")
        basis = GramBasis(np.asarray(d["gram"], dtype=float), labels=d.get("labels"))
        p = basis.dim
        return cls(
            eigenbasis_coords=np.asarray(d["eigenbasis_coords"], dtype=float).reshape(p, p),
            spectrum=np.asarray(d["spectrum"], dtype=float),
            dual_coords=np.asarray(d["dual_coords"], dtype=float).reshape(p, p),
            scores=np.asarray(d["scores"], dtype=float).reshape(-1, p),
            mean_coords=np.asarray(d["mean_coords"], dtype=float),
            basis=basis,
            scatter_labels=tuple(d.get("scatter", ("Cov", "Cov4"))),
            meta=d.get("meta") or {},
        )

    @classmethod
    def from_json(cls, text: str) -> "ICSSolution":
        return cls.from_dict(json.loads(text))


def ics_multivariate(y: np.ndarray, w1: WeightFunction = COV, w2: WeightFunction = COV4):
    """Multivariate ICS of the rows of ``y`` in R^p with the canonical inner product.

    Returns ``(H, spectrum)`` with ``H^T S1 H = I`` and ``H^T S2 H = diag(spectrum)``,
    spectrum sorted in decreasing order.  Columns of H carry no sign convention.
    """
    y = np.asarray(y, dtype=float)
    n, p = y.shape
    if n <= p:
        raise DimensionError(
            f"ICS needs more observations than the dimension (n={n}, p={p}); "
            "all affine equivariant scatters are proportional when n <= p"
        )
    s1 = empirical_cov_w(y, w1)
    whiten = spd_inv_sqrt(s1)
    s2 = empirical_cov_w(y, w2)
    m = whiten @ s2 @ whiten
    vals, vecs = np.linalg.eigh(0.5 * (m + m.T))
    order = np.argsort(vals)[::-1]
    return whiten @ vecs[:, order], vals[order]


def scatter_forms(sample: CoordinateSample, w1: WeightFunction = COV, w2: WeightFunction = COV4):
    """Matrices of the bilinear forms ``<S_l x, y>`` in B-coordinates.

    ``<S_l[X] x, y> = [x]_B^T F_l [y]_B`` with ``F_l = Cov_wl(G [X]_B)``.
    """
    y = sample.coords @ sample.basis.gram
    return empirical_cov_w(y, w1), empirical_cov_w(y, w2)


def dual_basis(eigenbasis_coords: np.ndarray, basis: GramBasis) -> np.ndarray:
    """Coordinates of the dual basis, ``([H]_B^T G_B)^{-1}``."""
    h = np.asarray(eigenbasis_coords, dtype=float)
    if h.shape != (basis.dim, basis.dim):
        raise DimensionError(f"eigenbasis has shape {h.shape}, basis dimension {basis.dim}")
    a = h.T @ basis.gram
    try:
        return np.linalg.solve(a, np.eye(basis.dim))
    except np.linalg.LinAlgError as exc:
        raise ICSError("eigenbasis matrix is singular; no dual basis") from exc


def _orient(h: np.ndarray, z: np.ndarray):
    # positive skewness for each invariant coordinate, else largest |entry| positive
    h = h.copy()
    z = z.copy()
    skew = stats.skew(z, axis=0)
    scale = np.sqrt(np.mean(z * z, axis=0))
    for j in range(h.shape[1]):
        s = skew[j]
        if not np.isfinite(s) or abs(s) <= 1e-10 or scale[j] == 0:
            flip = h[np.argmax(np.abs(h[:, j])), j] < 0
        else:
            flip = s < 0
        if flip:
            h[:, j] = -h[:, j]
            z[:, j] = -z[:, j]
    return h, z


def solve_ics(
    sample: CoordinateSample,
    w1: WeightFunction = COV,
    w2: WeightFunction = COV4,
    route: int = 3,
) -> ICSSolution:
    """Solve ICS(X, Cov_w1, Cov_w2) for a sample given in a (possibly non-orthonormal) basis.

    Parameters
    ----------
    sample : CoordinateSample
    w1, w2 : WeightFunction
        Weights of the two scatter operators; defaults to (Cov, Cov4).
    route : {2, 3, 4}
        Which multivariate reduction to use.  All three describe the same
        problem; 3 is the numerically preferred one.

    Raises
    ------
    DimensionError
        If n <= p.
    ConditioningError
        If the first scatter is numerically singular.
    """
    x = sample.coords
    g = sample.basis.gram
    n, p = x.shape
    if n <= p:
        raise DimensionError(
            f"ICS needs more observations than the dimension (n={n}, p={p})"
        )
    if route == 3:
        h, spectrum = ics_multivariate(x @ g, w1, w2)
    elif route == 2:
        g_half = spd_sqrt(g)
        h2, spectrum = ics_multivariate(x @ g_half, w1, w2)
        h = np.linalg.solve(g_half, h2)
    elif route == 4:
        h4, spectrum = ics_multivariate(x, w1, w2)
        h = np.linalg.solve(g, h4)
    else:
        raise ValueError(f"route must be 2, 3 or 4, got {route}")

    mean = x.mean(axis=0)
    z = (x - mean) @ g @ h
    h, z = _orient(h, z)
    return ICSSolution(
        eigenbasis_coords=h,
        spectrum=spectrum,
        dual_coords=dual_basis(h, sample.basis),
        scores=z,
        mean_coords=mean,
        basis=sample.basis,
        scatter_labels=(w1.label, w2.label),
        meta={"n": n, "p": p, "route": route},
    )


def invariant_coordinates(sample, solution: ICSSolution) -> np.ndarray:
    """Invariant coordinates ``z_ji = <x_i - mean, h_j>`` of (possibly new) observations."""
    if isinstance(sample, CoordinateSample):
        if not sample.basis.same_space(solution.basis):
            raise DimensionError("sample basis differs from the basis of the solution")
        x = sample.coords
    else:
        x = np.atleast_2d(np.asarray(sample, dtype=float))
        if x.shape[1] != solution.dim:
            raise DimensionError(
                f"observations have dimension {x.shape[1]}, solution has {solution.dim}"
            )
    return (x - solution.mean_coords) @ solution.basis.gram @ solution.eigenbasis_coords


def reconstruct(solution: ICSSolution, scores_row, keep: Optional[Iterable[int]] = None) -> np.ndarray:
    """Rebuild coordinates from invariant coordinates: ``mean + sum_{j in keep} z_j h*_j``.

    ``keep`` holds 0-based component indices; ``None`` keeps all of them.
    """
    z = np.asarray(scores_row, dtype=float)
    p = solution.dim
    if z.shape[-1] != p:
        raise DimensionError(f"scores have length {z.shape[-1]}, expected {p}")
    idx = np.arange(p) if keep is None else np.asarray(sorted(set(keep)), dtype=int)
    if idx.size and (idx.min() < 0 or idx.max() >= p):
        raise IndexError(f"component indices must lie in [0, {p - 1}], got {idx.tolist()}")
    if idx.size == 0:
        return np.broadcast_to(solution.mean_coords, z.shape).copy()
    return solution.mean_coords + z[..., idx] @ solution.dual_coords[:, idx].T
