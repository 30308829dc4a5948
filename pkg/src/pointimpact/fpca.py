"""Centering, empirical Karhunen-Loeve decomposition and local variation."""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy import linalg

from .errors import DimensionError, InsufficientDataError, NumericalDegeneracyError, WindowError
from .gp_sim import FunctionalDataset, Grid
from .model_sim import QuadratureRule, quadrature_inner

RANK_RTOL = 1e-10


def center(data: FunctionalDataset) -> Tuple[FunctionalDataset, np.ndarray, float]:
    """Subtract column means (and the response mean, if present).

    Returns the centered dataset, the column means and the response mean
    (0.0 without responses); keep the means to re-center new curves.
    """
    if data.n < 2:
        raise InsufficientDataError(f"centering needs n >= 2 curves, got {data.n}")
    means = data.curves.mean(axis=0)
    y_mean = 0.0
    y = None
    if data.responses is not None:
        y_mean = float(data.responses.mean())
        y = data.responses - y_mean
    out = FunctionalDataset(data.grid, data.curves - means, y, True, dict(data.meta))
    return out, means, y_mean


@dataclass(frozen=True, eq=False)
class EigenSystem:
    """Empirical KL triple.

    Attributes
    ----------
    eigenvalues : ndarray, shape (k,)
        Descending eigenvalues of the empirical covariance operator.
    eigenfunctions : ndarray, shape (k, p)
        Row ``j`` is the eigenfunction on the grid, orthonormal under ``rule``.
    scores : ndarray, shape (n, k)
        ``scores[i, j] = <X_i, psi_j>``.
    """

    grid: Grid
    eigenvalues: np.ndarray
    eigenfunctions: np.ndarray
    scores: np.ndarray
    rule: QuadratureRule
    requested: int
    rank: int

    @property
    def k(self) -> int:
        return self.eigenvalues.size

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "rank": self.rank,
            "eigenvalues": self.eigenvalues.tolist(),
            "eigenfunctions": self.eigenfunctions.tolist(),
        }


def _flip_signs(psi: np.ndarray) -> np.ndarray:
    pos = np.argmax(np.abs(psi), axis=1)
    signs = np.sign(psi[np.arange(psi.shape[0]), pos])
    signs[signs == 0] = 1.0
    return psi * signs[:, None]


def empirical_kl(data: FunctionalDataset, k_max: int, rule: QuadratureRule) -> EigenSystem:
    """Leading ``k_max`` eigenpairs of the empirical covariance operator.

    Uses the ``n x n`` Gram matrix ``<X_i, X_l>/n`` when ``n <= p`` and the
    weighted ``p x p`` covariance matrix otherwise.  Components with eigenvalue
    below 1e-10 of the largest are dropped with a warning.
    """
    X = data.curves
    n, p = X.shape
    if rule.p != p:
        raise DimensionError(f"quadrature has {rule.p} weights, curves have {p} points")
    if not data.centered:
        warnings.warn("empirical_kl expects centered data", UserWarning, stacklevel=2)
    cap = min(n - 1 if data.centered else n, p)
    if k_max > cap:
        warnings.warn(f"k_max={k_max} exceeds the attainable rank {cap}; truncating", UserWarning, stacklevel=2)
    k = max(0, min(k_max, cap))
    w = rule.weights
    if k == 0:
        return EigenSystem(data.grid, np.zeros(0), np.zeros((0, p)), np.zeros((n, 0)), rule, k_max, 0)

    if n <= p:
        G = (X * w) @ X.T / n
        G = (G + G.T) / 2
        vals, vecs = linalg.eigh(G, subset_by_index=[n - k, n - 1])
        vals, vecs = vals[::-1], vecs[:, ::-1]
    else:
        sw = np.sqrt(w)
        if np.any(sw == 0):
            raise NumericalDegeneracyError("covariance route needs strictly positive quadrature weights")
        K = (X * sw).T @ (X * sw) / n
        K = (K + K.T) / 2
        vals, vecs = linalg.eigh(K, subset_by_index=[p - k, p - 1])
        vals, vecs = vals[::-1], vecs[:, ::-1]

    top = max(vals[0], 0.0)
    keep = vals > RANK_RTOL * top if top > 0 else np.zeros(k, dtype=bool)
    rank = int(keep.sum())
    if rank < k:
        warnings.warn(f"requested {k_max} components but the data have numerical rank {rank}", UserWarning, stacklevel=2)
    vals, vecs = vals[keep], vecs[:, keep]

    if n <= p:
        psi = (vecs.T @ X) / np.sqrt(n * vals)[:, None]
    else:
        psi = vecs.T / np.sqrt(w)[None, :]
    # one refinement pass so orthonormality holds to rounding under ``rule``
    norms = np.sqrt(np.einsum("kp,kp->k", psi * w, psi))
    psi = _flip_signs(psi / norms[:, None])
    scores = (X * w) @ psi.T
    return EigenSystem(data.grid, vals, psi, scores, rule, k_max, rank)


def project_scores(curve, eigsys: EigenSystem) -> np.ndarray:
    """Scores ``<curve, psi_j>`` for one curve or a stack of curves."""
    curve = np.asarray(curve, dtype=float)
    if curve.shape[-1] != eigsys.grid.p:
        raise DimensionError(f"curve has {curve.shape[-1]} points, eigensystem grid has {eigsys.grid.p}")
    if eigsys.k == 0:
        return np.zeros(curve.shape[:-1] + (0,))
    return quadrature_inner(curve, eigsys.eigenfunctions, eigsys.rule)


@dataclass(frozen=True, eq=False)
class LocalVariationDecomposition:
    """``X_i(s) = remainder_i(s) + zeta_i f_hat(s)`` around anchor ``t``."""

    t: float
    delta: float
    f_hat: np.ndarray
    zeta: np.ndarray
    remainder: np.ndarray


def local_variation_decompose(data: FunctionalDataset, t: float, delta: float) -> LocalVariationDecomposition:
    """Split each curve into its local variation at ``t`` and an uncorrelated rest.

    ``zeta_i = X_i(t) - (X_i(t - delta) + X_i(t + delta))/2`` and
    ``f_hat(s) = cov(X(s), zeta)/var(zeta)`` (empirical moments).
    """
    grid = data.grid
    j = grid.index_of(t)
    k = int(round(delta / grid.h))
    if k < 1 or j - k < 0 or j + k > grid.p - 1:
        raise WindowError(f"window [t - delta, t + delta] = [{t - delta}, {t + delta}] leaves the grid")
    X = data.curves
    zeta = X[:, j] - 0.5 * (X[:, j - k] + X[:, j + k])
    zc = zeta - zeta.mean()
    var = float(zc @ zc) / data.n
    if var < 1e-14:
        raise WindowError(f"degenerate window: var(zeta) = {var:.3g}, the window carries no local variation")
    f_hat = (zc @ (X - X.mean(axis=0))) / data.n / var
    remainder = X - np.outer(zeta, f_hat)
    return LocalVariationDecomposition(float(grid.points[j]), k * grid.h, f_hat, zeta, remainder)
