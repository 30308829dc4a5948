"""Least-squares estimation in the augmented model.

Responses are regressed jointly on the first ``k`` FPCA scores and on the
curve values at selected impact locations,
``Y_i ~ sum_j a_j <X_i, psi_j> + sum_r b_r X_i(tau_r)``, on centered data.
The slope estimate is ``beta_hat(t) = sum_j a_j psi_j(t)``.
"""

from __future__ import annotations

import dataclasses
import itertools
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import linalg

from .detection import DetectionConfig, detect_candidates
from .errors import BudgetError, DataError, DimensionError, InsufficientDataError, NumericalError, SingularDesignError
from .fpca import EigenSystem, project_scores
from .gp_sim import FunctionalDataset, Grid

RANK_RTOL = 1e-10
DEFAULT_K_MAX = 6
DEFAULT_MAX_VARS = 6
MAX_SUBSET_FITS = 2**20


def least_squares(D: np.ndarray, y: np.ndarray) -> Tuple[np.ndarray, float]:
    """Coefficients and residual sum of squares via a thin QR factorization.

    Raises :class:`SingularDesignError` if a diagonal entry of ``R`` is below
    1e-10 of the largest one.
    """
    n, s = D.shape
    if s == 0:
        return np.zeros(0), float(y @ y)
    if s > n:
        raise SingularDesignError(f"{s} columns but only {n} rows")
    Q, R = linalg.qr(D, mode="economic", check_finite=False)
    d = np.abs(np.diag(R))
    if d.min() <= RANK_RTOL * max(d.max(), np.finfo(float).tiny):
        raise SingularDesignError(f"design with {s} columns is rank deficient (min |R_jj| = {d.min():.3g})")
    coef = linalg.solve_triangular(R, Q.T @ y, check_finite=False)
    resid = y - D @ coef
    return coef, float(resid @ resid)


def bic_score(rss: float, n: int, s_params: int) -> float:
    """``n log(rss/n) + s log(n)``; an exact fit (``rss == 0``) scores ``-inf``."""
    if n < 2:
        raise InsufficientDataError(f"BIC needs n >= 2, got {n}")
    if rss < 0:
        raise DataError(f"rss must be >= 0, got {rss}")
    if rss == 0:
        return -math.inf
    return n * math.log(rss / n) + s_params * math.log(n)


def _tau_indices(grid: Grid, taus: Sequence[float]) -> np.ndarray:
    idx = np.array([grid.index_of(t) for t in taus], dtype=int)
    if idx.size and np.max(np.abs(grid.points[idx] - np.asarray(taus))) > 1e-9 * grid.h:
        raise DataError("impact locations must be grid points")
    return idx


def _require_responses(data: FunctionalDataset) -> np.ndarray:
    if data.responses is None:
        raise DataError("response column required")
    return data.responses


@dataclass(frozen=True, eq=False)
class AugmentedFit:
    """Least-squares fit of the augmented model.

    ``bic`` counts ``k + S`` parameters; the intercept absorbed by centering is
    not counted.
    """

    k: int
    selected_taus: np.ndarray
    tau_indices: np.ndarray
    alpha_hat: np.ndarray
    beta_hat_impacts: np.ndarray
    beta_hat_curve: np.ndarray
    rss: float
    bic: float
    sigma2_hat: float
    n: int
    exact_fit: bool = False

    @property
    def S(self) -> int:
        return self.selected_taus.size

    @property
    def n_params(self) -> int:
        return self.k + self.S

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "S": self.S,
            "taus": self.selected_taus.tolist(),
            "alpha_hat": self.alpha_hat.tolist(),
            "beta_hat_impacts": self.beta_hat_impacts.tolist(),
            "beta_hat_curve": self.beta_hat_curve.tolist(),
            "rss": self.rss,
            "bic": None if math.isinf(self.bic) else self.bic,
            "exact_fit": self.exact_fit,
            "sigma2_hat": None if math.isnan(self.sigma2_hat) else self.sigma2_hat,
            "n": self.n,
        }


def _sigma2(rss: float, n: int, s: int) -> float:
    dof = n - s - 1
    return rss / dof if dof > 0 else math.nan


def fit_impact_only(data: FunctionalDataset, tau_hats: Sequence[float]) -> Tuple[np.ndarray, float, float]:
    """OLS of ``Y`` on ``X(tau_1), ..., X(tau_S)``; returns ``(beta_hat, sigma2_hat, rss)``."""
    y = _require_responses(data)
    idx = _tau_indices(data.grid, tau_hats)
    beta, rss = least_squares(data.curves[:, idx], y)
    return beta, _sigma2(rss, data.n, idx.size), rss


def _design(data: FunctionalDataset, eigsys: Optional[EigenSystem], k: int, idx: np.ndarray) -> np.ndarray:
    cols = []
    if k:
        if eigsys is None or k > eigsys.k:
            raise DataError(f"k={k} exceeds the {0 if eigsys is None else eigsys.k} available components")
        if eigsys.scores.shape[0] != data.n:
            raise DimensionError("eigensystem scores do not belong to these curves")
        cols.append(eigsys.scores[:, :k])
    cols.append(data.curves[:, idx])
    return np.hstack(cols)


def _assemble(data, eigsys, k, idx, coef, rss) -> AugmentedFit:
    n = data.n
    alpha = coef[:k]
    beta = coef[k:]
    curve = alpha @ eigsys.eigenfunctions[:k] if k else np.zeros(data.grid.p)
    s = k + idx.size
    bic = bic_score(rss, n, s)
    return AugmentedFit(
        k=k,
        selected_taus=data.grid.points[idx],
        tau_indices=idx,
        alpha_hat=alpha,
        beta_hat_impacts=beta,
        beta_hat_curve=curve,
        rss=rss,
        bic=bic,
        sigma2_hat=_sigma2(rss, n, s),
        n=n,
        exact_fit=rss == 0,
    )


def fit_augmented(
    data: FunctionalDataset, eigsys: Optional[EigenSystem], tau_hats: Sequence[float], k: int
) -> AugmentedFit:
    """Joint least squares on ``k`` score columns and the impact columns."""
    y = _require_responses(data)
    idx = _tau_indices(data.grid, tau_hats)
    if k + idx.size + 1 > data.n:
        raise InsufficientDataError(f"k + S + 1 = {k + idx.size + 1} exceeds n = {data.n}")
    coef, rss = least_squares(_design(data, eigsys, k, idx), y)
    return _assemble(data, eigsys, k, idx, coef, rss)


@dataclass(frozen=True, eq=False)
class SubsetSearchResult:
    best_fit: AugmentedFit
    size_table: Dict[int, float]
    pool: np.ndarray
    delta: Optional[float] = None
    n_fits: int = 0
    n_singular: int = 0

    def to_dict(self) -> dict:
        return {
            "delta": self.delta,
            "candidate_pool": self.pool.tolist(),
            "best_bic_by_size": {str(s): (None if math.isinf(b) else b) for s, b in sorted(self.size_table.items())},
            "n_fits": self.n_fits,
            "n_singular": self.n_singular,
            "fit": self.best_fit.to_dict(),
        }


def count_subsets(n_candidates: int, k_max: int, max_vars: int) -> int:
    return sum(
        math.comb(n_candidates, s)
        for k in range(k_max + 1)
        for s in range(0, min(n_candidates, max_vars - k) + 1)
        if max_vars - k >= 0
    )


def best_subset_bic(
    data: FunctionalDataset,
    eigsys: Optional[EigenSystem],
    candidate_taus: Sequence[float],
    k_max: int = DEFAULT_K_MAX,
    max_vars: int = DEFAULT_MAX_VARS,
    delta: Optional[float] = None,
    budget: int = MAX_SUBSET_FITS,
) -> SubsetSearchResult:
    """Exhaustive BIC search over nested score blocks crossed with impact subsets.

    Score columns enter as blocks ``1..k`` for ``k = 0..k_max``; impact columns
    enter as any subset of the candidate pool, with ``k + |subset| <= max_vars``.
    Equal BIC values are resolved in favour of the lexicographically smallest
    column-label tuple (scores first, then candidates sorted by location).
    """
    y = _require_responses(data)
    n = data.n
    k_max = min(k_max, 0 if eigsys is None else eigsys.k)
    pool_idx = np.unique(_tau_indices(data.grid, candidate_taus))
    m = pool_idx.size
    total = count_subsets(m, k_max, max_vars)
    if total > budget:
        raise BudgetError(f"{total} subset fits exceed the budget of {budget}; use a smaller candidate pool or max_vars")

    scores = eigsys.scores[:, :k_max] if k_max else np.zeros((n, 0))
    impacts = data.curves[:, pool_idx]
    best_key = None
    best = None
    size_table: Dict[int, float] = {}
    n_fits = n_singular = 0
    offset = k_max
    for k in range(k_max + 1):
        for s in range(0, min(m, max_vars - k) + 1):
            if k + s + 1 > n:
                continue
            for combo in itertools.combinations(range(m), s):
                D = np.hstack([scores[:, :k], impacts[:, list(combo)]])
                n_fits += 1
                try:
                    coef, rss = least_squares(D, y)
                except SingularDesignError:
                    n_singular += 1
                    continue
                bic = bic_score(rss, n, k + s)
                key = (bic, tuple(range(k)) + tuple(offset + c for c in combo))
                if best_key is None or key < best_key:
                    best_key, best = key, (k, combo, coef, rss)
                if bic < size_table.get(k + s, math.inf):
                    size_table[k + s] = bic
    if best is None:
        raise SingularDesignError("every candidate design was singular")
    k, combo, coef, rss = best
    fit = _assemble(data, eigsys, k, pool_idx[list(combo)], coef, rss)
    return SubsetSearchResult(fit, size_table, data.grid.points[pool_idx], delta, n_fits, n_singular)


@dataclass(frozen=True, eq=False)
class DeltaSelection:
    delta: float
    search: SubsetSearchResult
    table: List[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"delta": self.delta, "per_delta": self.table, "search": self.search.to_dict()}


def select_delta(
    data: FunctionalDataset,
    eigsys: Optional[EigenSystem],
    delta_grid: Sequence[float],
    config: DetectionConfig,
    k_max: int = DEFAULT_K_MAX,
    max_vars: int = DEFAULT_MAX_VARS,
) -> DeltaSelection:
    """Pick the window whose best augmented fit has the smallest BIC.

    Windows that fail (inadmissible, singular, over budget) are recorded and
    skipped; ties go to the smaller window.
    """
    if len(delta_grid) == 0:
        raise DataError("delta grid is empty")
    best = None
    table = []
    for d in sorted(float(x) for x in delta_grid):
        try:
            cands = detect_candidates(data, dataclasses.replace(config, delta=d))
            res = best_subset_bic(data, eigsys, cands.locations, k_max, max_vars, delta=cands.delta)
        except (DataError, NumericalError) as exc:
            table.append({"delta": d, "status": "skipped", "reason": str(exc)})
            continue
        bic = res.best_fit.bic
        table.append({"delta": d, "delta_used": cands.delta, "status": "ok", "bic": None if math.isinf(bic) else bic,
                      "n_candidates": len(cands)})
        if best is None or bic < best[1].best_fit.bic:
            best = (cands.delta, res)
    if best is None:
        raise DataError("no window in the delta grid produced a fit")
    return DeltaSelection(best[0], best[1], table)


def predict(
    fit: AugmentedFit, eigsys: Optional[EigenSystem], new_curves, curve_means, y_mean: float
) -> np.ndarray:
    """Predict responses of new (uncentered) curves on the training grid.

    ``y = y_mean + sum_j a_j <X - mean, psi_j> + sum_r b_r (X(tau_r) - mean(tau_r))``.
    """
    Xc = np.atleast_2d(np.asarray(new_curves, dtype=float)) - np.asarray(curve_means, dtype=float)
    if Xc.shape[1] != fit.beta_hat_curve.size:
        raise DimensionError(f"curves have {Xc.shape[1]} points, the fit grid has {fit.beta_hat_curve.size}")
    y = np.full(Xc.shape[0], float(y_mean))
    if fit.k:
        y += project_scores(Xc, eigsys)[:, : fit.k] @ fit.alpha_hat
    if fit.S:
        y += Xc[:, fit.tau_indices] @ fit.beta_hat_impacts
    return y
