"""Detection of impact points from second-difference statistics.

For a window ``delta = k h`` the statistic
``Z_i(t_j) = X_i(t_j) - (X_i(t_j - delta) + X_i(t_j + delta))/2`` is strongly
correlated with ``X_i(t_j)`` but nearly uncorrelated with ``X_i(s)`` far from
``t_j``.  Large values of ``|mean_i Z_i(t_j) Y_i|`` therefore point at
locations with a specific effect on the response.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from .errors import DataError, InsufficientDataError, NumericalDegeneracyError, WindowError
from .gp_sim import FunctionalDataset, Grid

EXCLUSIONS = ("sqrt", "dlogd")


def default_delta(n: int, length: float = 1.0, C: float = 1.0) -> float:
    """``delta = C (b - a)/sqrt(n)``."""
    return C * length / math.sqrt(n)


def window_steps(grid: Grid, delta: float, even: bool = False) -> int:
    """Number of grid steps ``k`` representing ``delta`` (rounded, at least 1 or 2)."""
    if not delta > 0:
        raise WindowError(f"delta must be positive, got {delta}")
    if even:
        k = 2 * max(1, int(round(delta / (2 * grid.h))))
    else:
        k = max(1, int(round(delta / grid.h)))
    if not k < (grid.p - 1) / 2:
        raise WindowError(f"delta={delta} needs k={k} steps but k must be < (p-1)/2 = {(grid.p - 1) / 2}")
    return k


@dataclass(frozen=True)
class DetectionConfig:
    """Settings of the candidate search.

    ``exclusion`` is ``"sqrt"`` (radius ``sqrt(delta)/2``) or ``"dlogd"``
    (radius ``delta |log delta|``).
    """

    delta: float
    exclusion: str = "sqrt"
    cutoff_A: float = 2.0
    max_candidates: Optional[int] = None

    def __post_init__(self):
        if not self.delta > 0:
            raise WindowError(f"delta must be positive, got {self.delta}")
        if self.exclusion not in EXCLUSIONS:
            raise DataError(f"exclusion must be one of {EXCLUSIONS}, got {self.exclusion!r}")
        if not self.cutoff_A > math.sqrt(2):
            raise DataError(f"cutoff_A must exceed sqrt(2), got {self.cutoff_A}")
        if self.max_candidates is not None and self.max_candidates < 1:
            raise DataError(f"max_candidates must be >= 1, got {self.max_candidates}")


def exclusion_radius(delta: float, exclusion: str = "sqrt") -> float:
    if exclusion == "sqrt":
        return math.sqrt(delta) / 2.0
    return delta * abs(math.log(delta))


def _z_from_steps(X: np.ndarray, k: int) -> np.ndarray:
    return X[:, k:-k] - 0.5 * (X[:, : -2 * k] + X[:, 2 * k :])


def z_delta(data: FunctionalDataset, delta: float) -> Tuple[np.ndarray, np.ndarray]:
    """``Z`` statistics on the admissible indices ``k+1 .. p-k`` (1-based).

    Returns the ``n x |J|`` matrix and the 0-based grid indices of its columns.
    """
    k = window_steps(data.grid, delta)
    return _z_from_steps(data.curves, k), np.arange(k, data.grid.p - k)


def statistic_profile(data: FunctionalDataset, delta: float) -> Tuple[np.ndarray, np.ndarray]:
    """Grid locations and ``|mean_i Z_i(t_j) Y_i|``, e.g. for plotting."""
    if data.responses is None:
        raise DataError("response column required")
    Z, idx = z_delta(data, delta)
    return data.grid.points[idx], np.abs(data.responses @ Z / data.n)


@dataclass(frozen=True, eq=False)
class CandidateList:
    """Candidates in selection order with their statistics."""

    locations: np.ndarray
    indices: np.ndarray
    raw: np.ndarray
    normalized: np.ndarray
    delta: float
    k_delta: int
    radius: float

    def __len__(self) -> int:
        return self.locations.size

    def to_records(self) -> List[dict]:
        return [
            {
                "iteration": l + 1,
                "location": float(self.locations[l]),
                "grid_index": int(self.indices[l]),
                "raw_statistic": float(self.raw[l]),
                "normalized_statistic": float(self.normalized[l]),
            }
            for l in range(len(self))
        ]


def detect_candidates(data: FunctionalDataset, config: DetectionConfig) -> CandidateList:
    """Greedy search for impact candidates.

    Repeatedly picks the admissible index maximizing ``|mean_i Z_i(t_j) Y_i|``
    (ties go to the smallest index) and discards every index closer than the
    exclusion radius, until no index is left or ``max_candidates`` is reached.
    """
    if data.responses is None:
        raise DataError("response column required")
    if not data.centered:
        raise DataError("detection expects centered data; call fpca.center first")
    grid = data.grid
    k = window_steps(grid, config.delta)
    delta = k * grid.h
    radius = exclusion_radius(delta, config.exclusion)
    cap = config.max_candidates
    if cap is None:
        cap = max(1, int(math.floor(grid.length / (math.sqrt(delta) / 2.0))))

    Z = _z_from_steps(data.curves, k)
    idx = np.arange(k, grid.p - k)
    if idx.size == 0:
        raise WindowError("no admissible grid points for this delta")
    n = data.n
    raw_all = data.responses @ Z / n
    z2_all = np.einsum("ij,ij->j", Z, Z) / n
    t_all = grid.points[idx]
    score = np.abs(raw_all)
    alive = np.ones(idx.size, dtype=bool)

    picks = []
    while alive.any() and len(picks) < cap:
        j = int(np.argmax(np.where(alive, score, -np.inf)))
        picks.append(j)
        alive &= np.abs(t_all - t_all[j]) >= radius

    picks = np.array(picks, dtype=int)
    raw = raw_all[picks]
    z2 = z2_all[picks]
    with np.errstate(invalid="ignore", divide="ignore"):
        normalized = np.where(z2 > 0, raw / np.sqrt(z2), 0.0)
    return CandidateList(t_all[picks], idx[picks], raw, normalized, delta, k, radius)


def default_cutoff(responses, delta: float, A: float = 2.0, length: float = 1.0) -> float:
    """``lambda = A sqrt(var(Y)/n log((b - a)/delta))`` with the sample variance."""
    y = np.asarray(responses, dtype=float)
    if y.size < 2:
        raise InsufficientDataError("the cut-off needs at least 2 responses")
    if not 0 < delta < length:
        raise WindowError(f"delta must lie in (0, b - a = {length}), got {delta}")
    return A * math.sqrt(np.var(y, ddof=1) / y.size * math.log(length / delta))


@dataclass(frozen=True)
class ThresholdResult:
    S_hat: int
    locations: np.ndarray
    crossed: bool


def threshold_select(candidates: CandidateList, lam: float) -> ThresholdResult:
    """``S_hat`` is the number of leading candidates before the first ``|normalized| < lam``.

    A statistic of exactly zero never counts as a detection, so ``Y = 0``
    gives ``S_hat = 0`` even though ``lam = 0``.  If no candidate falls below
    ``lam`` all of them are kept and ``crossed`` is False.
    """
    stat = np.abs(candidates.normalized)
    below = np.flatnonzero((stat < lam) | (stat == 0))
    if below.size:
        s = int(below[0])
        return ThresholdResult(s, candidates.locations[:s].copy(), True)
    return ThresholdResult(len(candidates), candidates.locations.copy(), False)


def estimate_kappa(data: FunctionalDataset, delta: float) -> float:
    """Roughness exponent from ``log2(sum Z_delta^2 / sum Z_{delta/2}^2)``.

    ``delta`` is rounded to an even number of grid steps; both sums run over
    the admissible indices of the full window.
    """
    k = window_steps(data.grid, delta, even=True)
    X = data.curves
    num = float(np.sum(_z_from_steps(X, k) ** 2))
    h = k // 2
    half = X[:, k:-k] - 0.5 * (X[:, k - h : X.shape[1] - k - h] + X[:, k + h : X.shape[1] - k + h])
    den = float(np.sum(half**2))
    # Z of affine curves is pure rounding noise; compare against the curve scale
    tol = 1e-24 * float(np.sum(X[:, k:-k] ** 2))
    if not den > tol or not num > tol:
        raise NumericalDegeneracyError("degenerate data: Z statistics vanish, kappa is undefined")
    return math.log2(num / den)


@dataclass(frozen=True, eq=False)
class DetectionResult:
    """Candidates for one window plus the cut-off estimate and kappa-hat."""

    candidates: CandidateList
    delta_requested: float
    cutoff_lambda: float
    threshold: ThresholdResult
    kappa_hat: Optional[float]
    exclusion: str
    cutoff_A: float

    @property
    def delta(self) -> float:
        return self.candidates.delta

    def to_dict(self) -> dict:
        return {
            "delta": self.delta,
            "delta_requested": self.delta_requested,
            "k_delta": self.candidates.k_delta,
            "exclusion": self.exclusion,
            "exclusion_radius": self.candidates.radius,
            "cutoff_A": self.cutoff_A,
            "cutoff_lambda": self.cutoff_lambda,
            "S_hat": self.threshold.S_hat,
            "cutoff_crossed": self.threshold.crossed,
            "selected_locations": [float(t) for t in self.threshold.locations],
            "kappa_hat": self.kappa_hat,
            "candidates": self.candidates.to_records(),
        }


def detect(data: FunctionalDataset, config: DetectionConfig, kappa: bool = True) -> DetectionResult:
    """Candidate search, cut-off estimate of ``S`` and (optionally) kappa-hat.

    The rounded window actually used is ``result.delta``; the requested value
    is kept in ``result.delta_requested``.
    """
    cands = detect_candidates(data, config)
    lam = default_cutoff(data.responses, cands.delta, config.cutoff_A, data.grid.length)
    thr = threshold_select(cands, lam)
    kap = None
    if kappa:
        try:
            kap = estimate_kappa(data, cands.delta)
        except (WindowError, NumericalDegeneracyError):
            kap = None
    return DetectionResult(cands, config.delta, lam, thr, kap, config.exclusion, config.cutoff_A)
