"""Gaussian process families: closed-form covariances and exact samplers.

Three families are supported, all started at zero at time 0:

* standard Brownian motion, ``min(t, s)``;
* fractional Brownian motion with Hurst index ``H``;
* the Ornstein-Uhlenbeck process with mean reversion ``theta`` and diffusion
  ``sigma_u``, started at ``X(0) = 0``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional, Tuple

import numpy as np
from scipy import linalg, signal

from ._seeding import row_normals
from .errors import DimensionError, InvalidSpecError, NumericalDegeneracyError

MAX_DENSE_POINTS = 20000


@dataclass(frozen=True)
class Grid:
    """Equidistant grid ``t_j = a + (j-1)(b-a)/(p-1)``, ``j = 1..p``."""

    a: float
    b: float
    p: int

    def __post_init__(self):
        if not (math.isfinite(self.a) and math.isfinite(self.b)) or self.b <= self.a:
            raise InvalidSpecError(f"grid needs finite a < b, got a={self.a}, b={self.b}")
        if int(self.p) != self.p or self.p < 3:
            raise InvalidSpecError(f"grid needs an integer p >= 3, got {self.p}")
        object.__setattr__(self, "p", int(self.p))

    @property
    def h(self) -> float:
        return (self.b - self.a) / (self.p - 1)

    @property
    def points(self) -> np.ndarray:
        return self.a + np.arange(self.p) * self.h

    @property
    def length(self) -> float:
        return self.b - self.a

    def index_of(self, t: float) -> int:
        """Index of the grid point nearest to ``t``."""
        return int(np.clip(np.rint((t - self.a) / self.h), 0, self.p - 1))

    @classmethod
    def from_points(cls, points, rtol: float = 1e-9) -> "Grid":
        """Build a grid from explicit, equidistant time points."""
        pts = np.asarray(points, dtype=float)
        if pts.ndim != 1 or pts.size < 3:
            raise DimensionError("a grid needs at least 3 time points")
        grid = cls(float(pts[0]), float(pts[-1]), pts.size)
        if np.any(np.diff(pts) <= 0):
            raise InvalidSpecError("grid points must be strictly increasing")
        if np.max(np.abs(pts - grid.points)) > rtol * max(grid.length, abs(grid.a), abs(grid.b)):
            raise InvalidSpecError("grid points are not equidistant")
        return grid


@dataclass(frozen=True)
class ProcessSpec:
    """One of the supported process families.

    Use the constructors :meth:`brownian`, :meth:`fbm` and :meth:`ou`.
    """

    kind: str
    hurst: Optional[float] = None
    theta: Optional[float] = None
    sigma_u: Optional[float] = None

    def __post_init__(self):
        if self.kind == "bm":
            return
        if self.kind == "fbm":
            if self.hurst is None or not 0.0 < self.hurst < 1.0:
                raise InvalidSpecError(f"fBM needs a Hurst index in (0, 1), got {self.hurst}")
            return
        if self.kind == "ou":
            if self.theta is None or not self.theta > 0:
                raise InvalidSpecError(f"OU needs theta > 0, got {self.theta}")
            if self.sigma_u is None or not self.sigma_u > 0:
                raise InvalidSpecError(f"OU needs sigma_u > 0, got {self.sigma_u}")
            return
        raise InvalidSpecError(f"unknown process kind {self.kind!r}")

    @classmethod
    def brownian(cls) -> "ProcessSpec":
        return cls("bm")

    @classmethod
    def fbm(cls, hurst: float) -> "ProcessSpec":
        return cls("fbm", hurst=hurst)

    @classmethod
    def ou(cls, theta: float, sigma_u: float) -> "ProcessSpec":
        return cls("ou", theta=theta, sigma_u=sigma_u)

    def to_dict(self) -> dict:
        d = {"kind": self.kind}
        if self.kind == "fbm":
            d["hurst"] = self.hurst
        elif self.kind == "ou":
            d.update(theta=self.theta, sigma_u=self.sigma_u)
        return d


@dataclass(frozen=True, eq=False)
class FunctionalDataset:
    """``n`` curves on a shared grid, with optional scalar responses."""

    grid: Grid
    curves: np.ndarray
    responses: Optional[np.ndarray] = None
    centered: bool = False
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        X = np.array(self.curves, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.grid.p:
            raise DimensionError(f"curves must be n x {self.grid.p}, got shape {X.shape}")
        if not np.all(np.isfinite(X)):
            raise InvalidSpecError("curves contain non-finite values")
        X.setflags(write=False)
        object.__setattr__(self, "curves", X)
        if self.responses is not None:
            y = np.array(self.responses, dtype=float).reshape(-1)
            if y.size != X.shape[0]:
                raise DimensionError(f"{y.size} responses for {X.shape[0]} curves")
            if not np.all(np.isfinite(y)):
                raise InvalidSpecError("responses contain non-finite values")
            y.setflags(write=False)
            object.__setattr__(self, "responses", y)

    @property
    def n(self) -> int:
        return self.curves.shape[0]

    def with_responses(self, y) -> "FunctionalDataset":
        return FunctionalDataset(self.grid, self.curves, y, self.centered, dict(self.meta))

    def subset(self, rows) -> "FunctionalDataset":
        rows = np.asarray(rows)
        y = None if self.responses is None else self.responses[rows]
        return FunctionalDataset(self.grid, self.curves[rows], y, False, dict(self.meta))


def covariance_eval(spec: ProcessSpec, t, s):
    """Covariance ``sigma(t, s)`` of the process; broadcasts over arrays."""
    t = np.asarray(t, dtype=float)
    s = np.asarray(s, dtype=float)
    if spec.kind == "bm":
        out = np.minimum(t, s)
    elif spec.kind == "fbm":
        H2 = 2.0 * spec.hurst
        out = 0.5 * (np.abs(t) ** H2 + np.abs(s) ** H2 - np.abs(t - s) ** H2)
    else:
        scale = spec.sigma_u**2 / (2.0 * spec.theta)
        out = scale * (np.exp(-spec.theta * np.abs(t - s)) - np.exp(-spec.theta * (t + s)))
    return float(out) if out.ndim == 0 else out


def covariance_matrix(spec: ProcessSpec, grid: Grid) -> np.ndarray:
    t = grid.points
    C = covariance_eval(spec, t[:, None], t[None, :])
    # exact symmetry regardless of floating point evaluation order
    return np.triu(C) + np.triu(C, 1).T


def process_kappa_c(spec: ProcessSpec) -> Tuple[float, Callable[[float], float]]:
    """Roughness exponent ``kappa`` and the diagonal constant ``c(t)``.

    Near the diagonal ``sigma(t, s) = sigma(t, t) - c(t)|t - s|^kappa + ...``.
    """
    if spec.kind == "fbm":
        return 2.0 * spec.hurst, lambda t: 0.5
    if spec.kind == "ou":
        c = spec.sigma_u**2 / 2.0
        return 1.0, lambda t: c
    return 1.0, lambda t: 0.5


def _check_domain(spec: ProcessSpec, grid: Grid):
    if grid.a < 0:
        raise InvalidSpecError(f"{spec.kind} processes are defined on [a, b] with a >= 0, got a={grid.a}")


def simulate_ou(n: int, grid: Grid, theta: float, sigma_u: float, seed: int) -> FunctionalDataset:
    """Exact OU trajectories via the AR(1) updating formula.

    ``X(t + h) = exp(-theta h) X(t) + sqrt(sigma_u^2/(2 theta) (1 - exp(-2 theta h))) xi``.
    The process starts at ``X(0) = 0``; when ``a > 0`` the first value is drawn
    from the exact marginal at time ``a``.
    """
    spec = ProcessSpec.ou(theta, sigma_u)
    _check_domain(spec, grid)
    if n < 1:
        raise InvalidSpecError(f"n must be >= 1, got {n}")
    var_inf = sigma_u**2 / (2.0 * theta)
    rho = math.exp(-theta * grid.h)
    step_sd = math.sqrt(var_inf * -math.expm1(-2.0 * theta * grid.h))
    xi = row_normals(seed, "ou", n, grid.p)
    start_sd = math.sqrt(var_inf * -math.expm1(-2.0 * theta * grid.a))
    # column 0 of xi seeds the starting value, columns 1.. drive the increments
    x0 = start_sd * xi[:, 0]
    zi = (rho * x0)[:, None]
    X = np.empty((n, grid.p))
    X[:, 0] = x0
    X[:, 1:] = signal.lfilter([step_sd], [1.0, -rho], xi[:, 1:], axis=1, zi=zi)[0]
    return FunctionalDataset(grid, X, meta={"process": spec.to_dict(), "seed": seed})


def _zero_variance_mask(C: np.ndarray) -> np.ndarray:
    return np.diag(C) <= 0.0


def _cholesky_factor(C: np.ndarray) -> Tuple[np.ndarray, float]:
    """Lower Cholesky factor, with a ridge of 1e-12 trace/p on failure."""
    L, info = linalg.lapack.dpotrf(C, lower=1, clean=1)
    if info == 0:
        return L, 0.0
    ridge = 1e-12 * np.trace(C) / C.shape[0]
    warnings.warn(
        f"covariance factorization failed at pivot {info}; retrying with ridge {ridge:.3g}",
        RuntimeWarning,
        stacklevel=3,
    )
    L, info2 = linalg.lapack.dpotrf(C + ridge * np.eye(C.shape[0]), lower=1, clean=1)
    if info2 != 0:
        pivot = info2 if info2 > 0 else info
        smallest = float(np.min(linalg.eigvalsh(C)))
        raise NumericalDegeneracyError(
            f"covariance not positive definite: factorization fails at pivot {pivot} "
            f"(smallest eigenvalue {smallest:.3g})"
        )
    return L, ridge


def simulate_from_covariance(n: int, grid: Grid, spec: ProcessSpec, seed: int) -> FunctionalDataset:
    """Exact Gaussian sampler via a dense Cholesky factor of the grid covariance.

    Grid points with zero variance (e.g. ``t = 0``) are pinned to zero and left
    out of the factorization.
    """
    _check_domain(spec, grid)
    if n < 1:
        raise InvalidSpecError(f"n must be >= 1, got {n}")
    if grid.p > MAX_DENSE_POINTS:
        raise InvalidSpecError(f"dense sampling supports p <= {MAX_DENSE_POINTS}, got {grid.p}")
    C = covariance_matrix(spec, grid)
    live = ~_zero_variance_mask(C)
    L, ridge = _cholesky_factor(C[np.ix_(live, live)])
    xi = row_normals(seed, "cov", n, int(live.sum()))
    X = np.zeros((n, grid.p))
    X[:, live] = xi @ L.T
    meta = {"process": spec.to_dict(), "seed": seed}
    if ridge:
        meta["ridge"] = ridge
    return FunctionalDataset(grid, X, meta=meta)


def simulate(n: int, grid: Grid, spec: ProcessSpec, seed: int) -> FunctionalDataset:
    """Dispatch to the exact OU recursion or the dense sampler."""
    if spec.kind == "ou":
        return simulate_ou(n, grid, spec.theta, spec.sigma_u, seed)
    return simulate_from_covariance(n, grid, spec, seed)
