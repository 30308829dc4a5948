"""Responses from the functional linear model with points of impact.

``Y_i = int beta(t) X_i(t) dt + sum_r beta_r X_i(tau_r) + eps_i``
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from ._seeding import stream
from .errors import DimensionError, InvalidSpecError, LocationError
from .gp_sim import FunctionalDataset, Grid


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    """Weights ``w_j`` such that ``int f g = sum_j w_j f(t_j) g(t_j)``."""

    weights: np.ndarray
    kind: str = "custom"

    def __post_init__(self):
        w = np.array(self.weights, dtype=float).reshape(-1)
        if np.any(w < 0):
            raise InvalidSpecError("quadrature weights must be nonnegative")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @property
    def p(self) -> int:
        return self.weights.size

    @classmethod
    def trapezoid(cls, grid: Grid) -> "QuadratureRule":
        w = np.full(grid.p, grid.h)
        w[0] = w[-1] = grid.h / 2.0
        return cls(w, "trapezoid")

    @classmethod
    def riemann(cls, grid: Grid) -> "QuadratureRule":
        """Equal weights ``(b - a)/p``, i.e. the ``(1/p) sum`` approximation on [0, 1]."""
        return cls(np.full(grid.p, grid.length / grid.p), "riemann")

    @classmethod
    def for_grid(cls, grid: Grid, kind: str = "trapezoid") -> "QuadratureRule":
        if kind == "trapezoid":
            return cls.trapezoid(grid)
        if kind == "riemann":
            return cls.riemann(grid)
        raise InvalidSpecError(f"unknown quadrature kind {kind!r}")


def quadrature_inner(f, g, rule: QuadratureRule):
    """Quadrature inner product; ``f`` or ``g`` may be stacks of curves (rows)."""
    f = np.asarray(f, dtype=float)
    g = np.asarray(g, dtype=float)
    if f.shape[-1] != rule.p or g.shape[-1] != rule.p:
        raise DimensionError(f"curves of length {f.shape[-1]} and {g.shape[-1]} vs {rule.p} weights")
    out = (f * rule.weights) @ g.T if (f.ndim > 1 or g.ndim > 1) else np.dot(f * rule.weights, g)
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True, eq=False)
class SlopeFunction:
    """Slope ``beta(t)``: zero, a polynomial, or values sampled on a grid.

    Polynomial coefficients are in increasing powers, ``c0 + c1 t + c2 t^2 + ...``.
    """

    kind: str = "zero"
    coefficients: Optional[tuple] = None
    values: Optional[np.ndarray] = None

    @classmethod
    def zero(cls) -> "SlopeFunction":
        return cls("zero")

    @classmethod
    def polynomial(cls, coefficients: Sequence[float]) -> "SlopeFunction":
        return cls("polynomial", coefficients=tuple(float(c) for c in coefficients))

    @classmethod
    def sampled(cls, values) -> "SlopeFunction":
        v = np.array(values, dtype=float)
        v.setflags(write=False)
        return cls("sampled", values=v)

    @property
    def is_zero(self) -> bool:
        return self.kind == "zero"

    def evaluate(self, grid: Grid) -> np.ndarray:
        if self.kind == "zero":
            return np.zeros(grid.p)
        if self.kind == "polynomial":
            return np.polynomial.polynomial.polyval(grid.points, self.coefficients)
        if self.values.size != grid.p:
            raise DimensionError(f"sampled slope has {self.values.size} values, grid has {grid.p}")
        return np.array(self.values)

    def to_dict(self) -> dict:
        if self.kind == "polynomial":
            return {"kind": "polynomial", "coefficients": list(self.coefficients)}
        if self.kind == "sampled":
            return {"kind": "sampled", "values": self.values.tolist()}
        return {"kind": "zero"}


# slope used in the smooth-slope simulation design: 3.5t^3 - 5.5t^2 + 3t + 0.5
DESIGN_SLOPE = SlopeFunction.polynomial([0.5, 3.0, -5.5, 3.5])


@dataclass(frozen=True)
class ImpactModelSpec:
    taus: tuple = ()
    betas: tuple = ()
    slope: SlopeFunction = SlopeFunction.zero()
    noise_sd: float = 1.0

    def __post_init__(self):
        taus = tuple(float(t) for t in self.taus)
        betas = tuple(float(b) for b in self.betas)
        if len(taus) != len(betas):
            raise InvalidSpecError(f"{len(taus)} impact locations but {len(betas)} coefficients")
        if any(t2 <= t1 for t1, t2 in zip(taus, taus[1:])):
            raise InvalidSpecError("impact locations must be strictly increasing")
        if not self.noise_sd >= 0:
            raise InvalidSpecError(f"noise_sd must be >= 0, got {self.noise_sd}")
        object.__setattr__(self, "taus", taus)
        object.__setattr__(self, "betas", betas)

    @property
    def S(self) -> int:
        return len(self.taus)

    def to_dict(self) -> dict:
        return {
            "taus": list(self.taus),
            "betas": list(self.betas),
            "slope": self.slope.to_dict(),
            "noise_sd": self.noise_sd,
        }


def snap_taus(taus: Sequence[float], grid: Grid) -> np.ndarray:
    """Grid indices of impact locations.

    Locations off the grid by more than 1e-9 h are snapped to the nearest
    point with a warning; locations outside ``(a, b)`` are rejected.
    """
    idx = []
    for tau in taus:
        if not grid.a < tau < grid.b:
            raise LocationError(f"impact location {tau} is not inside ({grid.a}, {grid.b})")
        j = grid.index_of(tau)
        off = abs(grid.points[j] - tau)
        if off > grid.h / 2 * (1 + 1e-12):
            raise LocationError(f"impact location {tau} is {off:.3g} away from the grid")
        if off > 1e-9 * grid.h:
            warnings.warn(f"impact location {tau} snapped to grid point {grid.points[j]!r}", UserWarning, stacklevel=2)
        idx.append(j)
    return np.array(idx, dtype=int)


def generate_response(
    X: FunctionalDataset, spec: ImpactModelSpec, rule: QuadratureRule, seed: int
) -> np.ndarray:
    """Responses ``Y`` for the curves in ``X``; noise for case ``i`` uses stream ``i``."""
    if rule.p != X.grid.p:
        raise DimensionError(f"quadrature has {rule.p} weights, grid has {X.grid.p} points")
    y = np.zeros(X.n)
    if not spec.slope.is_zero:
        y += quadrature_inner(X.curves, spec.slope.evaluate(X.grid), rule)
    if spec.S:
        idx = snap_taus(spec.taus, X.grid)
        y += X.curves[:, idx] @ np.asarray(spec.betas)
    if spec.noise_sd > 0:
        eps = np.array([stream(seed, "noise", i).standard_normal() for i in range(X.n)])
        y += spec.noise_sd * eps
    return y
