"""
Gaussian processes on a grid and their roughness
================================================

Simulates Brownian motion, fractional Brownian motion and an
Ornstein-Uhlenbeck process, then estimates the roughness exponent kappa
from ratios of second-difference mean squares.
"""

import numpy as np

from pointimpact import Grid, ProcessSpec, covariance_matrix, estimate_kappa, simulate
from pointimpact.detection import z_delta

grid = Grid(0.0, 1.0, 2001)

# %%
# Each process family carries its own kappa: 1 for BM and OU, 2H for fBM.
specs = {
    "Brownian motion": ProcessSpec.brownian(),
    "fBM, H=0.25": ProcessSpec.fbm(0.25),
    "fBM, H=0.75": ProcessSpec.fbm(0.75),
    "OU, theta=5, sigma_u=3.5": ProcessSpec.ou(5.0, 3.5),
}

for name, spec in specs.items():
    X = simulate(1000, grid, spec, seed=1)
    k_hat = estimate_kappa(X, 20 * grid.h)
    print(f"{name:28s} kappa_hat = {k_hat:.3f}")

# %%
# For BM the variance of Z at any interior point is delta/2.  The empirical
# version over many curves sits close to it.
delta = 0.02
bm = simulate(20000, Grid(0.0, 1.0, 1001), ProcessSpec.brownian(), seed=2)
Z, idx = z_delta(bm, delta)
print(f"\nVar Z(0.5) = {Z[:, idx == 500].var():.5f}  (theory {delta / 2})")

# %%
# The covariance matrices are exactly symmetric; OU starts at X(0) = 0.
C = covariance_matrix(ProcessSpec.ou(5.0, 3.5), Grid(0.0, 1.0, 6))
print("\nOU covariance on 6 points:\n", np.round(C, 4))
