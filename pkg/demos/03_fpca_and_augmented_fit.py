"""
Principal components plus points of impact
==========================================

Fits the augmented model on one sample of the smooth-slope design: the
empirical Karhunen-Loeve basis captures the smooth part of the effect and the
point values at the detected locations capture the rest.
"""

import numpy as np

from pointimpact import (
    DESIGN_SLOPE,
    Grid,
    ImpactModelSpec,
    PipelineConfig,
    ProcessSpec,
    QuadratureRule,
    center,
    empirical_kl,
    fit_pipeline,
    generate_response,
    integrated_squared_error,
    simulate,
)

grid = Grid(0.0, 1.0, 1001)
rule = QuadratureRule.trapezoid(grid)
model = ImpactModelSpec((0.25, 0.75), (2.0, 1.0), DESIGN_SLOPE, 1.0)

X = simulate(1000, grid, ProcessSpec.ou(5.0, 3.5), seed=10)
y = generate_response(X, model, rule, seed=11)
data = X.with_responses(y)

# %%
# Leading eigenvalues of the empirical covariance operator.
cdata, _, _ = center(data)
eig = empirical_kl(cdata, 6, rule)
print("eigenvalues:", np.round(eig.eigenvalues, 4))

# %%
# The full pipeline: window from delta = 1/sqrt(n), candidates, best subset
# by BIC over score blocks and impact subsets.
pf = fit_pipeline(data, PipelineConfig())
fit = pf.fit
print(f"k_hat = {fit.k}, tau_hat = {fit.selected_taus}, beta_hat = {np.round(fit.beta_hat_impacts, 3)}")
print(f"ISE of the slope = {integrated_squared_error(fit.beta_hat_curve, DESIGN_SLOPE.evaluate(grid), rule):.3f}")

# %%
# Predictions for fresh curves use the training means and basis.
X_new = simulate(5, grid, ProcessSpec.ou(5.0, 3.5), seed=12)
y_new = generate_response(X_new, model, rule, seed=13)
print("predicted:", np.round(pf.predict(X_new.curves), 2))
print("observed: ", np.round(y_new, 2))
