"""Functional linear regression with points of impact.

Simulate Gaussian process curves, detect the grid locations whose values
carry a specific effect on a scalar response, and fit the augmented model
combining functional principal component scores with those point values.
"""

from .detection import (
    CandidateList,
    DetectionConfig,
    DetectionResult,
    ThresholdResult,
    default_cutoff,
    default_delta,
    detect,
    detect_candidates,
    estimate_kappa,
    statistic_profile,
    threshold_select,
    z_delta,
)
from .errors import (
    BudgetError,
    DataError,
    NumericalDegeneracyError,
    NumericalError,
    PointImpactError,
    SingularDesignError,
    WindowError,
)
from .evaluation import (
    PipelineConfig,
    StudyConfig,
    StudyReport,
    fit_pipeline,
    integrated_squared_error,
    loocv_mspe,
    match_impacts,
    run_simulation_study,
)
from .fpca import EigenSystem, center, empirical_kl, local_variation_decompose, project_scores
from .gp_sim import FunctionalDataset, Grid, ProcessSpec, covariance_eval, covariance_matrix, simulate
from .model_sim import DESIGN_SLOPE, ImpactModelSpec, QuadratureRule, SlopeFunction, generate_response
from .regression import AugmentedFit, best_subset_bic, bic_score, fit_augmented, fit_impact_only, predict, select_delta

__version__ = "0.1.0"
