"""Goal-oriented optimal experimental design for implicit models.

Estimates the expected information gain of a design about a downstream
quantity of interest when the model is available only as a simulator:
approximate Bayesian computation provides conditional samples, and direct
density-ratio estimation (uLSIF / KLIEP / RuLSIF) turns them into utility
values, which grid sweeps or Gaussian-process optimization then maximize
over the design space.
"""

from .abc import AbcConfig, abc_reject, build_pool, condition, cv_select_threshold
from .densratio import (
    CvGrid,
    RatioFitError,
    RatioModel,
    cross_validate,
    fit_kliep,
    fit_rulsif,
    fit_ulsif,
)
from .design_opt import BoState, DesignGrid, SweepResult, bayes_opt, grid_sweep
from .estimators import (
    EstimationError,
    EstimatorConfig,
    UtilityEstimate,
    estimate_utility,
    utility_dr1,
    utility_dr2,
    utility_kde,
    utility_nmc_param,
    utility_nmc_z1,
    utility_nmc_z2,
)
from .models import MODEL_REGISTRY, ImplicitModel, get_model
from .rng import RngStream

__version__ = "1.0.0"

__all__ = [
    "AbcConfig",
    "abc_reject",
    "build_pool",
    "condition",
    "cv_select_threshold",
    "CvGrid",
    "RatioFitError",
    "RatioModel",
    "cross_validate",
    "fit_kliep",
    "fit_rulsif",
    "fit_ulsif",
    "BoState",
    "DesignGrid",
    "SweepResult",
    "bayes_opt",
    "grid_sweep",
    "EstimationError",
    "EstimatorConfig",
    "UtilityEstimate",
    "estimate_utility",
    "utility_dr1",
    "utility_dr2",
    "utility_kde",
    "utility_nmc_param",
    "utility_nmc_z1",
    "utility_nmc_z2",
    "MODEL_REGISTRY",
    "ImplicitModel",
    "get_model",
    "RngStream",
    "__version__",
]
