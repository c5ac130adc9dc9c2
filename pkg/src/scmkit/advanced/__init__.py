from .common import AdvEstimate, residual_bootstrap
from .gsynth import cv_factor_count, fit_factors, fit_gsynth
from .lasso_scm import fit_lasso_scm
from .mc import LAMBDA_VARIANTS, fit_matrix_completion
from .montecarlo import StudyConfig, StudyResult, recovery_study
from .sdid import SdidResult, fit_sdid, sdid_weights
from .simulate import FactorModelSpec, SimulatedPanel, simulate_factor_panel

__all__ = [
    "AdvEstimate", "residual_bootstrap", "cv_factor_count", "fit_factors", "fit_gsynth", "fit_lasso_scm",
    "LAMBDA_VARIANTS", "fit_matrix_completion", "SdidResult", "fit_sdid", "sdid_weights",
    "FactorModelSpec", "SimulatedPanel", "simulate_factor_panel", "StudyConfig", "StudyResult", "recovery_study",
]
