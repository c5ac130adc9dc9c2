"""Matrix-completion counterfactuals via soft-impute."""

from __future__ import annotations

import numpy as np

from ..panel import PanelDataset, TreatmentSpec
from ..solvers import SolverOptions, soft_impute_path
from .common import AdvEstimate, normal_interval, residual_bootstrap, split_panel

LAMBDA_VARIANTS = {"low": 0.005, "high": 0.05}
MC_SOLVER = SolverOptions(convergence_epsilon=1e-10, max_iterations=50000)


def _threshold(M, mask, lam):
    """``lam`` scaled by the top singular value of the doubly demeaned observed matrix."""
    Z = np.where(mask, M, 0.0)
    Z = Z - Z.mean(axis=1, keepdims=True) - Z.mean(axis=0, keepdims=True) + Z.mean()
    return lam * float(np.linalg.norm(Z, 2))


def imputer(lam: float, opts: SolverOptions = MC_SOLVER):
    def impute(Y, y, pre):
        M = np.vstack([y[None, :], Y])
        mask = np.ones_like(M, dtype=bool)
        mask[0, ~pre] = False
        res = soft_impute_path(M, mask, _threshold(M, mask, lam), opts, two_way=True)
        return res.fitted[0]
    return impute


def fit_matrix_completion(p: PanelDataset, t: TreatmentSpec, outcome: str, lam: float = 0.05,
                          n_boot: int = 500, seed: int = 0, threads: int = 1,
                          opts: SolverOptions = MC_SOLVER) -> AdvEstimate:
    """Mask treated post cells, complete the unit x year matrix, average actual minus imputed.

    ``lam`` is relative: the singular-value threshold is ``lam`` times the
    spectral norm of the doubly demeaned observed matrix.
    """
    if lam < 0:
        raise ValueError("lambda must be >= 0")
    y, Y, pre = split_panel(p, t, outcome)
    impute = imputer(lam, opts)
    cf = impute(Y, y, pre)
    att = float(np.mean((y - cf)[~pre]))
    boot = residual_bootstrap(Y, y, pre, att, impute, n_boot, seed, threads)
    M = np.vstack([y[None, :], Y])
    mask = np.ones_like(M, dtype=bool)
    mask[0, ~pre] = False
    nuisance = {"lambda": lam, "threshold": _threshold(M, mask, lam), "n_boot": n_boot, "seed": seed,
                "variant": next((k for k, v in LAMBDA_VARIANTS.items() if v == lam), "custom")}
    return AdvEstimate(att, boot.standard_error, normal_interval(att, boot.standard_error), boot.p_value,
                       "matrix_completion", nuisance, tuple(p.years), y, cf)
