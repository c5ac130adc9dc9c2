"""Interactive fixed effects (generalised synthetic control) imputation."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from ..errors import FactorRangeInvalid, NonConvergence
from ..panel import PanelDataset, TreatmentSpec
from .common import AdvEstimate, normal_interval, residual_bootstrap, split_panel


def fit_factors(Y: np.ndarray, n_factors: int, tol: float = 1e-10, max_iter: int = 500):
    """Two-way effects plus ``n_factors`` factors on a complete control matrix by ALS.

    Returns ``(alpha (J,), xi (T,), F (T, r), L (J, r))`` with
    ``Y ~ alpha + xi + L F'``. Starting from zero factors the alternation
    reaches its fixed point (the truncated SVD of the doubly demeaned matrix)
    within a couple of sweeps.
    """
    J, T = Y.shape
    low = np.zeros_like(Y)
    mu = Y.mean()
    for it in range(max_iter):
        R = Y - low
        alpha = R.mean(axis=1) - R.mean()
        xi = R.mean(axis=0)
        D = Y - alpha[:, None] - xi[None, :]
        if n_factors == 0:
            return alpha, xi, np.zeros((T, 0)), np.zeros((J, 0))
        U, s, Vt = np.linalg.svd(D, full_matrices=False)
        new = (U[:, :n_factors] * s[:n_factors]) @ Vt[:n_factors]
        delta = np.linalg.norm(new - low)
        low = new
        if delta <= tol * max(1.0, np.linalg.norm(Y - mu)):
            F = Vt[:n_factors].T * np.sqrt(T)
            L = U[:, :n_factors] * s[:n_factors] / np.sqrt(T)
            return alpha, xi, F, L
    raise NonConvergence(f"factor ALS did not converge in {max_iter} sweeps", operation="fit_gsynth")


def _treated_fit(y, xi, F, rows):
    """Intercept and loadings of the treated unit from ``rows`` of ``y - xi``."""
    Z = np.column_stack([np.ones(rows.sum()), F[rows]])
    coef, *_ = np.linalg.lstsq(Z, (y - xi)[rows], rcond=None)
    return coef


def imputer(n_factors: int):
    def impute(Y, y, pre):
        _, xi, F, _ = fit_factors(Y, n_factors)
        coef = _treated_fit(y, xi, F, pre)
        return xi + np.column_stack([np.ones(len(xi)), F]) @ coef
    return impute


def cv_factor_count(Y, y, pre, factor_range: Sequence[int]) -> tuple[int, dict[int, float]]:
    """Leave-one-pre-year-out MSE of the treated unit for each candidate count; ties go low."""
    pre_idx = np.flatnonzero(pre)
    scores = {}
    for r in sorted(set(int(r) for r in factor_range)):
        _, xi, F, _ = fit_factors(Y, r)
        Z = np.column_stack([np.ones(len(xi)), F])
        errs = []
        for s in pre_idx:
            rows = pre.copy()
            rows[s] = False
            coef = _treated_fit(y, xi, F, rows)
            errs.append(y[s] - xi[s] - Z[s] @ coef)
        scores[r] = float(np.mean(np.square(errs)))
    best = min(scores.values())
    # scores at rounding level (exact fits) count as ties
    tol = best * 1e-9 + 1e-20 * float(np.mean(np.square(y[pre])))
    chosen = min(r for r, v in scores.items() if v <= best + tol)
    return chosen, scores


def fit_gsynth(p: PanelDataset, t: TreatmentSpec, outcome: str, factor_range: Sequence[int] = (0, 1, 2, 3),
               n_boot: int = 500, seed: int = 0, threads: int = 1) -> AdvEstimate:
    """Impute the treated post-period from control factors; F by cross-validation."""
    y, Y, pre = split_panel(p, t, outcome)
    J, T_pre = Y.shape[0], int(pre.sum())
    limit = min(J, T_pre) - 2
    factor_range = tuple(factor_range)
    if not factor_range or min(factor_range) < 0 or max(factor_range) > limit:
        raise FactorRangeInvalid(f"factor range {factor_range} must lie in [0, {limit}]")
    r, scores = cv_factor_count(Y, y, pre, factor_range) if len(set(factor_range)) > 1 \
        else (factor_range[0], {})
    impute = imputer(r)
    cf = impute(Y, y, pre)
    att = float(np.mean((y - cf)[~pre]))
    boot = residual_bootstrap(Y, y, pre, att, impute, n_boot, seed, threads)
    nuisance = {"n_factors": r, "cv_mse": scores, "n_boot": n_boot, "seed": seed,
                "inference": "parametric bootstrap on control prediction errors"}
    return AdvEstimate(att, boot.standard_error, normal_interval(att, boot.standard_error), boot.p_value,
                       "ife" if r > 0 else "fixed_effects", nuisance, tuple(p.years), y, cf)
