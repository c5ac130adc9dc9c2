"""Synthetic control with signed, unnormalised LASSO weights."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from ..panel import PanelDataset, TreatmentSpec
from ..scm import GapSeries, PredictorWeights, ScmFit, WeightVector, rmse
from ..solvers import lasso_fit, lasso_lambda_max


def loyo_cv(X: np.ndarray, y: np.ndarray, grid: Sequence[float]) -> dict[float, float]:
    """Leave-one-year-out squared prediction error for each penalty.

    Each fold walks the grid from the largest penalty down, warm-starting
    coordinate descent from the previous solution.
    """
    n = len(y)
    order = sorted({float(g) for g in grid}, reverse=True)
    err = dict.fromkeys(order, 0.0)
    for s in range(n):
        keep = np.arange(n) != s
        warm = None
        for lam in order:
            fit = lasso_fit(X[keep], y[keep], lam, warm_start=warm)
            warm = fit.coef_std
            err[lam] += float(y[s] - fit.intercept - X[s] @ fit.coef) ** 2
    return {lam: e / n for lam, e in err.items()}


def default_grid(X, y, n: int = 15, ratio: float = 1e-2) -> list[float]:
    top = lasso_lambda_max(X, y)
    return list(np.geomspace(top, top * ratio, n)) if top > 0 else [0.0]


def fit_lasso_scm(p: PanelDataset, t: TreatmentSpec, outcome: str,
                  lambda_grid: Sequence[float] | None = None, seed: int = 0) -> ScmFit:
    """Treated pre-period path regressed on donor paths (years as observations).

    ``seed`` is recorded only; the leave-one-year-out split is deterministic.
    Ties in CV error go to the larger penalty.
    """
    t.validate(p)
    M = p.matrix(outcome)
    y = M[p.unit_index(t.treated_unit)]
    Q0 = M[[p.unit_index(d) for d in t.donor_pool]].T  # (T, J)
    pre = np.asarray(p.years) < t.treatment_year
    X, yp = Q0[pre], y[pre]
    grid = list(lambda_grid) if lambda_grid is not None else default_grid(X, yp)
    if not grid or min(grid) < 0:
        raise ValueError("lambda grid must be non-empty and nonnegative")
    if len(grid) == 1:
        lam, cv = float(grid[0]), {}
    else:
        cv = loyo_cv(X, yp, grid)
        best = min(cv.values())
        lam = max(k for k, v in cv.items() if v <= best)
    fit = lasso_fit(X, yp, lam)
    w = fit.coef
    cf = fit.intercept + Q0 @ w
    gaps = GapSeries(tuple(p.years), y - cf, t.treatment_year)
    weights = WeightVector(dict(zip(t.donor_pool, map(float, w))), float(fit.intercept), "signed")
    pw = PredictorWeights({f"{outcome}@pre": 1.0}, "lasso", {str(k): v for k, v in cv.items()})
    return ScmFit(t.treated_unit, outcome, t.treatment_year, tuple(p.years), weights, pw, y.astype(float), cf,
                  gaps, rmse(gaps.pre), rmse(gaps.post), False, fit.converged)
