"""Shared result type and the residual bootstrap used by the imputation estimators."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import stats

from ..did import Z975
from ..panel import PanelDataset, TreatmentSpec
from ..inference import rng

# (controls (J, T), treated series (T,), pre mask (T,)) -> treated counterfactual (T,)
Imputer = Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]


@dataclass(eq=False)
class AdvEstimate:
    att: float
    standard_error: float
    ci95: tuple[float, float]
    p_value: float
    method: str
    nuisance: dict = field(default_factory=dict)
    years: tuple[int, ...] = ()
    actual: np.ndarray | None = None
    counterfactual: np.ndarray | None = None

    def __post_init__(self):
        lo, hi = self.ci95
        if lo > hi:
            raise ValueError("ci95 must be ordered")
        if not (np.isnan(self.p_value) or 0.0 <= self.p_value <= 1.0):
            raise ValueError("p_value must lie in [0, 1]")

    @property
    def gaps(self) -> np.ndarray:
        return self.actual - self.counterfactual

    def summary(self) -> dict:
        return {"method": self.method, "att": self.att, "standard_error": self.standard_error,
                "ci_low": self.ci95[0], "ci_high": self.ci95[1], "p_value": self.p_value}


def split_panel(p: PanelDataset, t: TreatmentSpec, outcome: str):
    t.validate(p)
    p.require(outcome)
    M = p.matrix(outcome)
    y = M[p.unit_index(t.treated_unit)].astype(float)
    Y = M[[p.unit_index(d) for d in t.donor_pool]].astype(float)
    pre = np.asarray(p.years) < t.treatment_year
    return y, Y, pre


@dataclass(eq=False)
class BootstrapResult:
    draws: np.ndarray
    residuals: np.ndarray
    standard_error: float
    p_value: float


def residual_bootstrap(Y: np.ndarray, y: np.ndarray, pre: np.ndarray, att: float, impute: Imputer,
                       n_boot: int, seed: int, threads: int = 1) -> BootstrapResult:
    """Parametric bootstrap under the no-effect null.

    Each control is imputed from the others to get a prediction-error path
    ``e_j``. Draw ``b`` resamples the controls with replacement and builds a
    pseudo-treated series ``counterfactual + e_j*``; the spread of the
    resulting ATTs gives the SE, and the share with ``|ATT_b| >= |ATT|`` the
    p-value.
    """
    J = Y.shape[0]
    post = ~pre
    if n_boot < 1:
        return BootstrapResult(np.empty(0), np.empty((0, Y.shape[1])), float("nan"), float("nan"))
    cf = impute(Y, y, pre)
    E = np.stack([Y[j] - impute(np.delete(Y, j, axis=0), Y[j], pre) for j in range(J)])

    def one(b):
        draw = rng.integers(seed, np.array([b], dtype=np.uint64), J + 1, J)[0]
        ystar = cf + E[draw[-1]]
        Yb = Y[draw[:-1]]
        return float(np.mean((ystar - impute(Yb, ystar, pre))[post]))

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            draws = np.array(list(ex.map(one, range(n_boot))))
    else:
        draws = np.array([one(b) for b in range(n_boot)])
    se = float(draws.std(ddof=1)) if n_boot > 1 else float("nan")
    pv = float(np.mean(np.abs(draws) >= abs(att)))
    return BootstrapResult(draws, E, se, pv)


def normal_interval(att: float, se: float) -> tuple[float, float]:
    if not np.isfinite(se):
        return (float("nan"), float("nan")) if np.isnan(att) else (att, att)
    return att - Z975 * se, att + Z975 * se


def normal_p(att: float, se: float) -> float:
    if not np.isfinite(se):
        return float("nan")
    if se == 0:
        return 0.0 if att != 0 else 1.0
    return float(2 * stats.norm.sf(abs(att / se)))
