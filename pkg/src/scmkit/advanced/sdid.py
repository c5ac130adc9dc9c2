"""Synthetic difference-in-differences with simplex unit and time weights."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import EmptyDonorPool, InvalidTreatment
from ..panel import PanelDataset, TreatmentSpec
from ..solvers import SolverOptions, simplex_least_squares
from .common import normal_interval, normal_p, split_panel

SDID_SOLVER = SolverOptions(convergence_epsilon=1e-10)


@dataclass(eq=False)
class SdidResult:
    tau: float
    unit_weights: dict[str, float]
    time_weights: dict[int, float]
    standard_error: float
    ci95: tuple[float, float]
    p_value: float
    unit_intercept: float = 0.0
    time_intercept: float = 0.0
    placebo_taus: dict[str, float] = field(default_factory=dict)
    nuisance: dict = field(default_factory=dict)

    def __post_init__(self):
        for name, w in (("unit", self.unit_weights), ("time", self.time_weights)):
            v = np.array(list(w.values()))
            if v.size and (v.min() < -1e-6 or abs(v.sum() - 1) > 1e-6):
                raise ValueError(f"{name} weights off the simplex")

    def nonzero_units(self, tol: float = 1e-8) -> int:
        return sum(w > tol for w in self.unit_weights.values())

    def nonzero_times(self, tol: float = 1e-8) -> int:
        return sum(w > tol for w in self.time_weights.values())

    def summary(self) -> dict:
        return {"method": "sdid", "att": self.tau, "standard_error": self.standard_error,
                "ci_low": self.ci95[0], "ci_high": self.ci95[1], "p_value": self.p_value,
                "nonzero_unit_weights": self.nonzero_units(), "nonzero_time_weights": self.nonzero_times()}


def noise_scale(Y: np.ndarray, pre: np.ndarray) -> float:
    """Sd of first differences of control pre-period outcomes."""
    d = np.diff(Y[:, pre], axis=1)
    return float(d.std(ddof=1)) if d.size > 1 else 0.0


def sdid_weights(Y: np.ndarray, y: np.ndarray, pre: np.ndarray, zeta: float | None = None,
                 opts: SolverOptions = SDID_SOLVER):
    """Unit weights ``(omega, omega0)``, time weights ``(lam, lam0)`` and the ``zeta`` used."""
    post = ~pre
    J, T_pre, T_post = Y.shape[0], int(pre.sum()), int(post.sum())
    sigma = noise_scale(Y, pre)
    if zeta is None:
        zeta = (1 * T_post) ** 0.25 * sigma
    omega, omega0 = simplex_least_squares(y[pre], Y[:, pre].T, ridge=zeta ** 2 * T_pre, intercept=True, opts=opts)
    zeta_t = 1e-6 * sigma
    lam, lam0 = simplex_least_squares(Y[:, post].mean(axis=1), Y[:, pre], ridge=zeta_t ** 2 * J,
                                      intercept=True, opts=opts)
    return (omega, omega0), (lam, lam0), zeta


def sdid_tau(Y, y, pre, omega, lam) -> float:
    post = ~pre
    d_t = y[post].mean() - lam @ y[pre]
    d_c = Y[:, post].mean(axis=1) - Y[:, pre] @ lam
    return float(d_t - omega @ d_c)


def _estimate(Y, y, pre, zeta, opts):
    (omega, w0), (lam, l0), z = sdid_weights(Y, y, pre, zeta, opts)
    return sdid_tau(Y, y, pre, omega, lam), omega, w0, lam, l0, z


def fit_sdid(p: PanelDataset, t: TreatmentSpec, outcome: str, regularization: float | None = None,
             placebo_se: bool = True, opts: SolverOptions = SDID_SOLVER) -> SdidResult:
    """SDID point estimate; SE from re-running the estimator with each donor as pseudo-treated.

    ``regularization`` overrides ``zeta``; by default
    ``zeta = (N_treated * T_post)^(1/4) * sigma`` with ``sigma`` from
    ``noise_scale``. The unit problem uses ridge ``zeta^2 * T_pre``.
    """
    if len(t.donor_pool) < 2:
        raise EmptyDonorPool("SDID needs at least two donors", operation="fit_sdid")
    y, Y, pre = split_panel(p, t, outcome)
    if pre.sum() < 2 or (~pre).sum() < 1:
        raise InvalidTreatment("SDID needs >= 2 pre-years and >= 1 post-year", operation="fit_sdid")
    tau, omega, w0, lam, l0, zeta = _estimate(Y, y, pre, regularization, opts)
    placebo = {}
    se = float("nan")
    if placebo_se and len(t.donor_pool) >= 3:
        for j, d in enumerate(t.donor_pool):
            placebo[d] = _estimate(np.delete(Y, j, axis=0), Y[j], pre, regularization, opts)[0]
        se = float(np.std(list(placebo.values()), ddof=0))
    pre_years = [yr for yr, m in zip(p.years, pre) if m]
    nuisance = {"zeta": zeta, "zeta_rule": "override" if regularization is not None else "(T_post)^(1/4) * sd(diff)",
                "noise_scale": noise_scale(Y, pre), "variance": "placebo over donors", "n_placebo": len(placebo)}
    return SdidResult(tau, dict(zip(t.donor_pool, map(float, omega))), dict(zip(pre_years, map(float, lam))),
                      se, normal_interval(tau, se), normal_p(tau, se), w0, l0, placebo, nuisance)
