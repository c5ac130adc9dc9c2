"""Two-way fixed-effects difference-in-differences: static, dynamic, event study.

Unit and year effects are absorbed by two-way demeaning, which is exact on a
balanced panel (Frisch-Waugh-Lovell). Standard errors cluster on unit and year
(see ``solvers`` for the finite-sample factors).
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy import stats

from .errors import LagUnavailable
from .panel import PanelDataset, TreatmentSpec
from .solvers import OlsResult, ols_fit

Z975 = float(stats.norm.ppf(0.975))


@dataclass
class DidEstimate:
    effect: float
    standard_error: float
    ci95: tuple[float, float]
    nobs: int
    within_r2: float
    spec: str
    p_value: float = float("nan")
    n_units: int = 0
    metadata: dict = field(default_factory=dict)


@dataclass
class EventStudyResult:
    coefficients: dict[int, tuple[float, float]]
    reference_year: int = -1
    nobs: int = 0
    metadata: dict = field(default_factory=dict)

    def ci95(self, k: int) -> tuple[float, float]:
        b, s = self.coefficients[k]
        return b - Z975 * s, b + Z975 * s

    def rows(self) -> list[dict]:
        out = []
        for k in sorted(self.coefficients):
            b, s = self.coefficients[k]
            lo, hi = self.ci95(k)
            out.append({"relative_year": k, "estimate": b, "standard_error": s, "ci_low": lo, "ci_high": hi})
        return out


def demean_two_way(a: np.ndarray) -> np.ndarray:
    """Remove unit and year means from a ``(units, years[, k])`` array."""
    a = np.asarray(a, dtype=float)
    return a - a.mean(axis=1, keepdims=True) - a.mean(axis=0, keepdims=True) + a.mean(axis=(0, 1), keepdims=True)


def _sample(p: PanelDataset, t: TreatmentSpec):
    units = (t.treated_unit,) + tuple(t.donor_pool)
    idx = [p.unit_index(u) for u in units]
    return units, idx


def _estimate(cols: list[np.ndarray], names: list[str], y: np.ndarray, cluster: str):
    """Stack ``(units, years)`` arrays, demean, and run OLS; coefficient 0 is the target."""
    N, T = y.shape
    Xd = np.stack([demean_two_way(c).ravel() for c in cols], axis=1)
    yd = demean_two_way(y).ravel()
    return _ols(Xd, yd, N, T, cluster, names)


def _ols(Xd: np.ndarray, yd: np.ndarray, N: int, T: int, cluster: str, names) -> OlsResult:
    """OLS on two-way demeaned data.

    ``cluster`` is ``twoway``, ``unit``, ``year``, ``none`` (HC1) or
    ``classical``: homoskedastic ``s^2 (X'X)^-1`` with ``s^2`` on
    ``NT - k - (N + T - 1)`` degrees of freedom, counting the absorbed effects.
    Cluster-robust variances understate the sampling error of coefficients
    identified by a single treated cell, where the classical form stays valid
    under i.i.d. errors.
    """
    unit_lab = np.repeat(np.arange(N), T)
    year_lab = np.tile(np.arange(T), N)
    table = {"twoway": (unit_lab, year_lab), "unit": unit_lab, "year": year_lab, "none": None, "classical": None}
    if cluster not in table:
        raise ValueError(f"cluster must be one of {sorted(table)}")
    res = ols_fit(Xd, yd, clusters=table[cluster], names=names)
    if cluster == "classical":
        dof = N * T - res.k - (N + T - 1)
        if dof < 1:
            raise ValueError("no residual degrees of freedom for the classical variance")
        s2 = res.rss / dof
        res = dataclasses.replace(res, cov=s2 * np.linalg.inv(Xd.T @ Xd), cov_type="classical",
                                  adjustment={"dof": dof})
    return res


def _pack(res: OlsResult, spec: str, n_units: int, metadata: dict) -> DidEstimate:
    b = float(res.coef[0])
    se = float(res.se[0])
    p = float(2 * stats.norm.sf(abs(b / se))) if se > 0 else (0.0 if b != 0 else 1.0)
    meta = {"cov_type": res.cov_type, "adjustment": res.adjustment, "k": res.k, **metadata}
    return DidEstimate(b, se, (b - Z975 * se, b + Z975 * se), res.nobs, res.r2, spec, p, n_units, meta)


def treatment_dummy(p: PanelDataset, t: TreatmentSpec) -> np.ndarray:
    units, _ = _sample(p, t)
    D = np.zeros((len(units), p.n_years))
    D[0, np.asarray(p.years) >= t.treatment_year] = 1.0
    return D


def fit_twfe_did(p: PanelDataset, t: TreatmentSpec, outcome: str, covariates: Sequence[str] = (),
                 cluster: str = "twoway") -> DidEstimate:
    """Static TWFE: outcome on the treated x post dummy with unit and year effects."""
    t.validate(p, min_pre=1)
    p.require(outcome, *covariates)
    units, idx = _sample(p, t)
    y = p.matrix(outcome)[idx]
    cols = [treatment_dummy(p, t)] + [p.matrix(c)[idx] for c in covariates]
    res = _estimate(cols, ["treated_post", *covariates], y, cluster)
    return _pack(res, "static", len(units), {"covariates": list(covariates)})


def fit_dynamic_did(p: PanelDataset, t: TreatmentSpec, outcome: str, covariates: Sequence[str] = (),
                    cluster: str = "twoway", regions: Mapping[str, str] | None = None,
                    unit_trends: bool = True) -> DidEstimate:
    """TWFE with a one-year lagged outcome and interaction controls.

    The saturating unit-by-year interaction used in the literature would
    absorb a single treated unit's dummy, so it is proxied by unit-specific
    linear trends plus, when ``regions`` maps units to regions, region-by-year
    shocks. The output metadata flags this interpretation.
    """
    t.validate(p, min_pre=1)
    p.require(outcome, *covariates)
    if p.n_years < 3 or t.treatment_year - p.years[0] < 2:
        raise LagUnavailable("one-year lag needs at least two pre-treatment years")
    units, idx = _sample(p, t)
    yfull = p.matrix(outcome)[idx]
    y = yfull[:, 1:]
    lag = yfull[:, :-1]
    D = treatment_dummy(p, t)[:, 1:]
    cols = [D, lag] + [p.matrix(c)[idx][:, 1:] for c in covariates]
    names = ["treated_post", f"{outcome}_lag1", *covariates]
    N, T = y.shape
    trend = np.arange(T, dtype=float)
    labels = [regions.get(u, "") for u in units] if regions else [""] * N
    if unit_trends:
        # one donor per region is the trend reference: year (or region-year) effects carry its trend
        refs = {next(i for i in range(1, N) if labels[i] == r) for r in set(labels[1:])}
        for i in [i for i in range(N) if i not in refs]:
            c = np.zeros((N, T))
            c[i] = trend
            cols.append(c)
            names.append(f"trend[{units[i]}]")
    if regions:
        for r in sorted(set(labels))[1:]:
            rows = np.array([lab == r for lab in labels])
            for j in range(1, T):  # the first year is absorbed by the unit effects
                c = np.zeros((N, T))
                c[rows, j] = 1.0
                cols.append(c)
                names.append(f"region_year[{r},{p.years[j + 1]}]")
    res = _estimate(cols, names, y, cluster)
    meta = {"covariates": list(covariates), "lag": 1,
            "interaction_controls": "unit linear trends" + (" + region-year shocks" if regions else ""),
            "interpretation": "country-year interactions proxied by unit trends / region-year shocks"}
    return _pack(res, "dynamic", len(units), meta)


def event_study(p: PanelDataset, t: TreatmentSpec, outcome: str, covariates: Sequence[str] = (),
                window: tuple[int, int] | None = None, cluster: str = "twoway") -> EventStudyResult:
    """Relative-year dummies for the treated unit; relative year -1 is the reference.

    Treated years outside ``window`` are binned into the endpoint dummies.
    """
    t.validate(p, min_pre=1)
    p.require(outcome, *covariates)
    units, idx = _sample(p, t)
    rel = np.asarray(p.years) - t.treatment_year
    lo, hi = window if window is not None else (int(rel.min()), int(rel.max()))
    if lo > -1 or hi < 0:
        raise ValueError("window must cover at least one pre and one post relative year")
    lo, hi = max(lo, int(rel.min())), min(hi, int(rel.max()))
    binned = np.clip(rel, lo, hi)
    ks = [k for k in range(lo, hi + 1) if k != -1]
    y = p.matrix(outcome)[idx]
    N = len(units)
    cols, names = [], []
    for k in ks:
        c = np.zeros((N, p.n_years))
        c[0, binned == k] = 1.0
        cols.append(c)
        names.append(f"rel[{k}]")
    cols += [p.matrix(c)[idx] for c in covariates]
    names += list(covariates)
    Xd = np.stack([demean_two_way(c).ravel() for c in cols], axis=1)
    yd = demean_two_way(y).ravel()
    res = _ols(Xd, yd, N, p.n_years, cluster, names)
    coefs = {k: (float(res.coef[i]), float(res.se[i])) for i, k in enumerate(ks)}
    coefs[-1] = (0.0, 0.0)
    return EventStudyResult(dict(sorted(coefs.items())), -1, res.nobs,
                            {"cov_type": res.cov_type, "window": (lo, hi)})
