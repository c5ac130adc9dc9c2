"""Classic synthetic control: predictor weights, donor weights, gaps, leave-one-out."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import (
    DegenerateProjection,
    EmptyDonorPool,
    InsufficientPrePeriod,
    InsufficientVariation,
    MissingDonorSeries,
)
from .panel import DesignMatrices, PanelDataset, TreatmentSpec, design_matrices
from .solvers import SimplexQpProblem, SolverOptions, solve_simplex_qp


@dataclass(frozen=True)
class PredictorWeights:
    entries: Mapping[str, float]
    method: str = "projection"
    validation_loss: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        v = np.array(list(self.entries.values()), dtype=float)
        if v.size and (np.any(v < 0) or not np.all(np.isfinite(v)) or abs(v.sum() - 1) > 1e-9):
            raise ValueError("predictor weights must be finite, nonnegative and sum to 1")

    def vector(self, names: Sequence[str]) -> np.ndarray:
        return np.array([self.entries[n] for n in names], dtype=float)


@dataclass(frozen=True)
class WeightVector:
    entries: Mapping[str, float]
    intercept: float = 0.0
    mode: str = "convex"

    def __post_init__(self):
        v = np.array(list(self.entries.values()), dtype=float)
        if not np.all(np.isfinite(v)):
            raise ValueError("weights must be finite")
        if self.mode == "convex" and v.size and (np.any(v < -1e-12) or abs(v.sum() - 1) > 1e-6):
            raise ValueError("convex weights must be nonnegative and sum to 1")

    def vector(self, donors: Sequence[str]) -> np.ndarray:
        return np.array([self.entries.get(d, 0.0) for d in donors], dtype=float)

    def nonzero(self, tol: float = 1e-8) -> dict[str, float]:
        return {d: w for d, w in self.entries.items() if abs(w) > tol}


@dataclass(frozen=True, eq=False)
class GapSeries:
    years: tuple[int, ...]
    values: np.ndarray
    treatment_year: int

    @property
    def pre(self) -> np.ndarray:
        return self.values[np.asarray(self.years) < self.treatment_year]

    @property
    def post(self) -> np.ndarray:
        return self.values[np.asarray(self.years) >= self.treatment_year]

    @property
    def att(self) -> float:
        return float(self.post.mean()) if self.post.size else float("nan")

    def as_dict(self) -> dict[int, float]:
        return dict(zip(self.years, map(float, self.values)))


@dataclass(eq=False)
class ScmFit:
    treated_unit: str
    outcome: str
    treatment_year: int
    years: tuple[int, ...]
    weights: WeightVector
    predictor_weights: PredictorWeights
    actual: np.ndarray
    counterfactual: np.ndarray
    gaps: GapSeries
    pre_rmse: float
    post_rmse: float
    non_unique: bool = False
    converged: bool = True

    @property
    def donors(self) -> tuple[str, ...]:
        return tuple(self.weights.entries)

    @property
    def att(self) -> float:
        return self.gaps.att


@dataclass(frozen=True)
class ScmOptions:
    covariates: tuple[str, ...] = ()
    validation_start: int | None = None
    v_method: str = "cv"  # "cv" | "projection" | "uniform"
    normalize_predictors: bool | None = None
    solver: SolverOptions = field(default_factory=SolverOptions)


def uniform_weights(names: Sequence[str]) -> dict[str, float]:
    return {n: 1.0 / len(names) for n in names}


def weights_from_coefficients(beta, names: Sequence[str]) -> dict[str, float]:
    """``v_k = |beta_k| / sum |beta_k|``."""
    a = np.abs(np.asarray(beta, dtype=float))
    s = a.sum()
    if s <= 0 or not np.isfinite(s):
        warnings.warn("all projection coefficients are zero; using uniform predictor weights",
                      DegenerateProjection, stacklevel=2)
        return uniform_weights(names)
    return dict(zip(names, map(float, a / s)))


def _entropy(v: np.ndarray) -> float:
    v = v[v > 0]
    return float(-(v * np.log(v)).sum())


def _default_split(pre_years: Sequence[int]) -> int:
    n = len(pre_years)
    return pre_years[max(1, n // 2)]


def projection_coefficients(dm: DesignMatrices, validation_years: Sequence[int]) -> np.ndarray:
    """Cross-unit linear projection of the validation-window mean outcome on the predictors.

    Observations are the treated unit and its donors; predictor rows are
    standardized across units and the minimum-norm least-squares solution is
    used when predictors outnumber units.
    """
    X = np.column_stack([dm.X1, dm.X0]).T  # units x K
    years = np.asarray(dm.years)
    sel = np.isin(years, validation_years)
    target = np.concatenate([[dm.Q1[sel].mean()], dm.Q0[sel].mean(axis=0)])
    mu, sd = X.mean(axis=0), X.std(axis=0)
    live = sd > 1e-12 * max(1.0, np.abs(X).max())
    Z = np.zeros_like(X)
    Z[:, live] = (X[:, live] - mu[live]) / sd[live]
    Zc = np.column_stack([np.ones(X.shape[0]), Z])
    coef = np.linalg.lstsq(Zc, target, rcond=None)[0][1:]
    coef[~live] = 0.0
    return coef


def _row_scale(dm: DesignMatrices, normalize) -> np.ndarray:
    if normalize is None:
        normalize = any(y is None for y in dm.predictor_years)
    if not normalize:
        return np.ones(len(dm.predictor_names))
    sd = np.column_stack([dm.X1, dm.X0]).std(axis=1)
    return np.where(sd > 0, 1.0 / np.where(sd > 0, sd, 1.0), 1.0)


def _solve_w(dm: DesignMatrices, v: np.ndarray, scale: np.ndarray, opts: SolverOptions):
    return solve_simplex_qp(SimplexQpProblem(dm.X1 * scale, dm.X0 * scale[:, None], v), opts)


def select_predictor_weights(dm: DesignMatrices, validation_start: int | None = None,
                             method: str = "cv", solver: SolverOptions | None = None,
                             normalize=None) -> PredictorWeights:
    """Choose diagonal predictor weights by training/validation on the pre-period.

    ``cv`` compares the projection weights against uniform weights: each
    candidate fits donor weights on predictors from the training window and is
    scored by the squared outcome error on the validation window. Ties go to
    the higher-entropy (more uniform) candidate.
    """
    names = dm.predictor_names
    if len(names) == 1:
        return PredictorWeights({names[0]: 1.0}, method="single")
    pre = [y for y in dm.years if y < dm.treatment_year]
    split = validation_start if validation_start is not None else _default_split(pre)
    train = [y for y in pre if y < split]
    valid = [y for y in pre if y >= split]
    if not train or not valid:
        raise InsufficientPrePeriod(f"validation split {split} leaves an empty window",
                                    operation="select_predictor_weights")
    if method == "uniform":
        return PredictorWeights(uniform_weights(names), method="uniform")
    v_proj = weights_from_coefficients(projection_coefficients(dm, valid), names)
    if method == "projection":
        return PredictorWeights(v_proj, method="projection")

    solver = solver or SolverOptions()
    in_train = np.array([y is None or y in train for y in dm.predictor_years])
    sub = dm.rows(in_train)
    scale = _row_scale(sub, normalize)
    years = np.asarray(dm.years)
    vsel = np.isin(years, valid)
    losses = {}
    cands = {"projection": v_proj, "uniform": uniform_weights(names)}
    for label, v in cands.items():
        vt = np.array([v[n] for n in sub.predictor_names])
        if vt.sum() <= 0:
            vt = np.ones_like(vt)
        w = _solve_w(sub, vt, scale, solver).weights
        r = dm.Q1[vsel] - dm.Q0[vsel] @ w
        losses[label] = float(r @ r)
    best = min(losses.values())
    tied = [k for k, l in losses.items() if l <= best + 1e-12 * max(1.0, best)]
    pick = max(tied, key=lambda k: _entropy(np.array(list(cands[k].values()))))
    return PredictorWeights(cands[pick], method=f"cv:{pick}", validation_loss=losses)


def _rmse(x: np.ndarray) -> float:
    return float(np.sqrt(np.mean(x ** 2))) if x.size else float("nan")


def fit_synthetic_control(p: PanelDataset, t: TreatmentSpec, outcome: str,
                          opts: ScmOptions | None = None,
                          predictor_weights: PredictorWeights | None = None) -> ScmFit:
    """Fit convex donor weights matching the treated unit's pre-period predictors."""
    opts = opts or ScmOptions()
    p.require(outcome, *opts.covariates)
    n_pre = t.treatment_year - p.years[0]
    if n_pre < 2:
        raise InsufficientPrePeriod(f"need >= 2 pre-treatment years, have {max(n_pre, 0)}",
                                    operation="fit_synthetic_control")
    t.validate(p)
    dm = design_matrices(p, t, outcome, covariates=opts.covariates)
    pre_mask = dm.pre_mask
    block = np.concatenate([dm.Q1[pre_mask], dm.Q0[pre_mask].ravel()])
    if np.ptp(block) == 0:
        raise InsufficientVariation(f"{outcome!r} is constant over the pre-period")

    if predictor_weights is None:
        predictor_weights = select_predictor_weights(dm, opts.validation_start, opts.v_method,
                                                     opts.solver, opts.normalize_predictors)
    v = predictor_weights.vector(dm.predictor_names)
    sol = _solve_w(dm, v, _row_scale(dm, opts.normalize_predictors), opts.solver)
    w = sol.weights
    weights = WeightVector(dict(zip(dm.donors, map(float, w))))
    cf = dm.Q0 @ w
    gaps = GapSeries(dm.years, dm.Q1 - cf, t.treatment_year)
    return ScmFit(
        treated_unit=t.treated_unit, outcome=outcome, treatment_year=t.treatment_year,
        years=dm.years, weights=weights, predictor_weights=predictor_weights,
        actual=dm.Q1, counterfactual=cf, gaps=gaps,
        pre_rmse=_rmse(gaps.pre), post_rmse=_rmse(gaps.post),
        non_unique=sol.non_unique, converged=sol.converged,
    )


def counterfactual_path(fit: ScmFit, p: PanelDataset, outcome: str | None = None) -> dict[int, float]:
    """``intercept + sum_j w_j Q_j(t)`` for every panel year."""
    outcome = outcome or fit.outcome
    q = p.matrix(outcome)
    missing = [d for d in fit.weights.entries if d not in p.units]
    if missing:
        raise MissingDonorSeries(f"donor series missing from panel: {missing}")
    total = np.full(p.n_years, fit.weights.intercept, dtype=float)
    for d, w in fit.weights.entries.items():
        total = total + w * q[p.unit_index(d)]
    return dict(zip(p.years, map(float, total)))


def gap_series(fit: ScmFit) -> GapSeries:
    return GapSeries(fit.years, fit.actual - fit.counterfactual, fit.treatment_year)


@dataclass(eq=False)
class LooReplication:
    excluded: str
    fit: ScmFit
    gap_correlation: float


def _corr(a: np.ndarray, b: np.ndarray) -> float:
    if np.ptp(a) == 0 or np.ptp(b) == 0:
        return float("nan")
    return float(np.corrcoef(a, b)[0, 1])


def leave_one_out(p: PanelDataset, t: TreatmentSpec, outcome: str, opts: ScmOptions | None = None,
                  max_replications: int | None = None, weight_tol: float = 1e-6,
                  baseline: ScmFit | None = None) -> list[LooReplication]:
    """Refit with each positively weighted donor excluded in turn.

    Donors are taken in order of decreasing baseline weight (top donor first,
    up to ``max_replications``); the returned list is ordered by excluded donor
    name.
    """
    if len(t.donor_pool) < 2:
        raise EmptyDonorPool("leave-one-out needs at least two donors", operation="leave_one_out")
    baseline = baseline or fit_synthetic_control(p, t, outcome, opts)
    ranked = sorted(baseline.weights.entries.items(), key=lambda kv: (-kv[1], kv[0]))
    ranked = [d for d, w in ranked if w > weight_tol]
    if max_replications is not None:
        ranked = ranked[:max_replications]
    out = []
    for d in ranked:
        pool = tuple(u for u in t.donor_pool if u != d)
        fit = fit_synthetic_control(p, t.replace(donor_pool=pool), outcome, opts)
        out.append(LooReplication(d, fit, _corr(baseline.gaps.values, fit.gaps.values)))
    return sorted(out, key=lambda r: r.excluded)


def rmse(x) -> float:
    x = np.asarray(x, dtype=float)
    return _rmse(x)


def fit_table(fit: ScmFit) -> list[dict]:
    """Year, actual, synthetic, gap rows (the figure-data layout)."""
    return [
        {"year": y, "actual": float(a), "synthetic": float(s), "gap": float(g)}
        for y, a, s, g in zip(fit.years, fit.actual, fit.counterfactual, fit.gaps.values)
    ]
