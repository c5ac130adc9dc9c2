"""Permutation inference: in-space placebos, RMSPE ratios, placebo-DiD resampling."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np
from scipy import stats

from ..did import Z975, DidEstimate, demean_two_way
from ..errors import EmptyDonorPool, EmptyPeriod, InferenceError, InsufficientPrePeriod, ScmKitError
from ..panel import PanelDataset, TreatmentSpec
from ..scm import GapSeries, ScmFit, ScmOptions, fit_synthetic_control
from ..solvers import ols_fit
from . import rng
from .ks import KsResult, ks_two_sample

RATIO_DEFINITION = "post-period RMSE / pre-period RMSE (pre: years < T0, post: years >= T0)"


def _rms(x: np.ndarray) -> float:
    return float(np.sqrt(np.mean(np.square(x))))


def rmse_ratio(g: GapSeries) -> float:
    """Post/pre RMSE ratio; ``inf`` when only the pre-period fit is perfect, 0 for 0/0."""
    pre, post = g.pre, g.post
    if pre.size == 0 or post.size == 0:
        raise EmptyPeriod("gap series needs at least one pre and one post year")
    a, b = _rms(post), _rms(pre)
    if b == 0.0:
        return math.inf if a > 0 else 0.0
    return a / b


@dataclass(eq=False)
class PlaceboEntry:
    unit: str
    gaps: GapSeries | None
    pre_rmse: float
    post_rmse: float
    rmse_ratio: float
    excluded: bool = False  # 0/0 ratio
    failure: str | None = None
    weights: dict[str, float] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.failure is None


@dataclass(eq=False)
class PlaceboDistribution:
    per_unit: dict[str, PlaceboEntry]
    treated_unit: str
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.treated_unit not in self.per_unit:
            raise InferenceError("treated unit missing from placebo distribution")

    @property
    def treated(self) -> PlaceboEntry:
        return self.per_unit[self.treated_unit]

    @property
    def placebos(self) -> list[PlaceboEntry]:
        return [e for u, e in self.per_unit.items() if u != self.treated_unit and e.ok]

    def ratios(self) -> dict[str, float]:
        return {u: e.rmse_ratio for u, e in self.per_unit.items() if e.ok}

    def rows(self) -> list[dict]:
        return [{"unit": u, "treated": u == self.treated_unit, "pre_rmse": e.pre_rmse,
                 "post_rmse": e.post_rmse, "rmse_ratio": e.rmse_ratio, "excluded": e.excluded,
                 "failure": e.failure or ""} for u, e in self.per_unit.items()]


def entry_from_gaps(unit: str, gaps: GapSeries, weights: dict | None = None) -> PlaceboEntry:
    r = rmse_ratio(gaps)
    pre, post = _rms(gaps.pre), _rms(gaps.post)
    return PlaceboEntry(unit, gaps, pre, post, r, excluded=(pre == 0.0 and post == 0.0),
                        weights=dict(weights or {}))


def entry_from_fit(unit: str, fit: ScmFit) -> PlaceboEntry:
    return entry_from_gaps(unit, fit.gaps, fit.weights.entries)


def _placebo_fit(args):
    p, spec, outcome, opts = args
    try:
        return entry_from_fit(spec.treated_unit, fit_synthetic_control(p, spec, outcome, opts))
    except ScmKitError as exc:
        nan = float("nan")
        return PlaceboEntry(spec.treated_unit, None, nan, nan, nan, failure=exc.describe())


def in_space_placebo(p: PanelDataset, t: TreatmentSpec, outcome: str, opts: ScmOptions | None = None,
                     threads: int = 1, treated_fit: ScmFit | None = None) -> PlaceboDistribution:
    """Reassign treatment to every donor in turn, moving the true treated unit into the pool.

    Units that fail to fit stay in the result with ``failure`` set and are
    left out of the p-value. Entries are ordered by unit name.
    """
    if len(t.donor_pool) < 2:
        raise EmptyDonorPool("in-space placebo needs at least two donors", operation="in_space_placebo")
    t.validate(p)
    treated_fit = treated_fit or fit_synthetic_control(p, t, outcome, opts)
    tasks = [(p, TreatmentSpec(d, t.treatment_year, tuple(u for u in t.donor_pool if u != d) + (t.treated_unit,)),
              outcome, opts) for d in t.donor_pool]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            entries = list(ex.map(_placebo_fit, tasks))
    else:
        entries = [_placebo_fit(task) for task in tasks]
    entries.append(entry_from_fit(t.treated_unit, treated_fit))
    per_unit = {e.unit: e for e in sorted(entries, key=lambda e: e.unit)}
    meta = {"ratio": RATIO_DEFINITION, "n_failed": sum(not e.ok for e in entries),
            "treatment_year": t.treatment_year, "outcome": outcome}
    return PlaceboDistribution(per_unit, t.treated_unit, meta)


def placebo_p_fraction(d: PlaceboDistribution) -> Fraction:
    """``#{j : ratio_j >= ratio_treated} / (J + 1)`` over successfully fitted units."""
    r0 = d.treated.rmse_ratio
    ratios = list(d.ratios().values())
    if not ratios or not d.treated.ok:
        raise InferenceError("placebo distribution has no usable treated entry", operation="placebo_p_value")
    return Fraction(sum(r >= r0 for r in ratios), len(ratios))


def placebo_p_value(d: PlaceboDistribution) -> float:
    return float(placebo_p_fraction(d))


def placebo_rank(d: PlaceboDistribution) -> int:
    """1 = largest ratio; ties share the best rank."""
    r0 = d.treated.rmse_ratio
    return 1 + sum(r > r0 for r in d.ratios().values())


def truncate_post(g: GapSeries, n_post: int) -> GapSeries:
    years = np.asarray(g.years)
    keep = years < g.treatment_year + n_post
    return GapSeries(tuple(years[keep].tolist()), g.values[keep], g.treatment_year)


def placebo_p_value_path(d: PlaceboDistribution, max_elapsed: int | None = None) -> list[dict]:
    """p-value recomputed on expanding post windows (1, 2, ... years since T0)."""
    n_post = d.treated.gaps.post.size
    max_elapsed = n_post if max_elapsed is None else min(max_elapsed, n_post)
    rows = []
    for h in range(1, max_elapsed + 1):
        per_unit = {u: entry_from_gaps(u, truncate_post(e.gaps, h)) if e.ok else e
                    for u, e in d.per_unit.items()}
        sub = PlaceboDistribution(per_unit, d.treated_unit)
        rows.append({"years_elapsed": h, "year": d.treated.gaps.treatment_year + h - 1,
                     "treated_ratio": sub.treated.rmse_ratio, "p_value": placebo_p_value(sub),
                     "n_units": len(sub.ratios())})
    return rows


# --- parametric placebo DiD --------------------------------------------------


@dataclass(eq=False)
class ParametricPlaceboResult:
    estimate: DidEstimate
    ks: KsResult
    coefficients: np.ndarray  # per-sample interaction coefficient, by sample index
    standard_errors: np.ndarray  # per-sample two-way clustered SE
    pool_regression: DidEstimate
    metadata: dict = field(default_factory=dict)

    def summary(self) -> dict:
        c = self.coefficients
        return {
            "coefficient": self.estimate.effect, "standard_error": self.estimate.standard_error,
            "ci_low": self.estimate.ci95[0], "ci_high": self.estimate.ci95[1],
            "p_value": self.estimate.p_value, "n_samples": int(c.size),
            "coef_sd": float(c.std(ddof=1)) if c.size > 1 else 0.0,
            "coef_q025": float(np.quantile(c, 0.025)), "coef_q975": float(np.quantile(c, 0.975)),
            "ks_statistic": self.ks.statistic, "ks_p_value": self.ks.p_value, "ks_method": self.ks.method,
            "pool_coefficient": self.pool_regression.effect,
            "pool_standard_error": self.pool_regression.standard_error,
        }


def _gap_matrix(d: PlaceboDistribution) -> tuple[np.ndarray, np.ndarray, list[str]]:
    placebos = d.placebos
    if not placebos:
        raise InferenceError("no usable placebo gap series", operation="parametric_placebo_did")
    G = np.stack([e.gaps.values for e in placebos])
    return d.treated.gaps.values.astype(float), G, [e.unit for e in placebos]


def stacked_design(treated_gaps: np.ndarray, placebo_gaps: np.ndarray, idx: Sequence[int],
                   post: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Outcome and treated-by-post arrays, shape ``(1 + len(idx), T)``; row 0 is treated."""
    Y = np.vstack([treated_gaps[None, :], placebo_gaps[np.asarray(idx)]])
    D = np.zeros_like(Y)
    D[0, post] = 1.0
    return Y, D


def sample_regression(treated_gaps, placebo_gaps, idx, post) -> tuple[float, float]:
    """One sample through the general OLS path (the oracle for the batched kernel)."""
    Y, D = stacked_design(treated_gaps, placebo_gaps, idx, post)
    N, T = Y.shape
    res = ols_fit(demean_two_way(D).reshape(-1, 1), demean_two_way(Y).ravel(),
                  clusters=(np.repeat(np.arange(N), T), np.tile(np.arange(T), N)))
    return float(res.coef[0]), float(res.se[0])


def _batch_regressions(gT: np.ndarray, G: np.ndarray, idx: np.ndarray, post: np.ndarray):
    """Two-way FE coefficient and two-way clustered SE for each row of ``idx``.

    Mirrors ``ols_fit`` with one demeaned regressor: CR1 factors per dimension
    and the variance floored at zero.
    """
    S, J = idx.shape
    T = gT.size
    N = J + 1
    n = N * T
    D = np.zeros((N, T))
    D[0, post] = 1.0
    x = demean_two_way(D)
    sxx = float((x * x).sum())
    Y = np.empty((S, N, T))
    Y[:, 0, :] = gT
    Y[:, 1:, :] = G[idx]
    Yd = Y - Y.mean(axis=2, keepdims=True) - Y.mean(axis=1, keepdims=True) + Y.mean(axis=(1, 2), keepdims=True)
    beta = np.einsum("snt,nt->s", Yd, x) / sxx
    score = (Yd - beta[:, None, None] * x[None]) * x[None]
    fa, fb, fab = N / (N - 1), T / (T - 1), n / (n - 1)
    va = fa * (score.sum(axis=2) ** 2).sum(axis=1)
    vb = fb * (score.sum(axis=1) ** 2).sum(axis=1)
    vab = fab * (score ** 2).sum(axis=(1, 2))
    se = np.sqrt(np.clip(va + vb - vab, 0.0, None)) / sxx
    return beta, se


def parametric_placebo_did(p: PanelDataset, t: TreatmentSpec, outcome: str, n_samples: int = 1000,
                           seed: int = 0, opts: ScmOptions | None = None, threads: int = 1,
                           distribution: PlaceboDistribution | None = None,
                           chunk_size: int = 2048) -> ParametricPlaceboResult:
    """Treated gap series stacked against resampled placebo gaps, TWFE per sample.

    Sample ``s`` draws ``J`` placebo series with replacement from stream ``s``
    of the counter-based generator. Each sample's treated-by-post coefficient
    and two-way clustered SE are computed; the reported estimate is their mean.
    The KS test compares post-period treated gaps with pooled placebo gaps.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    seed = rng.check_seed(seed)
    d = distribution or in_space_placebo(p, t, outcome, opts, threads=threads)
    gT, G, names = _gap_matrix(d)
    T = gT.size
    years = np.asarray(d.treated.gaps.years)
    post = years >= d.treated.gaps.treatment_year
    J = G.shape[0]

    starts = list(range(0, n_samples, chunk_size))

    def run(start):
        streams = np.arange(start, min(start + chunk_size, n_samples), dtype=np.uint64)
        idx = rng.integers(seed, streams, J, J)
        return _batch_regressions(gT, G, idx, post)

    if threads > 1 and len(starts) > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            parts = list(ex.map(run, starts))
    else:
        parts = [run(s) for s in starts]
    coefs = np.concatenate([b for b, _ in parts])
    ses = np.concatenate([s for _, s in parts])
    b = float(np.mean(coefs))
    se = float(np.mean(ses))
    pv = float(2 * stats.norm.sf(abs(b / se))) if se > 0 else (0.0 if b != 0 else 1.0)
    est = DidEstimate(b, se, (b - Z975 * se, b + Z975 * se), (J + 1) * T, float("nan"), "placebo_did",
                      pv, J + 1, {"n_samples": n_samples, "seed": seed, "aggregation": "mean over samples"})

    pool_b, pool_se = sample_regression(gT, G, np.arange(J), post)
    pool_p = float(2 * stats.norm.sf(abs(pool_b / pool_se))) if pool_se > 0 else (0.0 if pool_b != 0 else 1.0)
    pool = DidEstimate(pool_b, pool_se, (pool_b - Z975 * pool_se, pool_b + Z975 * pool_se), (J + 1) * T,
                       float("nan"), "placebo_did_pool", pool_p, J + 1, {"donors": names})
    ks = ks_two_sample(gT[post], G[:, post].ravel())
    meta = {"seed": seed, "n_samples": n_samples, "rng": "splitmix64(seed, sample index)",
            "placebo_units": names, "ks_samples": "treated post gaps vs pooled placebo post gaps"}
    return ParametricPlaceboResult(est, ks, coefs, ses, pool, meta)


# --- in-time placebo ---------------------------------------------------------


def in_time_placebo(p: PanelDataset, t: TreatmentSpec, outcome: str, placebo_year: int,
                    opts: ScmOptions | None = None) -> ScmFit:
    """Refit on years before the true T0 with treatment backdated to ``placebo_year``."""
    placebo_year = int(placebo_year)
    if placebo_year >= t.treatment_year:
        raise InsufficientPrePeriod(f"placebo year {placebo_year} must precede {t.treatment_year}",
                                    operation="in_time_placebo")
    if placebo_year - p.years[0] < 2:
        raise InsufficientPrePeriod(f"placebo year {placebo_year} leaves fewer than 2 earlier years",
                                    operation="in_time_placebo")
    sub = p.subset(years=(p.years[0], t.treatment_year - 1))
    return fit_synthetic_control(sub, t.replace(treatment_year=placebo_year), outcome, opts)
