"""Structural-break tests: Zivot-Andrews unit root with a break, Chow/sup-Wald on gap trends."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Mapping, Sequence

import numpy as np
from scipy import stats

from ..errors import SeriesTooShort
from ..scm import GapSeries
from . import rng

# Zivot & Andrews (1992, JBES 10(3)), Tables 2-4: 1%, 5%, 10% critical values.
ZA_CRITICAL_VALUES = {
    "intercept": {0.01: -5.34, 0.05: -4.80, 0.10: -4.58},
    "trend": {0.01: -4.93, 0.05: -4.42, 0.10: -4.11},
    "both": {0.01: -5.57, 0.05: -5.08, 0.10: -4.82},
}
DEFAULT_TRIM = 0.15


@dataclass(eq=False)
class BreakTestResult:
    statistic: float
    break_year: int | None
    p_value: float | None
    mode: str  # "known_break" | "unknown_break"
    model: str = ""
    critical_values: dict = field(default_factory=dict)
    significant: bool | None = None
    scan: dict[int, float] = field(default_factory=dict)  # candidate year -> statistic
    metadata: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {"statistic": self.statistic, "break_year": self.break_year, "p_value": self.p_value,
                "mode": self.mode, "model": self.model, "significant": self.significant,
                **{f"cv_{int(round(k * 100))}pct": v for k, v in self.critical_values.items()}}


def _series(s) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(s, GapSeries):
        return np.asarray(s.years), np.asarray(s.values, dtype=float)
    if isinstance(s, Mapping):
        years = np.array(sorted(s))
        return years, np.array([float(s[y]) for y in years])
    raise TypeError("expected a GapSeries or a year -> value mapping")


def trimmed_candidates(n: int, trim: float, min_side: int = 1) -> range:
    """Break indices ``b`` (first index of the new regime) kept after trimming."""
    if not 0 <= trim < 0.5:
        raise ValueError("trim must be in [0, 0.5)")
    lo = max(int(math.floor(trim * n)), min_side)
    hi = min(n - int(math.floor(trim * n)), n - min_side)
    return range(lo, hi + 1) if hi >= lo else range(0)


def _tstat(X: np.ndarray, y: np.ndarray, col: int) -> float:
    beta, *_ = np.linalg.lstsq(X, y, rcond=None)
    e = y - X @ beta
    dof = X.shape[0] - X.shape[1]
    s2 = float(e @ e) / dof
    xtx_inv = np.linalg.pinv(X.T @ X)
    return float(beta[col] / math.sqrt(s2 * xtx_inv[col, col])) if s2 > 0 else -math.inf


def za_regression(y: np.ndarray, b: int, model: str, lags: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Design for ``dy_t = mu + beta*t + theta*DU_t + gamma*DT_t + alpha*y_{t-1} + sum c_i dy_{t-i}``.

    ``DU_t = 1`` and ``DT_t = t - b + 1`` for ``t >= b``. Column 0 is ``y_{t-1}``.
    """
    n = y.size
    t = np.arange(n, dtype=float)
    dy = np.diff(y, prepend=np.nan)
    rows = np.arange(1 + lags, n)
    cols = [y[rows - 1], np.ones(rows.size), t[rows]]
    if model in ("intercept", "both"):
        cols.append((rows >= b).astype(float))
    if model in ("trend", "both"):
        cols.append(np.where(rows >= b, t[rows] - b + 1, 0.0))
    for i in range(1, lags + 1):
        cols.append(dy[rows - i])
    return np.column_stack(cols), dy[rows]


def zivot_andrews_break(s, mode: str = "intercept", trim: float = DEFAULT_TRIM, lags: int = 0,
                        level: float = 0.05) -> BreakTestResult:
    """Minimum t-statistic on ``y_{t-1}`` over trimmed break dates.

    The reported year is the first year of the post-break regime. Significance
    compares the minimum with the embedded critical values; no p-value is
    reported.
    """
    if mode not in ZA_CRITICAL_VALUES:
        raise ValueError(f"mode must be one of {sorted(ZA_CRITICAL_VALUES)}")
    years, y = _series(s)
    n = y.size
    cand = trimmed_candidates(n, trim, min_side=2 + lags)
    if n - 2 * int(math.floor(trim * n)) < 10 or len(cand) == 0:
        raise SeriesTooShort(f"{n} observations leave fewer than 10 after {trim:.0%} trimming",
                             operation="zivot_andrews_break")
    scan = {}
    for b in cand:
        X, dy = za_regression(y, b, mode, lags)
        scan[int(years[b])] = _tstat(X, dy, 0)
    year = min(scan, key=lambda k: (scan[k], k))
    stat = scan[year]
    cv = ZA_CRITICAL_VALUES[mode]
    return BreakTestResult(stat, year, None, "unknown_break", mode, dict(cv), stat < cv[level], scan,
                           {"trim": trim, "lags": lags, "level": level, "n": n})


# --- differential trends ----------------------------------------------------


def _chow_design(n: int, b: int) -> np.ndarray:
    t = np.arange(n, dtype=float)
    d = (t >= b).astype(float)
    return np.column_stack([np.ones(n), t, d, d * t])


def chow_wald(y: np.ndarray, b: int) -> float:
    """Wald statistic for equal intercept and slope before and after index ``b``.

    Homoskedastic variance with the residual variance floored at the numerical
    noise level of ``y``, so exact fits give a large finite statistic.
    """
    n = y.size
    X = _chow_design(n, b)
    xtx_inv = np.linalg.inv(X.T @ X)
    beta = xtx_inv @ (X.T @ y)
    e = y - X @ beta
    s2 = float(e @ e) / (n - 4)
    floor = (math.sqrt(np.finfo(float).eps) * max(1.0, float(np.abs(y).max()))) ** 2
    s2 = max(s2, floor)
    r = beta[2:]
    V = s2 * xtx_inv[2:, 2:]
    return float(r @ np.linalg.solve(V, r))


@lru_cache(maxsize=8)
def sup_wald_null(trim: float, n_grid: int = 200, reps: int = 4999, seed: int = 19600101) -> np.ndarray:
    """Simulated null of the sup-Wald statistic for an intercept-and-trend break.

    Uses the trend design itself on a fine grid with Gaussian errors, which
    approximates the asymptotic distribution for trending regressors.
    """
    cand = trimmed_candidates(n_grid, trim, min_side=2)
    E = rng.normals(seed, np.arange(reps, dtype=np.uint64), n_grid).T  # (n_grid, reps)
    t = np.arange(n_grid, dtype=float)
    Q0, _ = np.linalg.qr(np.column_stack([np.ones(n_grid), t]))
    base = (Q0.T @ E) ** 2
    base = base.sum(axis=0)
    total = (E ** 2).sum(axis=0)
    best = np.zeros(reps)
    for b in cand:
        Q, _ = np.linalg.qr(_chow_design(n_grid, b))
        fit = ((Q.T @ E) ** 2).sum(axis=0)
        s2 = (total - fit) / (n_grid - 4)
        best = np.maximum(best, (fit - base) / s2)
    best.sort()
    return best


def differential_trend_test(gaps, break_year: int | None = None, trim: float = DEFAULT_TRIM) -> BreakTestResult:
    """Chow test on the gap trend; sup-Wald over trimmed years when ``break_year`` is None.

    Known break: p from chi-squared(2). Unknown break: p from the simulated
    sup-Wald null (``sup_wald_null``).
    """
    years, y = _series(gaps)
    n = y.size
    if break_year is not None:
        hits = np.flatnonzero(years == int(break_year))
        if hits.size == 0:
            raise SeriesTooShort(f"break year {break_year} outside the series", operation="differential_trend_test")
        b = int(hits[0])
        if b < 2 or n - b < 2:
            raise SeriesTooShort("need at least two points on each side of the break",
                                 operation="differential_trend_test")
        w = chow_wald(y, b)
        return BreakTestResult(w, int(break_year), float(stats.chi2.sf(w, 2)), "known_break", "chow",
                               {0.01: float(stats.chi2.isf(0.01, 2)), 0.05: float(stats.chi2.isf(0.05, 2))},
                               None, {int(break_year): w}, {"df": 2, "n": n})
    cand = trimmed_candidates(n, trim, min_side=2)
    if len(cand) == 0 or n < 6:
        raise SeriesTooShort(f"{n} observations leave no break candidates", operation="differential_trend_test")
    scan = {int(years[b]): chow_wald(y, b) for b in cand}
    year = max(scan, key=lambda k: (scan[k], -k))
    w = scan[year]
    null = sup_wald_null(float(trim))
    p = (int(null.size - np.searchsorted(null, w, side="left")) + 1) / (null.size + 1)
    cvs = {0.01: float(np.quantile(null, 0.99)), 0.05: float(np.quantile(null, 0.95))}
    return BreakTestResult(w, year, float(p), "unknown_break", "sup_wald", cvs, None, scan,
                           {"trim": trim, "n": n, "null_reps": int(null.size)})


def gap_from_pairs(years: Sequence[int], values: Sequence[float], treatment_year: int) -> GapSeries:
    return GapSeries(tuple(int(y) for y in years), np.asarray(values, dtype=float), int(treatment_year))
