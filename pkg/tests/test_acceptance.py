"""Acceptance checks 1-11, one PASS/FAIL line each.

Runs under pytest (lines appear in the -v log) or directly:
``python tests/test_acceptance.py``.
"""

import itertools
import sys
import time
import warnings
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))
from conftest import make_panel, spec_for, twfe_panel  # noqa: E402

from scmkit.advanced import fit_gsynth, fit_lasso_scm, fit_matrix_completion, fit_sdid  # noqa: E402
from scmkit.advanced.montecarlo import StudyConfig, recovery_study  # noqa: E402
from scmkit.did import event_study, fit_dynamic_did, fit_twfe_did  # noqa: E402
from scmkit.inference import (differential_trend_test, in_space_placebo, ks_two_sample,  # noqa: E402
                              parametric_placebo_did, placebo_p_fraction, placebo_rank, zivot_andrews_break)
from scmkit.inference.placebo import PlaceboDistribution, entry_from_gaps  # noqa: E402
from scmkit.panel import PanelDataset, TreatmentSpec  # noqa: E402
from scmkit.scm import GapSeries, fit_synthetic_control  # noqa: E402
from scmkit.solvers import SimplexQpProblem, lasso_lambda_max, solve_simplex_qp  # noqa: E402

CHECKS = {}


def check(n, title):
    def deco(f):
        CHECKS[n] = (title, f)
        return f
    return deco


def simplex_grid(J, step):
    n = int(round(1 / step))
    for c in itertools.product(range(n + 1), repeat=J - 1):
        if sum(c) <= n:
            yield np.array([*c, n - sum(c)], dtype=float) / n


@check(1, "QP matches exhaustive simplex grid")
def c1():
    grid = np.array(list(simplex_grid(3, 0.02)))
    worst_gap, worst_simplex = -np.inf, 0.0
    for seed in range(100):
        r = np.random.default_rng(1000 + seed)
        prob = SimplexQpProblem(r.normal(size=5), r.normal(size=(5, 3)), r.uniform(0.1, 1, 5))
        sol = solve_simplex_qp(prob)
        R = prob.X1[None, :] - grid @ prob.X0.T
        best = float(((R ** 2) * prob.V).sum(axis=1).min())
        worst_gap = max(worst_gap, sol.objective - best)
        w = sol.weights
        worst_simplex = max(worst_simplex, -w.min(), abs(w.sum() - 1))
    return worst_gap <= 1e-6 and worst_simplex <= 1e-6, \
        f"max(objective - grid) = {worst_gap:.2e}, simplex violation {worst_simplex:.1e}"


@check(2, "perfect-donor and convex-combination recovery")
def c2():
    p = make_panel({"T": [1, 3, 2, 5, 6], "A": [1, 3, 2, 4, 4], "B": [0, 1, 0, 1, 0], "C": [5, 2, 7, 1, 3]})
    f1 = fit_synthetic_control(p, spec_for(p, "T", 2003), "y")
    q = make_panel({"T": [1.5, 3.0, 4.5, 9.0, 9.0], "B": [0, 0, 0, 0, 0], "C": [2, 4, 6, 8, 10]})
    f2 = fit_synthetic_control(q, spec_for(q, "T", 2003), "y")
    w = f2.weights.entries
    ok = abs(f1.weights.entries["A"] - 1) <= 1e-6 and f1.pre_rmse < 1e-8 \
        and abs(w["B"] - 0.25) <= 1e-4 and abs(w["C"] - 0.75) <= 1e-4
    return ok, f"w_A = {f1.weights.entries['A']:.9f}, pre_rmse {f1.pre_rmse:.1e}; w = ({w['B']:.6f}, {w['C']:.6f})"


@check(3, "2x2 closed form and year-shift invariance")
def c3():
    with warnings.catch_warnings():
        return _c3()


def _c3():
    worst = 0.0
    r = np.random.default_rng(3)
    for _ in range(50):
        y = r.normal(size=(2, 2)) * 10
        p = PanelDataset(("T", "C"), (2000, 2001), {"y": y})
        b = fit_twfe_did(p, TreatmentSpec("T", 2001, ("C",)), "y", cluster="none").effect
        closed = (y[0, 1] - y[0, 0]) - (y[1, 1] - y[1, 0])
        # rounding scales with the inputs, not with the (possibly cancelling) result
        worst = max(worst, abs(b - closed) / np.abs(y).max())
    exact = True
    warnings.simplefilter("ignore")  # two-way clusters on 4 units floor non-PSD variances
    for seed in range(20):
        base, t = twfe_panel(4, 16, t0_index=10, seed=seed)
        p = base.with_variable("y", np.round(base.matrix("y") * 64) / 64)
        c = r.integers(-8, 9, size=16) / 4
        moved = p.with_variable("y", p.matrix("y") + c)
        exact &= fit_twfe_did(p, t, "y").effect == fit_twfe_did(moved, t, "y").effect
        a, b = event_study(p, t, "y").coefficients, event_study(moved, t, "y").coefficients
        exact &= all(a[k][0] == b[k][0] for k in a)
        base, t = twfe_panel(4, 17, t0_index=10, seed=seed)
        p = base.with_variable("y", np.round(base.matrix("y") * 64) / 64)
        moved = p.with_variable("y", p.matrix("y") + np.append(c, 0.5))
        exact &= fit_dynamic_did(p, t, "y").effect == fit_dynamic_did(moved, t, "y").effect
    return worst < 8 * np.finfo(float).eps and exact, \
        f"max 2x2 error / max|y| = {worst:.1e}; shifted coefficients bitwise equal: {exact}"


def _dist(ratios, treated):
    per = {u: entry_from_gaps(u, GapSeries((0, 1, 2, 3), np.array([1.0, -1.0, r, -r]), 2)) for u, r in ratios.items()}
    return PlaceboDistribution(per, treated)


@check(4, "placebo p-value equals brute-force counting")
def c4():
    r = np.random.default_rng(4)
    mismatches, with_ties = 0, 0
    for _ in range(50):
        n = int(r.integers(3, 25))
        levels = r.integers(0, max(2, n // 2), size=n).astype(float)
        units = [f"u{i:02d}" for i in range(n)]
        treated = units[int(r.integers(n))]
        ratios = dict(zip(units, levels))
        r0 = ratios[treated]
        brute = Fraction(sum(1 for v in levels if v >= r0), n)
        with_ties += len(set(levels)) < n
        mismatches += placebo_p_fraction(_dist(ratios, treated)) != brute
    return mismatches == 0 and with_ties > 0, f"{mismatches} mismatches over 50 configurations ({with_ties} with ties)"


def shift_panel(J, seed=0):
    r = np.random.default_rng(seed)
    T, k0 = 30, 20
    D = r.normal(size=(J, T)) + np.linspace(0, 2, T)
    y = r.dirichlet(np.ones(J)) @ D + 0.1 * r.normal(size=T)
    y[k0:] += 10.0
    units = ("T", *(f"d{j:02d}" for j in range(J)))
    p = PanelDataset(units, tuple(range(1980, 1980 + T)), {"y": np.vstack([y, D])})
    return p, TreatmentSpec("T", 1980 + k0, units[1:])


@check(5, "treated-only shift ranks first with p = 1/(J+1)")
def c5():
    out, ok = [], True
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for J in (5, 10, 17):
            p, t = shift_panel(J)
            d = in_space_placebo(p, t, "y")
            pv = placebo_p_fraction(d)
            ok &= placebo_rank(d) == 1 and pv == Fraction(1, J + 1)
            out.append(f"J={J}: rank {placebo_rank(d)}, p = {pv} = {float(pv):.4f}")
    return ok, "; ".join(out)


@check(6, "KS exact path on disjoint 5 vs 5")
def c6():
    res = ks_two_sample(np.arange(5.0), np.arange(5.0) + 10)
    return res.statistic == 1.0 and abs(res.p_value - 2 / 252) <= 1e-12 and res.method == "exact", \
        f"D = {res.statistic}, p = {res.p_value:.15f} ({res.method})"


def _series(y, start=1960):
    return {start + i: float(v) for i, v in enumerate(y)}


@check(7, "break tests: power, size and trend-test sanity")
def c7():
    hits = 0
    for s in range(200):
        r = np.random.default_rng(s)
        y = r.normal(size=60)
        k = int(r.integers(15, 45))
        y[k:] += 5.0
        res = zivot_andrews_break(_series(y))
        hits += bool(res.significant) and abs(res.break_year - (1960 + k)) <= 1
    # no-break null of the unit-root test: AR(1) with unit coefficient
    false_pos = 0
    for s in range(200):
        r = np.random.default_rng(10_000 + s)
        false_pos += bool(zivot_andrews_break(_series(r.normal(size=60).cumsum())).significant)
    t = np.arange(40.0)
    flat = differential_trend_test(_series(0.3 * t + 1.0), break_year=1980)
    kink = np.where(t >= 20, t - 20, 0.0)
    known = differential_trend_test(_series(kink), break_year=1980)
    unknown = differential_trend_test(_series(kink))
    ok = hits / 200 >= 0.95 and false_pos / 200 <= 0.10 and flat.statistic < 0.01 \
        and known.p_value < 1e-3 and unknown.p_value < 1e-3
    return ok, (f"shift found {hits / 200:.1%}, false positives {false_pos / 200:.1%}, "
                f"identical-trend W = {flat.statistic:.1e}, slope-break p = {known.p_value:.1e} / {unknown.p_value:.1e}")


@check(8, "factor-model recovery (200 replications) and rank-2 completion")
def c8():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        study = recovery_study(StudyConfig(n_reps=200, n_boot=200)).summary()
    ok = all(abs(s["mean_att"] + 1) <= 0.1 and 0.90 <= s["coverage95"] <= 0.99 for s in study.values())
    r = np.random.default_rng(0)
    f = r.normal(size=(2, 20))
    donors = r.normal(size=(6, 2)) @ f
    y = 0.7 * donors[0] + 0.3 * donors[1]
    y[15:] += 2.0
    p = PanelDataset(tuple(f"u{i}" for i in range(7)), tuple(range(2000, 2020)), {"y": np.vstack([y, donors])})
    mc = fit_matrix_completion(p, TreatmentSpec("u0", 2015, p.units[1:]), "y", lam=1e-6, n_boot=0)
    ok &= abs(mc.att - 2.0) <= 1e-3
    parts = [f"{m}: mean {s['mean_att']:.4f}, coverage {s['coverage95']:.3f}" for m, s in study.items()]
    return ok, "; ".join(parts) + f"; completion error {abs(mc.att - 2.0):.1e}"


@check(9, "TWFE, SDID and F=0 gsynth agree on parallel trends")
def c9():
    worst = 0.0
    for seed in range(5):
        r = np.random.default_rng(seed)
        tau = float(r.normal() * 3)
        N, T, k0 = 8, 15, 10
        Y = r.normal(size=(N, 1)) + r.normal(size=(1, T)).cumsum(axis=1)
        Y[0, k0:] += tau
        p = PanelDataset(tuple(f"u{i}" for i in range(N)), tuple(range(2000, 2000 + T)), {"y": Y})
        t = TreatmentSpec("u0", 2000 + k0, p.units[1:])
        ests = [fit_twfe_did(p, t, "y").effect, fit_sdid(p, t, "y", placebo_se=False).tau,
                fit_gsynth(p, t, "y", factor_range=(0,), n_boot=0).att]
        worst = max(worst, max(abs(e - tau) for e in ests))
    return worst <= 1e-6, f"max |estimate - tau| = {worst:.1e}"


@check(10, "placebo-DiD determinism across threads and throughput")
def c10():
    r = np.random.default_rng(10)
    Y = r.normal(size=(18, 62)).cumsum(axis=1)
    Y[0, 40:] -= 2
    p = PanelDataset(tuple(f"u{i:02d}" for i in range(18)), tuple(range(1950, 2012)), {"y": Y})
    t = TreatmentSpec("u00", 1990, p.units[1:])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        d = in_space_placebo(p, t, "y")
    start = time.perf_counter()
    a = parametric_placebo_did(p, t, "y", n_samples=10_000, seed=42, distribution=d, threads=1)
    elapsed = time.perf_counter() - start
    b = parametric_placebo_did(p, t, "y", n_samples=10_000, seed=42, distribution=d, threads=4)
    same = a.coefficients.tobytes() == b.coefficients.tobytes() and a.standard_errors.tobytes() == b.standard_errors.tobytes()
    rate = 10_000 / elapsed
    return same and rate >= 10_000, f"byte-identical: {same}; {rate:,.0f} regressions/s on one thread"


@check(11, "LASSO-SCM kill threshold, least-squares limit, signed weights")
def c11():
    r = np.random.default_rng(3)
    D = r.normal(size=(4, 16)).cumsum(axis=1)
    y = 1.5 * D[0] - 0.5 * D[1] + 0.2 + 0.01 * r.normal(size=16)
    p = make_panel({"T": y, **{f"d{i}": D[i] for i in range(4)}})
    t = spec_for(p, "T", 2012)
    pre = np.asarray(p.years) < 2012
    X, yp = D[:, pre].T, y[pre]
    kill = fit_lasso_scm(p, t, "y", lambda_grid=[lasso_lambda_max(X, yp)])
    zero_kill = all(w == 0 for w in kill.weights.entries.values()) and np.allclose(kill.counterfactual, yp.mean())
    Z = np.column_stack([np.ones(pre.sum()), X])
    beta = np.linalg.solve(Z.T @ Z, Z.T @ yp)
    ls = fit_lasso_scm(p, t, "y", lambda_grid=[0.0])
    err = max(np.abs(ls.weights.vector(t.donor_pool) - beta[1:]).max(), abs(ls.weights.intercept - beta[0]))
    cv = fit_lasso_scm(p, t, "y")
    neg = min(cv.weights.entries.values())
    ok = zero_kill and err <= 1e-8 and neg < 0
    return ok, f"kill threshold intercept-only: {zero_kill}; |w - OLS| = {err:.1e}; most negative weight {neg:.3f}"


def run_check(n):
    title, f = CHECKS[n]
    start = time.perf_counter()
    try:
        ok, detail = f()
    except Exception as exc:  # a crash is a failed criterion, reported like any other
        ok, detail = False, f"{type(exc).__name__}: {exc}"
    return ok, f"criterion {n:>2} {'PASS' if ok else 'FAIL'}  {title}: {detail} [{time.perf_counter() - start:.1f}s]"


@pytest.mark.parametrize("n", sorted(CHECKS))
def test_criterion(n, capsys):
    ok, line = run_check(n)
    with capsys.disabled():
        print("\n" + line)
    assert ok, line


if __name__ == "__main__":
    results = [run_check(n) for n in sorted(CHECKS)]
    for _, line in results:
        print(line)
    sys.exit(0 if all(ok for ok, _ in results) else 1)
