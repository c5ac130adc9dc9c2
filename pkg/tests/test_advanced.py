import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_panel, spec_for
from scmkit.advanced import (FactorModelSpec, fit_gsynth, fit_lasso_scm, fit_matrix_completion, fit_sdid,
                             sdid_weights, simulate_factor_panel)
from scmkit.advanced.montecarlo import StudyConfig, recovery_study, replication
from scmkit.advanced.sdid import sdid_tau
from scmkit.did import fit_twfe_did
from scmkit.errors import DimensionMismatch, EmptyDonorPool, FactorRangeInvalid
from scmkit.panel import PanelDataset, TreatmentSpec
from scmkit.solvers import lasso_lambda_max

pytestmark = pytest.mark.filterwarnings("ignore::scmkit.ScmKitWarning")


def sim(n_units=12, n_years=30, F=2, sd=0.5, effect=-1.0, seed=0, k0=22):
    spec = FactorModelSpec.random(n_units, n_years, F, sd, effect, seed=seed)
    return simulate_factor_panel(spec, n_units, n_years, seed=seed, treatment_index=k0)


# --- simulator -----------------------------------------------------------------


def test_simulate_common_shocks_only():
    phi = np.linspace(0, 2, 10)
    spec = FactorModelSpec(phi, np.zeros((10, 0)), np.zeros((5, 0)))
    s = simulate_factor_panel(spec, 5, 10, treatment_index=7)
    assert np.array_equal(s.panel.matrix("y"), np.tile(phi, (5, 1)))
    assert s.treatment.treatment_year == 1967 and s.true_att == 0.0


def test_simulate_effect_and_covariates():
    T = 8
    z = np.arange(24, dtype=float).reshape(3, T)
    spec = FactorModelSpec(np.zeros(T), np.ones((T, 1)), np.array([[1.0], [2.0], [3.0]]),
                           treatment_effect=np.array([-1.0, -2.0]), covariates={"z": z},
                           covariate_coefficients={"z": 0.5})
    s = simulate_factor_panel(spec, 3, T, treatment_index=6)
    expected = np.array([[1.0], [2.0], [3.0]]) + 0.5 * z
    expected[0, 6:] += [-1.0, -2.0]
    assert np.allclose(s.panel.matrix("y"), expected)
    assert s.true_effect == {1966: -1.0, 1967: -2.0}
    assert s.panel.roles["z"] == "covariate"


def test_simulate_deterministic():
    a, b, c = sim(seed=3), sim(seed=3), sim(seed=4)
    assert np.array_equal(a.panel.matrix("y"), b.panel.matrix("y"))
    assert not np.array_equal(a.panel.matrix("y"), c.panel.matrix("y"))


def test_simulate_noise_moments():
    sd, N, T = 2.0, 100, 100
    spec = FactorModelSpec(np.zeros(T), np.zeros((T, 0)), np.zeros((N, 0)), noise_sd=sd)
    e = simulate_factor_panel(spec, N, T, seed=1).panel.matrix("y").ravel()
    n = e.size
    assert abs(e.mean()) < 3 * sd / np.sqrt(n)
    assert abs(e.var() - sd ** 2) < 3 * sd ** 2 * np.sqrt(2 / n)


def test_simulate_errors():
    spec = FactorModelSpec(np.zeros(5), np.zeros((5, 1)), np.zeros((3, 1)))
    with pytest.raises(DimensionMismatch):
        simulate_factor_panel(spec, 4, 5)
    with pytest.raises(DimensionMismatch):
        simulate_factor_panel(spec, 3, 5, treatment_index=5)
    with pytest.raises(ValueError):
        FactorModelSpec(np.zeros(5), np.zeros((5, 1)), np.zeros((3, 1)), noise_sd=-1)


# --- gsynth ------------------------------------------------------------------


def fe_imputation(y, Y, pre):
    """Independent two-way FE imputation: control year means plus the treated pre-period offset."""
    xi = Y.mean(axis=0)
    return xi + np.mean(y[pre] - xi[pre])


def test_gsynth_zero_factors_is_fe_imputation():
    s = sim(F=2, sd=0.5, seed=2)
    p, t = s.panel, s.treatment
    est = fit_gsynth(p, t, "y", factor_range=(0,), n_boot=0)
    M = p.matrix("y")
    pre = np.asarray(p.years) < t.treatment_year
    cf = fe_imputation(M[0], M[1:], pre)
    assert np.allclose(est.counterfactual, cf, atol=1e-10)
    assert est.att == pytest.approx(np.mean((M[0] - cf)[~pre]), abs=1e-10)
    assert est.method == "fixed_effects"


def test_gsynth_zero_factors_matches_twfe_noiseless():
    s = sim(F=0, sd=0.0, effect=-1.5, seed=1)
    est = fit_gsynth(s.panel, s.treatment, "y", factor_range=(0,), n_boot=0)
    did = fit_twfe_did(s.panel, s.treatment, "y")
    assert est.att == pytest.approx(did.effect, abs=1e-6)
    assert est.att == pytest.approx(-1.5, abs=1e-9)


def test_gsynth_recovers_factor_effect():
    s = sim(n_units=20, n_years=40, F=2, sd=0.0, effect=-1.0, seed=5, k0=30)
    est = fit_gsynth(s.panel, s.treatment, "y", factor_range=(0, 1, 2, 3), n_boot=0)
    assert est.nuisance["n_factors"] == 2 and est.method == "ife"
    assert est.att == pytest.approx(-1.0, abs=1e-6)


def test_gsynth_factor_range_checked():
    s = sim()
    with pytest.raises(FactorRangeInvalid):
        fit_gsynth(s.panel, s.treatment, "y", factor_range=(0, 11), n_boot=0)
    with pytest.raises(FactorRangeInvalid):
        fit_gsynth(s.panel, s.treatment, "y", factor_range=(-1,), n_boot=0)


def test_gsynth_bootstrap_deterministic_across_threads():
    s = sim(seed=6)
    a = fit_gsynth(s.panel, s.treatment, "y", (0, 1, 2), n_boot=30, seed=9)
    b = fit_gsynth(s.panel, s.treatment, "y", (0, 1, 2), n_boot=30, seed=9, threads=3)
    assert (a.att, a.standard_error, a.p_value) == (b.att, b.standard_error, b.p_value)
    assert a.ci95[0] <= a.att <= a.ci95[1] and 0 <= a.p_value <= 1


# --- matrix completion ------------------------------------------------------------


def rank2_panel(effect=2.0):
    r = np.random.default_rng(0)
    T = 20
    f = r.normal(size=(2, T))
    donors = r.normal(size=(6, 2)) @ f
    y = 0.7 * donors[0] + 0.3 * donors[1]
    truth = y.copy()
    y = y.copy()
    y[15:] += effect
    p = PanelDataset(tuple(f"u{i}" for i in range(7)), tuple(range(2000, 2000 + T)),
                     {"y": np.vstack([y, donors])})
    return p, TreatmentSpec("u0", 2015, p.units[1:]), truth


def test_mc_rank2_recovers_effect():
    p, t, _ = rank2_panel(2.0)
    est = fit_matrix_completion(p, t, "y", lam=1e-6, n_boot=0)
    assert est.att == pytest.approx(2.0, abs=1e-3)


def test_mc_lambda_zero_reproduces_untreated_path():
    p, t, truth = rank2_panel(2.0)
    est = fit_matrix_completion(p, t, "y", lam=0.0, n_boot=0)
    assert np.allclose(est.counterfactual[15:], truth[15:], atol=1e-4)


def test_mc_zero_effect_within_three_se():
    s = sim(n_units=15, n_years=30, F=1, sd=0.5, effect=0.0, seed=8)
    est = fit_matrix_completion(s.panel, s.treatment, "y", lam=0.05, n_boot=60, seed=1)
    assert np.isfinite(est.standard_error) and est.standard_error > 0
    assert abs(est.att) < 3 * est.standard_error
    assert est.nuisance["variant"] == "high"
    with pytest.raises(ValueError):
        fit_matrix_completion(s.panel, s.treatment, "y", lam=-1.0)


# --- LASSO-SCM ---------------------------------------------------------------------


def lasso_panel():
    r = np.random.default_rng(3)
    D = r.normal(size=(4, 16)).cumsum(axis=1)
    y = 1.5 * D[0] - 0.5 * D[1] + 0.2 + 0.01 * r.normal(size=16)
    p = make_panel({"T": y, **{f"d{i}": D[i] for i in range(4)}})
    return p, spec_for(p, "T", 2012)


def test_lasso_scm_kill_threshold():
    p, t = lasso_panel()
    M = p.matrix("y")
    pre = np.asarray(p.years) < 2012
    X, y = M[1:, pre].T, M[0, pre]
    fit = fit_lasso_scm(p, t, "y", lambda_grid=[lasso_lambda_max(X, y) * 1.01])
    assert all(w == 0 for w in fit.weights.entries.values())
    assert np.allclose(fit.counterfactual, y.mean())


def test_lasso_scm_zero_penalty_is_least_squares():
    p, t = lasso_panel()
    M = p.matrix("y")
    pre = np.asarray(p.years) < 2012
    X = np.column_stack([np.ones(pre.sum()), M[1:, pre].T])
    beta = np.linalg.solve(X.T @ X, X.T @ M[0, pre])
    fit = fit_lasso_scm(p, t, "y", lambda_grid=[0.0])
    assert np.allclose(fit.weights.vector(t.donor_pool), beta[1:], atol=1e-6)
    assert fit.weights.intercept == pytest.approx(beta[0], abs=1e-6)


def test_lasso_scm_signed_weights_by_cv():
    p, t = lasso_panel()
    fit = fit_lasso_scm(p, t, "y")
    w = fit.weights.entries
    assert w["d1"] < 0 < w["d0"] and w["d0"] > 1
    assert fit.weights.mode == "signed"
    with pytest.raises(ValueError):
        fit_lasso_scm(p, t, "y", lambda_grid=[-1.0, 0.1])


# --- SDID ---------------------------------------------------------------------------


def test_sdid_parallel_trends_exact():
    T, tau = 10, -2.5
    base = np.linspace(0, 3, T)
    series = {"T": base + 1.0, "A": base - 2.0, "B": base + 0.5, "C": base + 4.0}
    series["T"] = series["T"] + np.where(np.arange(T) >= 7, tau, 0.0)
    p = make_panel(series)
    res = fit_sdid(p, spec_for(p, "T", 2007), "y")
    assert res.tau == pytest.approx(tau, abs=1e-9)


def weighted_twfe_tau(y, Y, pre, omega, lam):
    """tau from the weighted two-way FE regression, via hand-built normal equations."""
    N, T = Y.shape[0] + 1, y.size
    M = np.vstack([y, Y])
    unit_w = np.concatenate([[1.0], omega])
    post = ~pre
    time_w = np.where(pre, 0.0, 1.0 / post.sum())
    time_w[pre] = lam
    rows, target, wts = [], [], []
    for i in range(N):
        for s in range(T):
            x = np.zeros(N + T + 1)
            x[i] = 1.0
            x[N + s] = 1.0
            x[-1] = float(i == 0 and post[s])
            rows.append(x)
            target.append(M[i, s])
            wts.append(unit_w[i] * time_w[s])
    X, z, w = np.array(rows), np.array(target), np.array(wts)
    keep = w > 0
    X, z, w = X[keep], z[keep], w[keep]
    A = X.T @ (w[:, None] * X)
    b = X.T @ (w * z)
    sol = np.linalg.lstsq(A, b, rcond=None)[0]
    return sol[-1]


def test_sdid_weighted_regression_oracle():
    r = np.random.default_rng(12)
    M = r.normal(size=(4, 6)).cumsum(axis=1)
    M[0, 4:] -= 1.0
    p = make_panel({"T": M[0], "A": M[1], "B": M[2], "C": M[3]})
    t = spec_for(p, "T", 2004)
    res = fit_sdid(p, t, "y")
    pre = np.asarray(p.years) < 2004
    omega = np.array([res.unit_weights[d] for d in t.donor_pool])
    lam = np.array([res.time_weights[yr] for yr in p.years if yr < 2004])
    assert res.tau == pytest.approx(weighted_twfe_tau(M[0], M[1:], pre, omega, lam), abs=1e-9)
    assert res.tau == pytest.approx(sdid_tau(M[1:], M[0], pre, omega, lam), abs=1e-12)


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(-50, 50), min_size=5, max_size=5))
def test_sdid_unit_shift_invariance(shifts):
    r = np.random.default_rng(0)
    M = r.normal(size=(5, 12)).cumsum(axis=1)
    M[0, 9:] += 1.0
    names = ["T", "A", "B", "C", "D"]
    p1 = make_panel(dict(zip(names, M)))
    p2 = make_panel(dict(zip(names, M + np.array(shifts)[:, None])))
    a = fit_sdid(p1, spec_for(p1, "T", 2009), "y", placebo_se=False)
    b = fit_sdid(p2, spec_for(p2, "T", 2009), "y", placebo_se=False)
    assert b.tau == pytest.approx(a.tau, abs=1e-5)


def test_sdid_weights_on_simplex_and_counts():
    s = sim(seed=4)
    res = fit_sdid(s.panel, s.treatment, "y")
    for w in (res.unit_weights, res.time_weights):
        v = np.array(list(w.values()))
        assert v.min() >= -1e-6 and abs(v.sum() - 1) < 1e-6
    assert res.nonzero_units() == sum(v > 1e-8 for v in res.unit_weights.values())
    assert res.summary()["nonzero_time_weights"] == res.nonzero_times()
    assert len(res.placebo_taus) == len(s.treatment.donor_pool)
    assert res.standard_error == pytest.approx(np.std(list(res.placebo_taus.values())))


def test_sdid_regularization_override():
    s = sim(seed=4)
    M = s.panel.matrix("y")
    pre = np.asarray(s.panel.years) < s.treatment.treatment_year
    (_, _), (_, _), zeta = sdid_weights(M[1:], M[0], pre)
    res = fit_sdid(s.panel, s.treatment, "y", regularization=0.7, placebo_se=False)
    assert res.nuisance["zeta"] == 0.7 and res.nuisance["zeta_rule"] == "override"
    assert zeta == pytest.approx((~pre).sum() ** 0.25 * res.nuisance["noise_scale"])


def test_sdid_preconditions():
    p = make_panel({"T": np.arange(6.0), "A": np.arange(6.0) + 1})
    with pytest.raises(EmptyDonorPool):
        fit_sdid(p, spec_for(p, "T", 2003), "y")


# --- pipelines -----------------------------------------------------------------------


def test_replication_seed_deterministic():
    cfg = StudyConfig(n_units=10, n_years=20, treatment_index=15, n_reps=2, n_boot=10, factor_range=(0, 1, 2))
    assert replication(cfg, 1) == replication(cfg, 1)
    assert replication(cfg, 0) != replication(cfg, 1)
    a = recovery_study(cfg)
    b = recovery_study(cfg, threads=2)
    assert all(np.array_equal(a.estimates[m], b.estimates[m]) for m in a.estimates)
    assert {r["method"] for r in a.rows()} == {"gsynth", "sdid"}
