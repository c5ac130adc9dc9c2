"""Numerical kernels: simplex QP, LASSO coordinate descent, soft-impute, OLS.

Two-way cluster covariance follows Cameron, Gelbach and Miller: the variance is
``V_a + V_b - V_ab`` where ``V_ab`` clusters on the intersection of the two
labelings. Every component uses the CR1 factor ``G/(G-1) * (N-1)/(N-K)`` with
its own cluster count ``G``; with ``G = N`` this collapses to the HC1 factor
``N/(N-K)``. ``K`` counts the explicit columns of ``X`` only, so fixed effects
absorbed by demeaning do not enter it.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .errors import (
    DimensionMismatch,
    EmptyRowOrColumn,
    NonConvergence,
    NonConvergenceWarning,
    NonFiniteInput,
    NonPsdCovarianceWarning,
    RankDeficient,
    SingletonClusterWarning,
)


@dataclass(frozen=True)
class SolverOptions:
    violation_tolerance: float = 0.05
    max_iterations: int = 1000
    variable_clip_bound: float = 10.0
    convergence_epsilon: float = 1e-8

    def __post_init__(self):
        if not 0 < self.violation_tolerance < 1:
            raise ValueError("violation_tolerance must lie in (0, 1)")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")


# --- simplex-constrained quadratic programming -----------------------------


@dataclass(frozen=True, eq=False)
class SimplexQpProblem:
    """``min_w (X1 - X0 w)' diag(V) (X1 - X0 w)`` over the unit simplex.

    ``V`` is rescaled to unit trace on construction.
    """

    X1: np.ndarray
    X0: np.ndarray
    V: np.ndarray | None = None

    def __post_init__(self):
        X1 = np.asarray(self.X1, dtype=float).reshape(-1)
        X0 = np.asarray(self.X0, dtype=float)
        if X0.ndim == 1:
            X0 = X0.reshape(-1, 1)
        if X0.shape[0] != X1.shape[0]:
            raise DimensionMismatch(f"X1 has {X1.shape[0]} rows, X0 has {X0.shape[0]}",
                                    operation="solve_simplex_qp")
        if X0.shape[1] < 1:
            raise DimensionMismatch("no donors", operation="solve_simplex_qp")
        V = np.ones(X1.shape[0]) if self.V is None else np.asarray(self.V, dtype=float).reshape(-1)
        if V.shape[0] != X1.shape[0]:
            raise DimensionMismatch(f"V has {V.shape[0]} entries for {X1.shape[0]} predictors",
                                    operation="solve_simplex_qp")
        if not (np.all(np.isfinite(V)) and np.all(np.isfinite(X0)) and np.all(np.isfinite(X1))):
            raise NonFiniteInput("non-finite QP input", operation="solve_simplex_qp")
        if np.any(V < 0) or V.sum() <= 0:
            raise DimensionMismatch("V must be nonnegative with positive trace", operation="solve_simplex_qp")
        object.__setattr__(self, "X1", X1)
        object.__setattr__(self, "X0", X0)
        object.__setattr__(self, "V", V / V.sum())

    def objective(self, w: np.ndarray) -> float:
        r = self.X1 - self.X0 @ w
        return float(r @ (self.V * r))


@dataclass
class QpSolution:
    weights: np.ndarray
    objective: float
    iterations: int
    converged: bool
    non_unique: bool = False


def _eq_qp_on_support(H, c, S):
    """Minimise 1/2 w'Hw + c'w on support S with sum(w) = 1 (least-squares KKT)."""
    k = len(S)
    K = np.zeros((k + 1, k + 1))
    K[:k, :k] = H[np.ix_(S, S)]
    K[:k, k] = -1.0
    K[k, :k] = 1.0
    rhs = np.concatenate([-c[S], [1.0]])
    sol = np.linalg.lstsq(K, rhs, rcond=None)[0]
    return sol[:k], sol[k]


def solve_simplex_qp(prob: SimplexQpProblem, opts: SolverOptions | None = None) -> QpSolution:
    """Primal-dual interior point (Mehrotra predictor-corrector) plus an
    active-set polish on the identified support.

    The clip bound caps the Newton step length in the primal variables; on the
    simplex every weight is already bounded by 1, so it never binds there.
    """
    opts = opts or SolverOptions()
    J = prob.X0.shape[1]
    if J == 1:
        w = np.ones(1)
        return QpSolution(w, prob.objective(w), 0, True)

    sv = np.sqrt(prob.V)
    A = prob.X0 * sv[:, None]
    b = prob.X1 * sv
    H = 2.0 * A.T @ A
    c = -2.0 * A.T @ b
    scale = max(np.abs(H).max(), np.abs(c).max(), 1e-300)
    Hs, cs = H / scale, c / scale

    w = np.full(J, 1.0 / J)
    z = np.ones(J)
    y = 0.0
    ones = np.ones(J)
    eps = min(opts.convergence_epsilon, 1e-10)
    # after meeting eps, keep refining briefly so inactive weights fall far below any reporting threshold
    eps_refine, extra = 1e-15, 25
    converged = False
    it = 0
    best = (np.inf, w.copy())
    for it in range(1, opts.max_iterations + 1):
        rd = Hs @ w + cs - y * ones - z
        rp = w.sum() - 1.0
        mu = w @ z / J
        res = max(np.abs(rd).max(), abs(rp), mu)
        if res < eps and not converged:
            converged = True
            refine_until = it + extra
        if converged and (res < eps_refine or it >= refine_until):
            break
        K = np.zeros((J + 1, J + 1))
        K[:J, :J] = Hs + np.diag(z / w)
        K[:J, J] = -1.0
        K[J, :J] = 1.0
        try:
            lu = sla.lu_factor(K, check_finite=False)
        except (ValueError, sla.LinAlgError):
            break

        def newton(rc):
            rhs = np.concatenate([-rd - rc / w, [-rp]])
            sol = sla.lu_solve(lu, rhs, check_finite=False)
            dw, dy = sol[:J], sol[J]
            dz = (-rc - z * dw) / w
            return dw, dy, dz

        def max_step(v, dv):
            neg = dv < 0
            return min(1.0, float(np.min(-v[neg] / dv[neg]))) if neg.any() else 1.0

        dw, dy, dz = newton(w * z)
        a_aff = min(max_step(w, dw), max_step(z, dz))
        mu_aff = (w + a_aff * dw) @ (z + a_aff * dz) / J
        sigma = (mu_aff / mu) ** 3 if mu > 0 else 0.0
        dw, dy, dz = newton(w * z + dw * dz - sigma * mu)
        a = 0.99 * min(max_step(w, dw), max_step(z, dz))
        step_cap = opts.variable_clip_bound / max(np.abs(dw).max(), 1e-300)
        a = min(a, step_cap)
        w_new, z_new, y_new = w + a * dw, z + a * dz, y + a * dy
        if not (np.all(np.isfinite(w_new)) and np.all(np.isfinite(z_new)) and np.isfinite(y_new)):
            break
        w, z, y = w_new, z_new, y_new
        w = np.maximum(w, 1e-300)
        z = np.maximum(z, 1e-300)
        f = prob.objective(w / w.sum())
        if f < best[0]:
            best = (f, w.copy())

    if not converged:
        w = best[1]
    w = np.clip(w, 0.0, None)
    w = w / w.sum()
    f_ipm = prob.objective(w)

    # polish: exact solve on the support, accepted when KKT holds
    tol_support = 1e-7
    S = np.flatnonzero(w > tol_support)
    wp, yp = _eq_qp_on_support(H, c, S)
    if np.all(wp >= -1e-12):
        cand = np.zeros(J)
        cand[S] = np.clip(wp, 0.0, None)
        cand /= cand.sum()
        grad = H @ cand + c
        off = np.setdiff1d(np.arange(J), S)
        slack = grad[off] - yp
        kkt = off.size == 0 or slack.min() >= -1e-8 * max(1.0, np.abs(grad).max())
        f_pol = prob.objective(cand)
        if kkt and f_pol <= f_ipm + 1e-12 * max(1.0, abs(f_ipm)):
            w, f_ipm = cand, f_pol

    S = np.flatnonzero(w > 1e-10)
    M = np.vstack([A[:, S], np.ones((1, S.size))])
    non_unique = np.linalg.matrix_rank(M) < S.size

    if abs(w.sum() - 1.0) > opts.violation_tolerance:
        raise NonConvergence("simplex constraint violated beyond tolerance", operation="solve_simplex_qp")
    if not converged:
        warnings.warn(f"interior point did not converge in {opts.max_iterations} iterations; "
                      "returning best iterate", NonConvergenceWarning, stacklevel=2)
    return QpSolution(w, f_ipm, it, converged, bool(non_unique))


def simplex_least_squares(target: np.ndarray, basis: np.ndarray, ridge: float = 0.0,
                          intercept: bool = False, opts: SolverOptions | None = None) -> tuple[np.ndarray, float]:
    """``min ||target - a - basis w||^2 + ridge ||w||^2`` with w on the simplex.

    Reduces to ``solve_simplex_qp`` by demeaning (for the free intercept) and
    stacking ``sqrt(ridge) I`` under the basis. Returns ``(w, a)``.
    """
    target = np.asarray(target, dtype=float)
    basis = np.asarray(basis, dtype=float)
    n, J = basis.shape
    if intercept:
        tm, bm = target.mean(), basis.mean(axis=0)
        t_c, b_c = target - tm, basis - bm
    else:
        t_c, b_c = target, basis
    if ridge > 0:
        b_c = np.vstack([b_c, np.sqrt(ridge) * np.eye(J)])
        t_c = np.concatenate([t_c, np.zeros(J)])
    sol = solve_simplex_qp(SimplexQpProblem(t_c, b_c), opts)
    w = sol.weights
    a = float(tm - bm @ w) if intercept else 0.0
    return w, a


# --- LASSO -----------------------------------------------------------------


@dataclass
class LassoResult:
    coef: np.ndarray
    intercept: float
    lam: float
    n_sweeps: int
    converged: bool
    objective_path: list[float] = field(default_factory=list)
    coef_std: np.ndarray | None = None  # standardized scale, usable as a warm start


def _lasso_objective(yc, Xs, b, lam):
    r = yc - Xs @ b
    return 0.5 * (r @ r) / len(yc) + lam * np.abs(b).sum()


def lasso_fit(X, y, lam: float, standardize: bool = True, tol: float = 1e-9,
              max_sweeps: int = 200_000, warm_start: np.ndarray | None = None,
              record_objective: bool = False) -> LassoResult:
    """``(1/2n)||y - a - Xb||^2 + lam ||b||_1`` by cyclic coordinate descent.

    With ``standardize`` the penalty applies to coefficients of unit-variance
    columns (the glmnet convention); returned coefficients are on the original
    scale. Constant columns get a zero coefficient. ``warm_start`` is on the
    standardized scale.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).reshape(-1)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    n, p = X.shape
    if n != y.shape[0] or n < 1:
        raise DimensionMismatch(f"X has {n} rows, y has {y.shape[0]}", operation="lasso_fit")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y)) and np.isfinite(lam)):
        raise NonFiniteInput("non-finite LASSO input", operation="lasso_fit")
    if lam < 0:
        raise ValueError("lambda must be >= 0")
    xm, ym = X.mean(axis=0), y.mean()
    Xc, yc = X - xm, y - ym
    sd = np.sqrt((Xc ** 2).mean(axis=0))
    active_cols = sd > 1e-14 * max(1.0, np.abs(X).max())
    scale = np.where(active_cols & standardize, sd, 1.0)
    Xs = Xc / scale
    G = Xs.T @ Xs / n
    xty = Xs.T @ yc / n
    diag = np.diag(G).copy()
    b = np.zeros(p) if warm_start is None else np.array(warm_start, dtype=float)
    b[~active_cols] = 0.0
    Gb = G @ b
    path = [_lasso_objective(yc, Xs, b, lam)] if record_objective else []
    converged = False
    idx = np.flatnonzero(active_cols)

    def sweep_over(cols):
        nonlocal Gb
        max_delta = 0.0
        for j in cols:
            old = b[j]
            rho = xty[j] - Gb[j] + diag[j] * old
            new = np.sign(rho) * max(abs(rho) - lam, 0.0) / diag[j]
            if new != old:
                d = new - old
                Gb += G[:, j] * d
                b[j] = new
                if abs(d) > max_delta:
                    max_delta = abs(d)
        return max_delta

    sweep = 0
    for sweep in range(1, max_sweeps + 1):
        delta = sweep_over(idx)
        if record_objective:
            path.append(_lasso_objective(yc, Xs, b, lam))
        if delta < tol:
            converged = True
            break
    coef = b / scale
    intercept = float(ym - xm @ coef)
    if not converged:
        warnings.warn("coordinate descent hit max_sweeps", NonConvergenceWarning, stacklevel=2)
    return LassoResult(coef, intercept, float(lam), sweep, converged, path, b.copy())


def lasso_lambda_max(X, y, standardize: bool = True) -> float:
    """Smallest penalty at which every slope is zero."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    Xc = X - X.mean(axis=0)
    yc = np.asarray(y, dtype=float) - np.mean(y)
    if standardize:
        sd = np.sqrt((Xc ** 2).mean(axis=0))
        Xc = Xc / np.where(sd > 0, sd, 1.0)
    return float(np.abs(Xc.T @ yc).max() / len(yc))


# --- soft-impute -----------------------------------------------------------


@dataclass
class SoftImputeResult:
    completed: np.ndarray
    low_rank: np.ndarray
    fitted: np.ndarray
    rank: int
    iterations: int
    converged: bool
    objective_path: list[float] = field(default_factory=list)


def _two_way_part(Z):
    r = Z.mean(axis=1, keepdims=True)
    c = Z.mean(axis=0, keepdims=True)
    return r + c - Z.mean()


def _svt(R, lam):
    U, s, Vt = np.linalg.svd(R, full_matrices=False)
    s = np.maximum(s - lam, 0.0)
    k = int(np.count_nonzero(s))
    return (U[:, :k] * s[:k]) @ Vt[:k], s[:k].sum(), k


def soft_impute(M, mask, lam: float, opts: SolverOptions | None = None, two_way: bool = False,
                record_objective: bool = False, warm_start: np.ndarray | None = None,
                warn: bool = True, accelerate: bool = False) -> SoftImputeResult:
    """Nuclear-norm matrix completion by iterative singular-value thresholding.

    ``mask`` is True on observed entries. Minimises
    ``1/2 ||P_obs(M - L - E)||_F^2 + lam ||L||_*`` where ``E`` is zero, or the
    unpenalised additive row + column effect when ``two_way``. ``completed``
    keeps observed entries verbatim and fills the rest from the fit.

    The plain iteration decreases the objective monotonically. ``accelerate``
    adds Nesterov momentum to the fill, restarted whenever a step grows.
    """
    opts = opts or SolverOptions()
    M = np.asarray(M, dtype=float)
    mask = np.asarray(mask, dtype=bool)
    if M.shape != mask.shape:
        raise DimensionMismatch("mask shape differs from matrix", operation="soft_impute")
    if not np.all(np.isfinite(M[mask])):
        raise NonFiniteInput("non-finite observed entries", operation="soft_impute")
    if not (mask.any(axis=1).all() and mask.any(axis=0).all()):
        raise EmptyRowOrColumn("every row and column needs an observed entry")
    Mo = np.where(mask, M, 0.0)
    fit = np.zeros_like(Mo) if warm_start is None else np.array(warm_start, dtype=float)
    L = np.zeros_like(Mo)
    path = []
    converged = False
    rank = 0
    it = 0
    prev, t_k, last_step = fit, 1.0, np.inf
    for it in range(1, opts.max_iterations + 1):
        if accelerate:
            t_next = (1 + np.sqrt(1 + 4 * t_k * t_k)) / 2
            point = fit + ((t_k - 1) / t_next) * (fit - prev)
        else:
            point = fit
        Z = np.where(mask, Mo, point)
        E = _two_way_part(Z) if two_way else 0.0
        L, nuc, rank = _svt(Z - E, lam)
        new = L + E
        if record_objective:
            r = np.where(mask, Mo - new, 0.0)
            path.append(0.5 * float((r * r).sum()) + lam * nuc)
        delta = np.linalg.norm(new - fit)
        denom = max(np.linalg.norm(fit), 1e-12)
        if accelerate:
            t_k = 1.0 if delta > last_step else t_next
            last_step = delta
        prev, fit = fit, new
        if delta / denom < opts.convergence_epsilon or delta == 0.0:
            converged = True
            break
    if not converged and warn:
        warnings.warn("soft_impute hit max_iterations", NonConvergenceWarning, stacklevel=2)
    completed = np.where(mask, M, fit)
    return SoftImputeResult(completed, L, fit, rank, it, converged, path)


def soft_impute_path(M, mask, lam: float, opts: SolverOptions | None = None, two_way: bool = False,
                     per_decade: int = 4, floor: float = 1e-12) -> SoftImputeResult:
    """``soft_impute`` at ``lam`` reached by warm starts along a decreasing penalty path.

    A single run at a tiny penalty moves the unobserved cells by about ``lam``
    per iteration; walking down from the spectral norm keeps each stage close
    to its solution. ``lam = 0`` ends at the limit of the path (the stage at
    ``floor`` times the start), where the unpenalised iteration is stationary.
    """
    opts = opts or SolverOptions()
    Z = np.where(np.asarray(mask, dtype=bool), np.asarray(M, dtype=float), 0.0)
    if two_way:
        Z = Z - _two_way_part(Z)
    top = float(np.linalg.norm(Z, 2))
    end = max(lam, floor * top)
    if top <= end:
        stages = [end]
    else:
        n_stages = max(2, int(np.ceil(per_decade * np.log10(top / end))) + 1)
        stages = list(np.geomspace(top, end, n_stages))
    if lam == 0.0:
        stages.append(0.0)
    fit = None
    total = 0
    for lv in stages:
        # every stage runs to full tolerance: residue left at one penalty survives all smaller ones
        res = soft_impute(M, mask, lv, opts, two_way=two_way, warm_start=fit, accelerate=True)
        fit = res.fitted
        total += res.iterations
    res.iterations = total
    return res


# --- least squares ---------------------------------------------------------


@dataclass
class OlsResult:
    coef: np.ndarray
    cov: np.ndarray
    resid: np.ndarray
    nobs: int
    k: int
    rss: float
    tss: float
    cov_type: str
    adjustment: dict = field(default_factory=dict)
    names: tuple[str, ...] = ()

    @property
    def se(self) -> np.ndarray:
        return np.sqrt(np.clip(np.diag(self.cov), 0.0, None))

    @property
    def r2(self) -> float:
        return 1.0 - self.rss / self.tss if self.tss > 0 else float("nan")


def _meat(Xu: np.ndarray, labels: np.ndarray) -> tuple[np.ndarray, int]:
    _, inv = np.unique(labels, return_inverse=True)
    G = int(inv.max()) + 1
    S = np.zeros((G, Xu.shape[1]))
    np.add.at(S, inv, Xu)
    return S.T @ S, G


def _labels(c) -> np.ndarray:
    c = np.asarray(c)
    if c.dtype.kind in "OUS":
        _, c = np.unique(c.astype(str), return_inverse=True)
    return c


def ols_fit(X, y, clusters=None, names=None, rank_tol: float = 1e-10) -> OlsResult:
    """Least squares with HC1, one-way or two-way cluster-robust covariance.

    ``clusters`` is None, one label array, or a pair of label arrays.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).reshape(-1)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    n, k = X.shape
    names = tuple(names) if names is not None else tuple(f"x{i}" for i in range(k))
    if n != y.shape[0]:
        raise DimensionMismatch(f"X has {n} rows, y has {y.shape[0]}", operation="ols_fit")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise NonFiniteInput("non-finite regression input", operation="ols_fit")
    Q, R, piv = sla.qr(X, mode="economic", pivoting=True)
    d = np.abs(np.diag(R))
    rank = int(np.sum(d > rank_tol * max(d[0] if d.size else 0.0, 1e-300) * max(n, k) ** 0.5)) if d.size else 0
    if rank < k or n <= k:
        bad = [names[i] for i in piv[rank:]] if rank < k else list(names)
        raise RankDeficient(bad)
    coef = np.empty(k)
    coef[piv] = sla.solve_triangular(R, Q.T @ y)
    resid = y - X @ coef
    Rinv = sla.solve_triangular(R, np.eye(k))
    bread = np.empty((k, k))
    bread[np.ix_(piv, piv)] = Rinv @ Rinv.T
    Xu = X * resid[:, None]
    rss = float(resid @ resid)
    tss = float(((y - y.mean()) ** 2).sum())
    small = (n - 1) / (n - k)

    if clusters is None:
        fac = n / (n - k)
        cov = fac * bread @ (Xu.T @ Xu) @ bread
        return OlsResult(coef, cov, resid, n, k, rss, tss, "HC1", {"factor": fac}, names)

    if isinstance(clusters, (list, tuple)) and len(clusters) == 2 and np.ndim(clusters[0]) == 1:
        dims = [_labels(clusters[0]), _labels(clusters[1])]
    else:
        dims = [_labels(clusters)]
    for lab in dims:
        if lab.shape[0] != n:
            raise DimensionMismatch("cluster labels length differs from observations", operation="ols_fit")
        _, counts = np.unique(lab, return_counts=True)
        if (counts == 1).any() and counts.size < n:
            warnings.warn(f"{int((counts == 1).sum())} singleton cluster(s)", SingletonClusterWarning, stacklevel=2)

    def component(lab):
        meat, G = _meat(Xu, lab)
        if G < 2:
            raise DimensionMismatch("need at least two clusters", operation="ols_fit")
        fac = G / (G - 1) * small
        return fac * bread @ meat @ bread, G, fac

    if len(dims) == 1:
        cov, G, fac = component(dims[0])
        return OlsResult(coef, cov, resid, n, k, rss, tss, "cluster", {"G": G, "factor": fac}, names)

    a, b = dims
    ab = a.astype(np.int64) * (int(b.max()) + 1) + b.astype(np.int64)
    Va, Ga, fa = component(a)
    Vb, Gb, fb = component(b)
    Vab, Gab, fab = component(ab)
    cov = Va + Vb - Vab
    ev, evec = np.linalg.eigh((cov + cov.T) / 2)
    if ev.min() < 0:
        warnings.warn("two-way cluster covariance not PSD; negative eigenvalues floored at zero",
                      NonPsdCovarianceWarning, stacklevel=2)
        cov = (evec * np.clip(ev, 0.0, None)) @ evec.T
    adj = {"G": (Ga, Gb), "G_intersection": Gab, "factor": (fa, fb, fab)}
    return OlsResult(coef, cov, resid, n, k, rss, tss, "cluster2", adj, names)
