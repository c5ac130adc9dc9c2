"""Batch command line: one subcommand per estimator, results written as CSV + JSON sidecars.

Every flag has an environment override with the ``SCMKIT_`` prefix
(``SCMKIT_CONFIG``, ``SCMKIT_SEED``, ``SCMKIT_THREADS``, ``SCMKIT_OUT``,
``SCMKIT_OUTCOME``; the last is whitespace separated). Exit status is 0 on
success, 1 when the configuration or panel fails validation and 2 when an
estimator fails.
"""

from __future__ import annotations

import dataclasses
import datetime as _dt
import hashlib
import json
import platform
import re
import sys
import warnings
from importlib import metadata
from pathlib import Path
from typing import Callable

import click
import numpy as np

from . import __version__
from .advanced import fit_gsynth, fit_lasso_scm, fit_matrix_completion, fit_sdid, simulate_factor_panel
from .advanced.montecarlo import StudyConfig, recovery_study
from .advanced.simulate import FactorModelSpec
from .config import BATTERY, RunConfig, load_config
from .did import event_study, fit_dynamic_did, fit_twfe_did
from .errors import ConfigError, PanelError, ScmKitError, SeriesTooShort
from .inference import (differential_trend_test, in_space_placebo, in_time_placebo, parametric_placebo_did,
                        placebo_p_fraction, placebo_p_value_path, placebo_rank, zivot_andrews_break)
from .panel import PanelDataset, TreatmentSpec, load_panel, restrict_donors, validate_panel
from .report import (Document, composite_long_rows, correlation_matrix_rows, cross_index_correlation,
                     principal_composite)
from .scm import ScmFit, ScmOptions, fit_synthetic_control, leave_one_out

EXIT_OK, EXIT_INVALID, EXIT_ESTIMATION = 0, 1, 2
LONG = ["unit", "year", "variable", "value"]


def _safe(name: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]+", "_", name)


def _long(unit: str, years, **series) -> list[dict]:
    """Figure data in the long panel layout, so it loads back with ``load_panel``."""
    return [{"unit": unit, "year": int(y), "variable": v, "value": float(s[i])}
            for v, s in series.items() for i, y in enumerate(years)]


class Run:
    """Lazily loaded panel, treatment spec and shared fits for one invocation."""

    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self._panel: PanelDataset | None = None
        self._spec: TreatmentSpec | None = None
        self._fits: dict[str, ScmFit] = {}
        self._placebo: dict = {}
        self.partial_failure = False

    @property
    def panel(self) -> PanelDataset:
        if self._panel is None:
            if not self.cfg.panel_path:
                raise ConfigError("panel_path is not set", operation="load")
            path = self.cfg.resolve(self.cfg.panel_path)
            if not path.exists():
                raise ConfigError(f"panel file {path} does not exist", operation="load")
            self._panel = load_panel(path, self.cfg.schema or None)
        return self._panel

    @property
    def outcomes(self) -> list[str]:
        if not self.cfg.outcomes:
            raise ConfigError("no outcome given (config 'outcomes' or --outcome)", operation="run")
        self.panel.require(*self.cfg.outcomes, *self.cfg.covariates)
        return list(self.cfg.outcomes)

    @property
    def spec(self) -> TreatmentSpec:
        if self._spec is None:
            c = self.cfg
            if c.treated_unit is None or c.treatment_year is None:
                raise ConfigError("treated_unit and treatment_year are required", operation="run")
            p = self.panel
            if isinstance(c.donors, str) and c.donors == "all":
                if c.treated_unit not in p.units:
                    restrict_donors(p, c.treated_unit, c.treatment_year, [])  # raises UnknownUnit
                self._spec = TreatmentSpec(c.treated_unit, c.treatment_year,
                                           tuple(u for u in p.units if u != c.treated_unit))
            else:
                self._spec = restrict_donors(p, c.treated_unit, c.treatment_year, c.donors,
                                             self.cfg.resolve(c.preset_dir))
        return self._spec

    @property
    def scm_options(self) -> ScmOptions:
        s = self.cfg.scm
        return ScmOptions(covariates=tuple(self.cfg.covariates), validation_start=s.validation_start,
                          v_method=s.v_method, normalize_predictors=s.normalize_predictors)

    def scm_fit(self, outcome: str) -> ScmFit:
        if outcome not in self._fits:
            self._fits[outcome] = fit_synthetic_control(self.panel, self.spec, outcome, self.scm_options)
        return self._fits[outcome]

    def placebo(self, outcome: str):
        if outcome not in self._placebo:
            self._placebo[outcome] = in_space_placebo(self.panel, self.spec, outcome, self.scm_options,
                                                      threads=self.cfg.threads, treated_fit=self.scm_fit(outcome))
        return self._placebo[outcome]


# --- subcommands: each returns the documents it produced ---------------------


def cmd_validate(run: Run) -> list[Document]:
    p = run.panel
    rep = validate_panel(p)
    issues = [{"severity": s, "message": m} for s, m in rep.issues]
    c = run.cfg
    for v in [*c.outcomes, *c.covariates]:
        if v not in p.variables:
            issues.append({"severity": "error", "message": f"unknown variable {v!r}"})
    if c.treated_unit is not None and c.treatment_year is not None:
        try:
            run.spec.validate(p)
        except PanelError as exc:
            issues.append({"severity": "error", "message": exc.describe()})
    nan = (float("nan"), float("nan"))
    coverage = [{"variable": v, "cells": rep.rows_per_variable.get(v, 0), "min": rep.ranges.get(v, nan)[0],
                 "max": rep.ranges.get(v, nan)[1]} for v in p.variables]
    meta = {"row_count": rep.row_count, "balanced": rep.balance_ok, "n_units": p.n_units, "n_years": p.n_years,
            "units": list(p.units), "years": [p.years[0], p.years[-1]], "variables": list(p.variables),
            "n_errors": sum(i["severity"] == "error" for i in issues)}
    return [Document("validate", issues, ["severity", "message"], meta),
            Document("validate_figure", coverage, ["variable", "cells", "min", "max"], {"kind": "figure"})]


def _scm_docs(name: str, fit: ScmFit, extra: dict | None = None) -> list[Document]:
    rows = [{"donor": d, "weight": w} for d, w in fit.weights.entries.items()]
    meta = {"outcome": fit.outcome, "treated_unit": fit.treated_unit, "treatment_year": fit.treatment_year,
            "att": fit.att, "pre_rmse": fit.pre_rmse, "post_rmse": fit.post_rmse,
            "intercept": fit.weights.intercept, "weight_mode": fit.weights.mode,
            "predictor_weights": dict(fit.predictor_weights.entries),
            "predictor_method": fit.predictor_weights.method,
            "validation_loss": {str(k): v for k, v in fit.predictor_weights.validation_loss.items()},
            "non_unique": fit.non_unique, "converged": fit.converged, **(extra or {})}
    fig = _long(fit.treated_unit, fit.years, actual=fit.actual, synthetic=fit.counterfactual, gap=fit.gaps.values)
    return [Document(name, rows, ["donor", "weight"], meta), Document(f"{name}_figure", fig, LONG, {"kind": "figure"})]


def cmd_scm(run: Run) -> list[Document]:
    return [d for o in run.outcomes for d in _scm_docs(f"scm_{_safe(o)}", run.scm_fit(o))]


def _did_row(e) -> dict:
    return {"spec": e.spec, "effect": e.effect, "standard_error": e.standard_error, "ci_low": e.ci95[0],
            "ci_high": e.ci95[1], "p_value": e.p_value, "nobs": e.nobs, "n_units": e.n_units,
            "within_r2": e.within_r2}


def cmd_did(run: Run) -> list[Document]:
    docs = []
    d = run.cfg.did
    p, t = run.panel, run.spec
    for o in run.outcomes:
        static = fit_twfe_did(p, t, o, run.cfg.covariates, d.cluster)
        dynamic = fit_dynamic_did(p, t, o, run.cfg.covariates, d.cluster, d.regions)
        meta = {"outcome": o, "cluster": d.cluster, "static": static.metadata, "dynamic": dynamic.metadata}
        idx = [p.unit_index(u) for u in t.donor_pool]
        y = p.matrix(o)
        fig = _long(t.treated_unit, p.years, treated=y[p.unit_index(t.treated_unit)], donor_mean=y[idx].mean(axis=0))
        docs += [Document(f"did_{_safe(o)}", [_did_row(static), _did_row(dynamic)], None, meta),
                 Document(f"did_{_safe(o)}_figure", fig, LONG, {"kind": "figure"})]
    return docs


def cmd_event_study(run: Run) -> list[Document]:
    docs = []
    w = run.cfg.did.window
    for o in run.outcomes:
        es = event_study(run.panel, run.spec, o, run.cfg.covariates, tuple(w) if w else None, run.cfg.did.cluster)
        rows = es.rows()
        docs += [Document(f"event-study_{_safe(o)}", rows, None,
                          {"outcome": o, "reference_year": es.reference_year, "nobs": es.nobs, **es.metadata}),
                 Document(f"event-study_{_safe(o)}_figure",
                          [{"relative_year": r["relative_year"], "estimate": r["estimate"], "ci_low": r["ci_low"],
                            "ci_high": r["ci_high"]} for r in rows], None, {"kind": "figure"})]
    return docs


def cmd_placebo_space(run: Run) -> list[Document]:
    docs = []
    for o in run.outcomes:
        d = run.placebo(o)
        frac = placebo_p_fraction(d)
        meta = {"outcome": o, "p_value": float(frac), "p_fraction": f"{frac.numerator}/{frac.denominator}",
                "treated_rank": placebo_rank(d), **d.metadata}
        fig = [r for u, e in d.per_unit.items() if e.ok for r in _long(u, e.gaps.years, gap=e.gaps.values)]
        docs += [Document(f"placebo-space_{_safe(o)}", d.rows(), None, meta),
                 Document(f"placebo-space_{_safe(o)}_path", placebo_p_value_path(d), None, {"outcome": o}),
                 Document(f"placebo-space_{_safe(o)}_figure", fig, LONG, {"kind": "figure"})]
    return docs


def cmd_placebo_param(run: Run) -> list[Document]:
    docs = []
    n = run.cfg.placebo.n_samples
    for o in run.outcomes:
        r = parametric_placebo_did(run.panel, run.spec, o, n, run.cfg.seed, run.scm_options, run.cfg.threads,
                                   distribution=run.placebo(o))
        s = r.summary()
        samples = [{"sample": i, "coefficient": float(b), "standard_error": float(e)}
                   for i, (b, e) in enumerate(zip(r.coefficients, r.standard_errors))]
        docs += [Document(f"placebo-param_{_safe(o)}", [s], list(s), {"outcome": o, **r.metadata}),
                 Document(f"placebo-param_{_safe(o)}_figure", samples, None, {"kind": "figure"})]
    return docs


def cmd_placebo_time(run: Run) -> list[Document]:
    docs = []
    c = run.cfg.placebo
    p, t = run.panel, run.spec
    for o in run.outcomes:
        y = p.series(t.treated_unit, o)
        pre = {yr: v for yr, v in zip(p.years, y) if yr < t.treatment_year}
        meta: dict = {"outcome": o, "za_mode": c.za_mode}
        try:
            za = zivot_andrews_break(pre, c.za_mode, c.trim)
            meta["zivot_andrews"] = za.as_dict()
        except SeriesTooShort as exc:
            if c.placebo_years is None:
                raise
            za = None
            meta["zivot_andrews"] = {"skipped": exc.describe()}
        years = list(c.placebo_years) if c.placebo_years is not None else [za.break_year]
        rows, fig = [], []
        for yr in years:
            f = in_time_placebo(p, t, o, yr, run.scm_options)
            rows.append({"placebo_year": yr, "source": "configured" if c.placebo_years else "zivot_andrews",
                         "pre_rmse": f.pre_rmse, "post_rmse": f.post_rmse, "att": f.att})
            fig += _long(f"{t.treated_unit}@{yr}", f.years, actual=f.actual, synthetic=f.counterfactual,
                         gap=f.gaps.values)
        docs += [Document(f"placebo-time_{_safe(o)}", rows, None, meta),
                 Document(f"placebo-time_{_safe(o)}_figure", fig, LONG, {"kind": "figure"})]
    return docs


def cmd_trend_test(run: Run) -> list[Document]:
    docs = []
    c = run.cfg.placebo
    for o in run.outcomes:
        g = run.scm_fit(o).gaps
        known = differential_trend_test(g, c.trend_break_year or run.spec.treatment_year, c.trim)
        unknown = differential_trend_test(g, None, c.trim)
        scan = [{"mode": r.mode, "year": y, "statistic": s} for r in (known, unknown) for y, s in r.scan.items()]
        docs += [Document(f"trend-test_{_safe(o)}", [known.as_dict(), unknown.as_dict()], None,
                          {"outcome": o, "known": known.metadata, "unknown": unknown.metadata}),
                 Document(f"trend-test_{_safe(o)}_figure", scan, None, {"kind": "figure"})]
    return docs


def cmd_loo(run: Run) -> list[Document]:
    docs = []
    for o in run.outcomes:
        base = run.scm_fit(o)
        reps = leave_one_out(run.panel, run.spec, o, run.scm_options, run.cfg.loo.max_replications, baseline=base)
        rows = [{"excluded": r.excluded, "gap_correlation": r.gap_correlation, "pre_rmse": r.fit.pre_rmse,
                 "post_rmse": r.fit.post_rmse, "att": r.fit.att} for r in reps]
        fig = _long("baseline", base.years, gap=base.gaps.values)
        for r in reps:
            fig += _long(f"without:{r.excluded}", r.fit.years, gap=r.fit.gaps.values)
        docs += [Document(f"loo_{_safe(o)}", rows, ["excluded", "gap_correlation", "pre_rmse", "post_rmse", "att"],
                          {"outcome": o, "baseline_att": base.att}),
                 Document(f"loo_{_safe(o)}_figure", fig, LONG, {"kind": "figure"})]
    return docs


def _adv_docs(name: str, unit: str, estimates: list) -> list[Document]:
    rows = [e.summary() for e in estimates]
    fig = []
    for e in estimates:
        fig += _long(unit, e.years, **{f"counterfactual:{e.method}": e.counterfactual, f"gap:{e.method}": e.gaps})
    fig += _long(unit, estimates[0].years, actual=estimates[0].actual)
    return [Document(name, rows, None, {"nuisance": [e.nuisance for e in estimates]}),
            Document(f"{name}_figure", fig, LONG, {"kind": "figure"})]


def cmd_gsynth(run: Run) -> list[Document]:
    g = run.cfg.gsynth
    return [d for o in run.outcomes for d in _adv_docs(
        f"gsynth_{_safe(o)}", run.spec.treated_unit,
        [fit_gsynth(run.panel, run.spec, o, tuple(g.factor_range), g.n_boot, run.cfg.seed, run.cfg.threads)])]


def cmd_mc(run: Run) -> list[Document]:
    m = run.cfg.mc
    docs = []
    for o in run.outcomes:
        ests = []
        for lam in m.lambdas:
            e = fit_matrix_completion(run.panel, run.spec, o, float(lam), m.n_boot, run.cfg.seed, run.cfg.threads)
            ests.append(dataclasses.replace(e, method=f"matrix_completion[lambda={float(lam)!r}]"))
        docs += _adv_docs(f"mc_{_safe(o)}", run.spec.treated_unit, ests)
    return docs


def cmd_lasso_scm(run: Run) -> list[Document]:
    grid = run.cfg.lasso.lambda_grid
    return [d for o in run.outcomes
            for d in _scm_docs(f"lasso-scm_{_safe(o)}", fit_lasso_scm(run.panel, run.spec, o, grid, run.cfg.seed))]


def cmd_sdid(run: Run) -> list[Document]:
    docs = []
    p, t = run.panel, run.spec
    for o in run.outcomes:
        r = fit_sdid(p, t, o, run.cfg.sdid.regularization)
        s = r.summary()
        top = {k: v for k, v in s.items() if not k.startswith("nonzero")}
        weights = [{"kind": "unit", "name": u, "weight": w} for u, w in r.unit_weights.items()]
        weights += [{"kind": "time", "name": str(y), "weight": w} for y, w in r.time_weights.items()]
        docs += [Document(f"sdid_{_safe(o)}", [top], list(top),
                          {"outcome": o, "unit_intercept": r.unit_intercept, "time_intercept": r.time_intercept,
                           "nuisance": r.nuisance}),
                 Document(f"sdid_{_safe(o)}_figure", weights, ["kind", "name", "weight"], {"kind": "figure"})]
    return docs


def cmd_simulate(run: Run) -> list[Document]:
    s, c = run.cfg.simulate, run.cfg
    outcome = c.outcomes[0] if c.outcomes else "y"
    spec = FactorModelSpec.random(s.n_units, s.n_years, s.n_factors, s.noise_sd, s.effect, seed=c.seed)
    sim = simulate_factor_panel(spec, s.n_units, s.n_years, seed=c.seed, treatment_index=s.treatment_index,
                                outcome=outcome)
    p, t = sim.panel, sim.treatment
    rows = [{"unit": u, "year": y, "variable": outcome, "value": float(p.matrix(outcome)[i, j])}
            for i, u in enumerate(p.units) for j, y in enumerate(p.years)]
    meta = {"treated_unit": t.treated_unit, "treatment_year": t.treatment_year, "donors": list(t.donor_pool),
            "true_att": sim.true_att, "seed": c.seed, **dataclasses.asdict(s)}
    docs = [Document("simulated_panel", rows, LONG, meta),
            Document("simulated_truth", [{"year": y, "effect": e} for y, e in sim.true_effect.items()], None, meta)]
    if s.n_reps > 0:
        k0 = s.treatment_index if s.treatment_index is not None else (3 * s.n_years) // 4
        study = recovery_study(StudyConfig(s.n_units, s.n_years, s.n_factors, s.noise_sd, s.effect, k0, s.n_reps,
                                           s.n_boot, seed=c.seed), threads=c.threads)
        per_rep = [{"method": m, "replication": i, "att": float(a[0]), "ci_low": float(a[1]), "ci_high": float(a[2])}
                   for m, arr in study.estimates.items() for i, a in enumerate(arr)]
        docs += [Document("simulate_study", study.rows(), None, study.metadata),
                 Document("simulate_study_figure", per_rep, None, {"kind": "figure"})]
    return docs


def cmd_correlate(run: Run) -> list[Document]:
    c = run.cfg.correlate
    p = run.panel
    rep = cross_index_correlation(p, [tuple(x) for x in c.pairs] if c.pairs else None)
    names = sorted({v for pair in rep.pairs for v in pair})
    docs = [Document("correlate", rep.rows(), ["series_a", "series_b", "pearson_r", "p_value", "n"],
                     {"method": rep.method, "test": "two-sided t, n-2 df", "variables": names}),
            Document("correlate_figure", correlation_matrix_rows(rep), ["variable", *names], {"kind": "figure"})]
    if c.composite:
        comp = principal_composite(p, c.composite, c.pca_method)
        rows = list(composite_long_rows(comp))
        docs.append(Document("composite", rows, LONG,
                             {"method": f"first principal component ({comp.method} matrix)",
                              "loadings": comp.loadings, "explained_share": comp.explained_share,
                              "n": int(comp.values.size)}))
    return docs


COMMANDS: dict[str, Callable[[Run], list[Document]]] = {
    "validate": cmd_validate, "scm": cmd_scm, "did": cmd_did, "event-study": cmd_event_study,
    "placebo-space": cmd_placebo_space, "placebo-param": cmd_placebo_param, "placebo-time": cmd_placebo_time,
    "trend-test": cmd_trend_test, "loo": cmd_loo, "gsynth": cmd_gsynth, "mc": cmd_mc, "lasso-scm": cmd_lasso_scm,
    "sdid": cmd_sdid, "simulate": cmd_simulate, "correlate": cmd_correlate,
}


def cmd_report(run: Run) -> list[Document]:
    docs, status = [], []
    for name in run.cfg.report.battery:
        if name not in BATTERY:
            raise ConfigError(f"unknown battery entry {name!r}; choose from {list(BATTERY)}", operation="report")
        try:
            produced = COMMANDS[name](run)
        except ScmKitError as exc:
            if isinstance(exc, (ConfigError, PanelError)):
                raise
            status.append({"subcommand": name, "status": "failed", "documents": 0, "message": exc.describe()})
            continue
        docs += produced
        status.append({"subcommand": name, "status": "ok", "documents": len(produced), "message": ""})
    docs.append(Document("report", status, ["subcommand", "status", "documents", "message"],
                         {"battery": list(run.cfg.report.battery)}))
    if any(s["status"] == "failed" for s in status):
        run.partial_failure = True
    return docs


COMMANDS["report"] = cmd_report


# --- driver -------------------------------------------------------------------


def _versions() -> dict:
    out = {"scmkit": __version__, "python": platform.python_version()}
    for dist in ("numpy", "scipy", "pandas", "click", "pyyaml"):
        try:
            out[dist] = metadata.version(dist)
        except metadata.PackageNotFoundError:
            out[dist] = None
    return out


def _file_digest(path: Path | None) -> str | None:
    if path is None or not path.exists():
        return None
    return hashlib.sha256(path.read_bytes()).hexdigest()


def run(subcommand: str, cfg: RunConfig, stderr=None) -> int:
    """Execute one subcommand and write its artifacts under ``cfg.out``; returns the exit status."""
    stderr = stderr or sys.stderr
    out = cfg.resolve(cfg.out) if not Path(cfg.out).is_absolute() else Path(cfg.out)
    r = Run(cfg)
    status, message, docs = EXIT_OK, "", []
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        try:
            docs = COMMANDS[subcommand](r)
            if subcommand == "validate" and docs[0].metadata["n_errors"]:
                status = EXIT_INVALID
                message = "; ".join(i["message"] for i in docs[0].rows if i["severity"] == "error")
            elif r.partial_failure:
                status = EXIT_ESTIMATION
                message = "; ".join(s["message"] for s in docs[-1].rows if s["status"] == "failed")
        except (ConfigError, PanelError) as exc:
            status, message = EXIT_INVALID, exc.describe()
        except ScmKitError as exc:
            status, message = EXIT_ESTIMATION, exc.describe()
        except (ValueError, TypeError, np.linalg.LinAlgError) as exc:
            status, message = EXIT_ESTIMATION, f"{subcommand}: {type(exc).__name__}: {exc}"
    written = []
    for d in docs:
        written += [f.name for f in d.write(out)]
    out.mkdir(parents=True, exist_ok=True)
    panel_file = cfg.resolve(cfg.panel_path) if cfg.panel_path else None
    manifest = {
        "subcommand": subcommand, "status": status, "message": message, "config_hash": cfg.hash(),
        "seed": cfg.seed, "threads_cap": cfg.threads, "versions": _versions(),
        "panel_sha256": _file_digest(panel_file), "documents": sorted(written),
        "warnings": sorted({f"{w.category.__name__}: {w.message}" for w in caught}),
        "config": cfg.to_dict(),
    }
    (out / f"manifest_{subcommand}.json").write_text(json.dumps(manifest, indent=2, sort_keys=True, default=str)
                                                     + "\n")
    (out / f"timestamp_{subcommand}.txt").write_text(_dt.datetime.now(_dt.timezone.utc).isoformat() + "\n")
    if status != EXIT_OK:
        click.echo(f"scmkit {subcommand}: {message}", file=stderr)
    return status


def _resolve_cfg(config, seed, threads, out, outcome) -> RunConfig:
    cfg = load_config(config)
    changes = {}
    if seed is not None:
        changes["seed"] = seed
    if threads is not None:
        changes["threads"] = threads
    if out is not None:
        changes["out"] = str(Path(out).resolve())
    if outcome:
        changes["outcomes"] = list(outcome)
    return dataclasses.replace(cfg, **changes) if changes else cfg


def _common(f):
    f = click.option("--outcome", "outcome", multiple=True, envvar="SCMKIT_OUTCOME",
                     help="Outcome variable (repeatable); overrides the config list.")(f)
    f = click.option("--out", type=click.Path(file_okay=False), envvar="SCMKIT_OUT",
                     help="Output directory.")(f)
    f = click.option("--threads", type=int, envvar="SCMKIT_THREADS", help="Worker cap for inner loops.")(f)
    f = click.option("--seed", type=int, envvar="SCMKIT_SEED", help="Unsigned 64-bit seed.")(f)
    f = click.option("--config", type=click.Path(dir_okay=False), envvar="SCMKIT_CONFIG",
                     help="YAML run configuration.")(f)
    return f


@click.group(context_settings={"help_option_names": ["-h", "--help"]})
@click.version_option(__version__, prog_name="scmkit")
def main():
    """Counterfactual estimation battery for one treated unit in a balanced panel."""


def _register(name: str, doc: str):
    @_common
    def command(config, seed, threads, out, outcome):
        try:
            cfg = _resolve_cfg(config, seed, threads, out, outcome)
        except ScmKitError as exc:
            click.echo(f"scmkit {name}: {exc.describe()}", err=True)
            sys.exit(EXIT_INVALID)
        sys.exit(run(name, cfg))

    command.__doc__ = doc
    main.command(name)(command)


_HELP = {
    "validate": "Check the panel and the config references.",
    "scm": "Synthetic control fit per outcome.",
    "did": "Static and dynamic two-way fixed-effects DiD.",
    "event-study": "Relative-year treated coefficients.",
    "placebo-space": "In-space placebo distribution and RMSPE-ratio p-value.",
    "placebo-param": "Resampled placebo-donor DiD with a KS comparison.",
    "placebo-time": "Break-dated or configured in-time placebo fits.",
    "trend-test": "Chow and sup-Wald tests on the gap trend.",
    "loo": "Leave-one-donor-out refits.",
    "gsynth": "Interactive fixed-effects imputation.",
    "mc": "Nuclear-norm matrix completion at each configured lambda.",
    "lasso-scm": "Signed-weight LASSO synthetic control.",
    "sdid": "Synthetic difference-in-differences.",
    "simulate": "Write a simulated factor-model panel (and optionally a recovery study).",
    "correlate": "Cross-index correlations and principal-component composite.",
    "report": "Run the configured battery in one invocation.",
}
for _name, _doc in _HELP.items():
    _register(_name, _doc)


if __name__ == "__main__":  # pragma: no cover
    main()
