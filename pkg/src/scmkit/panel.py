"""Long-format panel ingestion, validation, donor selection and design matrices."""

from __future__ import annotations

import io
import os
from dataclasses import dataclass, field
from importlib import resources
from typing import Iterable, Mapping, Sequence

import numpy as np
import pandas as pd

from .errors import (
    DuplicateCell,
    EmptyDonorPool,
    EmptyPredictorSet,
    InvalidTreatment,
    ParseError,
    PeriodOutOfRange,
    TreatedInPool,
    UnbalancedPanel,
    UnknownUnit,
    UnknownVariable,
)

COLUMNS = ("unit", "year", "variable", "value")
OUTCOME = "outcome"
COVARIATE = "covariate"


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=np.float64)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class PanelDataset:
    """Balanced unit x year store.

    ``data[var]`` is a read-only ``(n_units, n_years)`` array whose rows follow
    ``units`` and columns follow ``years``.
    """

    units: tuple[str, ...]
    years: tuple[int, ...]
    data: Mapping[str, np.ndarray]
    roles: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self):
        units = tuple(str(u) for u in self.units)
        years = tuple(int(y) for y in self.years)
        if len(set(units)) != len(units):
            raise InvalidTreatment("unit identifiers must be unique", operation="PanelDataset")
        if any(b - a != 1 for a, b in zip(years, years[1:])):
            raise UnbalancedPanel([("years not contiguous", years)])
        data = {}
        for name, arr in self.data.items():
            arr = _frozen(arr)
            if arr.shape != (len(units), len(years)):
                raise UnbalancedPanel([(name, f"shape {arr.shape}")])
            data[str(name)] = arr
        roles = {v: self.roles.get(v, OUTCOME) for v in data}
        object.__setattr__(self, "units", units)
        object.__setattr__(self, "years", years)
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "roles", roles)
        object.__setattr__(self, "_uidx", {u: i for i, u in enumerate(units)})

    # --- accessors -------------------------------------------------------
    @property
    def variables(self) -> tuple[str, ...]:
        return tuple(self.data)

    @property
    def n_units(self) -> int:
        return len(self.units)

    @property
    def n_years(self) -> int:
        return len(self.years)

    def unit_index(self, unit: str) -> int:
        try:
            return self._uidx[unit]
        except KeyError:
            raise UnknownUnit(f"unknown unit {unit!r}") from None

    def year_index(self, year: int) -> int:
        i = int(year) - self.years[0]
        if not 0 <= i < len(self.years):
            raise PeriodOutOfRange(f"year {year} outside panel range {self.years[0]}-{self.years[-1]}")
        return i

    def matrix(self, variable: str) -> np.ndarray:
        try:
            return self.data[variable]
        except KeyError:
            raise UnknownVariable(f"unknown variable {variable!r}", operation="lookup") from None

    def series(self, unit: str, variable: str) -> np.ndarray:
        return self.matrix(variable)[self.unit_index(unit)]

    def require(self, *variables: str) -> None:
        for v in variables:
            if v not in self.data:
                raise UnknownVariable(f"unknown variable {v!r}", operation="lookup")

    # --- constructors returning new panels -------------------------------
    def subset(self, units: Sequence[str] | None = None, years: tuple[int, int] | None = None,
               variables: Sequence[str] | None = None) -> "PanelDataset":
        ui = [self.unit_index(u) for u in units] if units is not None else list(range(self.n_units))
        if years is not None:
            lo, hi = years
            if lo > hi or lo < self.years[0] or hi > self.years[-1]:
                raise PeriodOutOfRange(f"year range {lo}-{hi} outside panel", operation="subset")
            ys = slice(lo - self.years[0], hi - self.years[0] + 1)
            new_years = tuple(range(lo, hi + 1))
        else:
            ys, new_years = slice(None), self.years
        keep = self.variables if variables is None else tuple(variables)
        self.require(*keep)
        return PanelDataset(
            units=tuple(self.units[i] for i in ui),
            years=new_years,
            data={v: self.data[v][ui][:, ys] for v in keep},
            roles={v: self.roles[v] for v in keep},
        )

    def with_variable(self, name: str, values: np.ndarray, role: str = OUTCOME) -> "PanelDataset":
        data = dict(self.data)
        data[name] = values
        roles = dict(self.roles)
        roles[name] = role
        return PanelDataset(self.units, self.years, data, roles)

    def to_frame(self) -> pd.DataFrame:
        frames = []
        for v, arr in self.data.items():
            frames.append(pd.DataFrame({
                "unit": np.repeat(self.units, self.n_years),
                "year": np.tile(self.years, self.n_units),
                "variable": v,
                "value": arr.ravel(),
            }))
        if not frames:
            return pd.DataFrame(columns=list(COLUMNS))
        return pd.concat(frames, ignore_index=True)

    def __eq__(self, other):
        if not isinstance(other, PanelDataset):
            return NotImplemented
        return (
            self.units == other.units
            and self.years == other.years
            and self.roles == other.roles
            and self.data.keys() == other.data.keys()
            and all(np.array_equal(self.data[v], other.data[v]) for v in self.data)
        )

    def __repr__(self):
        return (f"PanelDataset({self.n_units} units, {self.years[0]}-{self.years[-1]}, "
                f"variables={list(self.variables)})")


@dataclass(frozen=True)
class TreatmentSpec:
    treated_unit: str
    treatment_year: int
    donor_pool: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "donor_pool", tuple(dict.fromkeys(str(d) for d in self.donor_pool)))
        object.__setattr__(self, "treatment_year", int(self.treatment_year))

    def validate(self, p: PanelDataset, min_pre: int = 2) -> "TreatmentSpec":
        if self.treated_unit not in p.units:
            raise UnknownUnit(f"treated unit {self.treated_unit!r} not in panel", operation="TreatmentSpec")
        missing = [u for u in self.donor_pool if u not in p.units]
        if missing:
            raise UnknownUnit(f"donor(s) not in panel: {missing}", operation="TreatmentSpec")
        if self.treated_unit in self.donor_pool:
            raise TreatedInPool(f"treated unit {self.treated_unit!r} is in the donor pool", operation="TreatmentSpec")
        if not self.donor_pool:
            raise EmptyDonorPool("donor pool is empty", operation="TreatmentSpec")
        n_pre = self.treatment_year - p.years[0]
        n_post = p.years[-1] - self.treatment_year + 1
        if n_pre < min_pre or n_post < 1:
            raise InvalidTreatment(
                f"treatment year {self.treatment_year} needs >={min_pre} pre-years and >=1 post-year "
                f"inside {p.years[0]}-{p.years[-1]}")
        return self

    def pre_years(self, p: PanelDataset) -> tuple[int, ...]:
        return tuple(y for y in p.years if y < self.treatment_year)

    def post_years(self, p: PanelDataset) -> tuple[int, ...]:
        return tuple(y for y in p.years if y >= self.treatment_year)

    def replace(self, **kw) -> "TreatmentSpec":
        d = {"treated_unit": self.treated_unit, "treatment_year": self.treatment_year,
             "donor_pool": self.donor_pool}
        d.update(kw)
        return TreatmentSpec(**d)


@dataclass
class ValidationReport:
    row_count: int
    balance_ok: bool
    issues: list[tuple[str, str]]
    rows_per_variable: dict[str, int] = field(default_factory=dict)
    ranges: dict[str, tuple[float, float]] = field(default_factory=dict)

    @property
    def errors(self):
        return [m for s, m in self.issues if s == "error"]

    @property
    def warnings(self):
        return [m for s, m in self.issues if s == "warning"]


# --- loading ---------------------------------------------------------------


def _read_source(source) -> pd.DataFrame:
    if isinstance(source, pd.DataFrame):
        return source.copy()
    if isinstance(source, str) and "\n" in source:
        source = io.StringIO(source)
    return pd.read_csv(source, dtype=str, keep_default_na=False, encoding="utf-8")


def load_panel(source, schema: Mapping[str, str] | None = None,
               roles: Mapping[str, str] | None = None) -> PanelDataset:
    """Load a long ``unit,year,variable,value`` table into a balanced panel.

    ``source`` is a path, CSV text, file object or DataFrame. ``schema`` maps
    the canonical column names to the names used in the source. Row numbers in
    ``ParseError`` are 1-based data rows (the header is row 0).
    """
    df = _read_source(source)
    schema = dict(schema or {})
    rename = {schema.get(c, c): c for c in COLUMNS}
    absent = [src for src in rename if src not in df.columns]
    if absent:
        raise ParseError(f"missing column(s) {absent}; found {list(df.columns)}")
    df = df.rename(columns=rename)[list(COLUMNS)]

    df["unit"] = df["unit"].astype(str)
    df["variable"] = df["variable"].astype(str)
    years = pd.to_numeric(df["year"], errors="coerce")
    bad = years.isna() | (years != np.floor(years))
    if bad.any():
        r = int(np.flatnonzero(bad.to_numpy())[0])
        raise ParseError(f"year {df['year'].iloc[r]!r} is not an integer", row=r + 1)
    values = pd.to_numeric(df["value"], errors="coerce")
    bad = ~np.isfinite(values.to_numpy(dtype=float, na_value=np.nan))
    if bad.any():
        r = int(np.flatnonzero(bad)[0])
        raise ParseError(f"value {df['value'].iloc[r]!r} is not a finite real", row=r + 1)
    df["year"] = years.astype(np.int64)
    # pandas' fast parser can be 1 ulp off; numpy's string conversion is exact
    df["value"] = df["value"].astype(str).str.strip().to_numpy().astype(np.float64)

    dup = df.duplicated(subset=["unit", "year", "variable"], keep="first")
    if dup.any():
        cells = list(df.loc[dup, ["unit", "year", "variable"]].itertuples(index=False, name=None))
        raise DuplicateCell(cells)

    units = tuple(sorted(df["unit"].unique()))
    if df.empty:
        raise ParseError("no data rows")
    y0, y1 = int(df["year"].min()), int(df["year"].max())
    year_range = tuple(range(y0, y1 + 1))
    variables = tuple(sorted(df["variable"].unique()))

    ui = pd.Index(units).get_indexer(df["unit"])
    yi = df["year"].to_numpy() - y0
    data = {}
    missing = []
    for v in variables:
        sel = (df["variable"] == v).to_numpy()
        arr = np.full((len(units), len(year_range)), np.nan)
        arr[ui[sel], yi[sel]] = df["value"].to_numpy()[sel]
        holes = np.argwhere(np.isnan(arr))
        missing.extend((units[i], year_range[j], v) for i, j in holes)
        data[v] = arr
    if missing:
        raise UnbalancedPanel(missing)
    roles = {v: (roles or {}).get(v, OUTCOME) for v in variables}
    return PanelDataset(units, year_range, data, roles)


def write_panel(p: PanelDataset, path) -> None:
    df = p.to_frame().sort_values(["unit", "year", "variable"], kind="mergesort")
    df.to_csv(path, index=False, float_format="%.17g")


def validate_panel(p: PanelDataset) -> ValidationReport:
    issues: list[tuple[str, str]] = []
    rows = {}
    ranges = {}
    for v, arr in p.data.items():
        rows[v] = int(arr.size)
        if not np.all(np.isfinite(arr)):
            issues.append(("error", f"{v}: non-finite values"))
            continue
        lo, hi = float(arr.min()), float(arr.max())
        ranges[v] = (lo, hi)
        if hi == lo:
            issues.append(("warning", f"{v}: zero variance (constant {lo:g})"))
        for i, u in enumerate(p.units):
            if np.ptp(arr[i]) == 0 and hi != lo:
                issues.append(("info", f"{v}: series constant for unit {u}"))
    row_count = p.n_units * p.n_years
    balance_ok = not any(s == "error" for s, _ in issues)
    return ValidationReport(row_count, balance_ok, issues, rows, ranges)


# --- donor pools -----------------------------------------------------------

PRESETS = ("ibero17", "mercosur", "oas", "opec", "oias")


def preset_members(name: str, preset_dir=None) -> tuple[str, ...]:
    """Read a preset membership file (one unit per line, ``#`` comments)."""
    if preset_dir is not None:
        text = open(os.path.join(preset_dir, f"{name}.txt"), encoding="utf-8").read()
    else:
        try:
            text = resources.files("scmkit").joinpath("presets", f"{name}.txt").read_text("utf-8")
        except FileNotFoundError:
            raise UnknownUnit(f"unknown donor preset {name!r}; known: {PRESETS}") from None
    return tuple(ln.strip() for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#"))


def restrict_donors(p: PanelDataset, treated_unit: str, treatment_year: int,
                    selection: str | Iterable[str], preset_dir=None) -> TreatmentSpec:
    """Build a TreatmentSpec from a preset name or an explicit donor list.

    Presets are intersected with the loaded units and never contain the
    treated unit. Explicit lists must name loaded units and must not contain
    the treated unit.
    """
    if treated_unit not in p.units:
        raise UnknownUnit(f"treated unit {treated_unit!r} not in panel")
    if isinstance(selection, str):
        members = preset_members(selection, preset_dir)
        pool = [u for u in members if u in p.units and u != treated_unit]
        if not pool:
            raise EmptyDonorPool(f"preset {selection!r} matches no loaded donor units")
    else:
        pool = list(selection)
        unknown = [u for u in pool if u not in p.units]
        if unknown:
            raise UnknownUnit(f"donor(s) not in panel: {unknown}")
        if treated_unit in pool:
            raise TreatedInPool(f"treated unit {treated_unit!r} listed as donor")
        if not pool:
            raise EmptyDonorPool("explicit donor list is empty")
    return TreatmentSpec(treated_unit, treatment_year, tuple(pool)).validate(p)


# --- design matrices -------------------------------------------------------


@dataclass(frozen=True, eq=False)
class DesignMatrices:
    """Predictor and outcome matrices for one treated unit.

    Rows of ``X1``/``X0`` follow ``predictor_names``; columns of ``X0`` and
    ``Q0`` follow ``donors``. ``Q1``/``Q0`` span every panel year in
    ``years``; ``pre_years`` is the matching window.
    """

    outcome: str
    treated_unit: str
    donors: tuple[str, ...]
    predictor_names: tuple[str, ...]
    predictor_years: tuple[int | None, ...]
    X1: np.ndarray
    X0: np.ndarray
    years: tuple[int, ...]
    Q1: np.ndarray
    Q0: np.ndarray
    treatment_year: int

    @property
    def pre_mask(self) -> np.ndarray:
        return np.asarray(self.years) < self.treatment_year

    def rows(self, keep: np.ndarray) -> "DesignMatrices":
        keep = np.asarray(keep, dtype=bool)
        return DesignMatrices(
            self.outcome, self.treated_unit, self.donors,
            tuple(n for n, k in zip(self.predictor_names, keep) if k),
            tuple(y for y, k in zip(self.predictor_years, keep) if k),
            self.X1[keep], self.X0[keep], self.years, self.Q1, self.Q0, self.treatment_year)


def design_matrices(p: PanelDataset, t: TreatmentSpec, outcome: str,
                    covariates: Sequence[str] = (), period: tuple[int, int] | None = None,
                    outcome_path: bool = True) -> DesignMatrices:
    """Assemble predictors for the treated unit and its donors.

    With ``outcome_path`` each pre-period outcome year is one predictor row
    (``outcome@year``); each covariate adds one row holding its mean over the
    period (``covariate[mean a-b]``).
    """
    p.require(outcome, *covariates)
    pre = t.pre_years(p)
    lo, hi = period if period is not None else (pre[0], pre[-1])
    if lo > hi or lo < p.years[0] or hi >= t.treatment_year:
        raise PeriodOutOfRange(f"predictor period {lo}-{hi} must lie inside pre-treatment years "
                               f"{pre[0]}-{pre[-1]}")
    if not outcome_path and not covariates:
        raise EmptyPredictorSet("no predictors selected")
    ti = p.unit_index(t.treated_unit)
    di = [p.unit_index(d) for d in t.donor_pool]
    cols = slice(lo - p.years[0], hi - p.years[0] + 1)
    names, pyears, rows = [], [], []
    if outcome_path:
        q = p.matrix(outcome)
        for y in range(lo, hi + 1):
            names.append(f"{outcome}@{y}")
            pyears.append(y)
            rows.append(q[:, y - p.years[0]])
    for c in covariates:
        names.append(f"{c}[mean {lo}-{hi}]")
        pyears.append(None)
        rows.append(p.matrix(c)[:, cols].mean(axis=1))
    if not rows:
        raise EmptyPredictorSet("no predictors selected")
    X = np.vstack(rows)
    Q = p.matrix(outcome)
    return DesignMatrices(
        outcome=outcome,
        treated_unit=t.treated_unit,
        donors=t.donor_pool,
        predictor_names=tuple(names),
        predictor_years=tuple(pyears),
        X1=X[:, ti].copy(),
        X0=X[:, di].copy(),
        years=p.years,
        Q1=Q[ti].copy(),
        Q0=Q[di].T.copy(),
        treatment_year=t.treatment_year,
    )


def balanced_toy_panel(n_units: int = 3, n_years: int = 5, start: int = 2000, seed: int = 0,
                       variables: Sequence[str] = ("y",)) -> PanelDataset:
    """Small random balanced panel used by examples and smoke tests."""
    rng = np.random.default_rng(seed)
    units = tuple(f"U{i:02d}" for i in range(n_units))
    years = tuple(range(start, start + n_years))
    data = {v: rng.normal(size=(n_units, n_years)) for v in variables}
    return PanelDataset(units, years, data)
