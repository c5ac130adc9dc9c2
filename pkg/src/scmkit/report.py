"""Cross-index correlations, first-principal-component composites, table emission."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy import stats

from .errors import InsufficientOverlap, ZeroVariance
from .panel import PanelDataset


@dataclass(frozen=True)
class CorrelationEntry:
    r: float
    p_value: float
    n: int


@dataclass(eq=False)
class CorrelationReport:
    pairs: dict[tuple[str, str], CorrelationEntry]
    method: str = "pearson"

    def rows(self) -> list[dict]:
        return [{"series_a": a, "series_b": b, "pearson_r": e.r, "p_value": e.p_value, "n": e.n}
                for (a, b), e in self.pairs.items()]


def pearson(a, b) -> CorrelationEntry:
    """Pearson r with the two-sided t-test of zero correlation on ``n - 2`` df."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    ok = np.isfinite(a) & np.isfinite(b)
    a, b = a[ok], b[ok]
    n = a.size
    if n < 3:
        raise InsufficientOverlap(f"{n} overlapping observations; need >= 3")
    da, db = a - a.mean(), b - b.mean()
    denom = math.sqrt(float(da @ da) * float(db @ db))
    if denom == 0:
        raise InsufficientOverlap("a series is constant over the overlap")
    r = float(np.clip((da @ db) / denom, -1.0, 1.0))
    if abs(r) == 1.0:
        return CorrelationEntry(r, 0.0, n)
    t = r * math.sqrt((n - 2) / (1 - r * r))
    return CorrelationEntry(r, float(min(1.0, 2 * stats.t.sf(abs(t), n - 2))), n)


def cross_index_correlation(p: PanelDataset, pairs: Sequence[tuple[str, str]] | None = None) -> CorrelationReport:
    """Pearson correlations over pooled unit-year cells; all variable pairs by default."""
    if pairs is None:
        v = p.variables
        pairs = [(v[i], v[j]) for i in range(len(v)) for j in range(i + 1, len(v))]
    out = {}
    for a, b in pairs:
        p.require(a, b)
        out[(a, b)] = pearson(p.matrix(a).ravel(), p.matrix(b).ravel())
    return CorrelationReport(out)


@dataclass(eq=False)
class Composite:
    values: np.ndarray  # (n_units, n_years)
    units: tuple[str, ...]
    years: tuple[int, ...]
    loadings: dict[str, float]
    explained_share: float
    method: str = "correlation"

    def series(self) -> dict[tuple[str, int], float]:
        return {(u, y): float(self.values[i, j]) for i, u in enumerate(self.units) for j, y in enumerate(self.years)}

    def to_panel(self, name: str = "composite") -> PanelDataset:
        return PanelDataset(self.units, self.years, {name: self.values})


def principal_composite(p: PanelDataset, variables: Sequence[str], method: str = "correlation") -> Composite:
    """First principal component over pooled observations.

    ``method="correlation"`` standardizes inputs first (eigenvectors of the
    correlation matrix); ``"covariance"`` only centres them. The sign is chosen
    so the composite correlates positively with the equal-weight mean of the
    standardized inputs. The composite is the score on the unit-norm loading.
    """
    variables = list(variables)
    if len(variables) < 2:
        raise ValueError("principal_composite needs at least two variables")
    p.require(*variables)
    X = np.column_stack([p.matrix(v).ravel() for v in variables]).astype(float)
    if not np.all(np.isfinite(X)):
        raise InsufficientOverlap("composite inputs must overlap completely", operation="principal_composite")
    Xc = X - X.mean(axis=0)
    sd = Xc.std(axis=0, ddof=1)
    if np.any(sd == 0):
        bad = [v for v, s in zip(variables, sd) if s == 0]
        raise ZeroVariance(f"zero-variance input(s): {bad}")
    Z = Xc / sd
    A = Z if method == "correlation" else Xc
    if method not in ("correlation", "covariance"):
        raise ValueError("method must be 'correlation' or 'covariance'")
    C = A.T @ A / (A.shape[0] - 1)
    ev, evec = np.linalg.eigh(C)
    v = evec[:, -1]
    score = A @ v
    if _flip(v, score, Z.mean(axis=1)):
        v, score = -v, -score
    share = float(ev[-1] / ev.sum())
    return Composite(score.reshape(p.n_units, p.n_years), p.units, p.years,
                     dict(zip(variables, map(float, v))), share, method)


def _flip(v: np.ndarray, score: np.ndarray, mean: np.ndarray) -> bool:
    """Sign rule; when the equal-weight mean is constant, the first non-zero loading is made positive."""
    c = float(np.dot(score - score.mean(), mean - mean.mean()))
    if abs(c) > 1e-12 * max(1.0, float(np.linalg.norm(score) * np.linalg.norm(mean))):
        return c < 0
    first = v[np.flatnonzero(np.abs(v) > 1e-12)]
    return bool(first.size and first[0] < 0)


# --- emission ----------------------------------------------------------------


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return repr(x)
    if x is None:
        return ""
    return str(x)


def table_text(rows: Sequence[Mapping], columns: Sequence[str] | None = None,
               header: Mapping | None = None) -> str:
    """CSV with an optional ``# key: value`` header block; floats printed round-trip exact."""
    rows = list(rows)
    columns = list(columns) if columns is not None else (list(rows[0]) if rows else [])
    buf = io.StringIO()
    for k, v in (header or {}).items():
        buf.write(f"# {k}: {json.dumps(v, sort_keys=True, default=str)}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(r.get(c)) for c in columns])
    return buf.getvalue()


def read_table(path_or_text) -> tuple[dict, list[dict]]:
    """Inverse of ``table_text``: header block and rows (values as strings)."""
    text = Path(path_or_text).read_text() if not (isinstance(path_or_text, str) and "\n" in path_or_text) \
        else path_or_text
    header, body = {}, []
    for line in text.splitlines():
        if line.startswith("# ") and not body:
            k, _, v = line[2:].partition(": ")
            header[k] = json.loads(v)
        else:
            body.append(line)
    return header, list(csv.DictReader(body))


def correlation_table(rep: CorrelationReport) -> str:
    return table_text(rep.rows(), ["series_a", "series_b", "pearson_r", "p_value", "n"],
                      {"method": rep.method, "test": "two-sided t, n-2 df",
                       "variables": sorted({v for pair in rep.pairs for v in pair})})


def correlation_matrix_rows(rep: CorrelationReport) -> list[dict]:
    names = sorted({v for pair in rep.pairs for v in pair})
    lookup = {}
    for (a, b), e in rep.pairs.items():
        lookup[(a, b)] = lookup[(b, a)] = e.r
    return [{"variable": a, **{b: (1.0 if a == b else lookup.get((a, b), float("nan"))) for b in names}}
            for a in names]


def composite_long_rows(c: Composite, name: str = "composite") -> Iterable[dict]:
    """Long-format rows that re-parse with ``load_panel``."""
    for i, u in enumerate(c.units):
        for j, y in enumerate(c.years):
            yield {"unit": u, "year": y, "variable": name, "value": float(c.values[i, j])}


def composite_table(c: Composite, name: str = "composite") -> str:
    return table_text(list(composite_long_rows(c, name)), ["unit", "year", "variable", "value"],
                      {"method": f"first principal component ({c.method} matrix)",
                       "variables": list(c.loadings), "loadings": c.loadings,
                       "explained_share": c.explained_share, "n": int(c.values.size)})


@dataclass
class Document:
    """One result: a delimited table plus a structured metadata sidecar."""

    name: str
    rows: list[dict]
    columns: list[str] | None = None
    metadata: dict = field(default_factory=dict)

    def write(self, out_dir: Path) -> list[Path]:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        csv_path = out_dir / f"{self.name}.csv"
        meta_path = out_dir / f"{self.name}.json"
        csv_path.write_text(table_text(self.rows, self.columns))
        meta_path.write_text(json.dumps(_jsonable(self.metadata), indent=2, sort_keys=True) + "\n")
        return [csv_path, meta_path]


def _jsonable(x):
    if isinstance(x, Mapping):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return [_jsonable(v) for v in x.tolist()]
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else _fmt(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x
