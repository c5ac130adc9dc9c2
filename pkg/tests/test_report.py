import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from scmkit.errors import InsufficientOverlap, ZeroVariance
from scmkit.panel import PanelDataset, load_panel
from scmkit.report import (Document, composite_table, correlation_matrix_rows, correlation_table,
                           cross_index_correlation, pearson, principal_composite, read_table, table_text)


def panel(**series):
    n = len(next(iter(series.values())))
    units = ("a", "b")
    years = tuple(range(2000, 2000 + n // 2))
    data = {k: np.asarray(v, dtype=float).reshape(2, -1) for k, v in series.items()}
    return PanelDataset(units, years, data)


finite = st.floats(-1e3, 1e3, allow_nan=False)


def test_pearson_self_and_negation():
    x = np.array([1.0, 3.0, 2.0, 5.0, 4.0, 7.0])
    e = pearson(x, x)
    assert (e.r, e.p_value, e.n) == (1.0, 0.0, 6)
    assert pearson(x, -x).r == -1.0


def test_pearson_matches_scipy():
    r = np.random.default_rng(0)
    a, b = r.normal(size=30), r.normal(size=30)
    b = b + 0.4 * a
    e = pearson(a, b)
    ref = stats.pearsonr(a, b)
    assert e.r == pytest.approx(ref[0], rel=1e-12)
    assert e.p_value == pytest.approx(ref[1], rel=1e-9)


def test_pearson_overlap_rules():
    with pytest.raises(InsufficientOverlap):
        pearson([1.0, 2.0, np.nan], [1.0, 2.0, 3.0])
    with pytest.raises(InsufficientOverlap):
        pearson([1.0, 1.0, 1.0, 1.0], [1.0, 2.0, 3.0, 4.0])
    assert pearson([1, 2, np.nan, 4, 3], [2, 4, 5, 7, 7]).n == 4


@settings(max_examples=50)
@given(st.lists(st.tuples(finite, finite), min_size=4, max_size=20), st.floats(0.1, 10), finite)
def test_pearson_affine_invariance(pairs, scale, shift):
    a = np.array([p[0] for p in pairs])
    b = np.array([p[1] for p in pairs])
    if a.std() < 1e-3 or b.std() < 1e-3:
        return
    r = pearson(a, b).r
    assert pearson(scale * a + shift, b).r == pytest.approx(r, abs=1e-9)
    assert pearson(a, -b).r == pytest.approx(-r, abs=1e-12)


def test_cross_index_correlation_pairs():
    p = panel(x=[1, 2, 3, 4, 5, 6], y=[2, 1, 4, 3, 6, 5], z=[6, 5, 4, 3, 2, 1])
    rep = cross_index_correlation(p)
    assert set(rep.pairs) == {("x", "y"), ("x", "z"), ("y", "z")}
    assert rep.pairs[("x", "z")].r == pytest.approx(-1.0)
    rows = correlation_matrix_rows(rep)
    assert [r["variable"] for r in rows] == ["x", "y", "z"]
    assert rows[0]["x"] == 1.0 and rows[0]["z"] == pytest.approx(-1.0)
    header, body = read_table(correlation_table(rep))
    assert header["variables"] == ["x", "y", "z"] and len(body) == 3


def test_composite_identical_inputs():
    v = np.array([1.0, 4.0, 2.0, 8.0, 5.0, 7.0])
    c = principal_composite(panel(a=v, b=v, c=v), ["a", "b", "c"])
    z = (v - v.mean()) / v.std(ddof=1)
    assert np.allclose(c.values.ravel(), np.sqrt(3) * z)
    assert c.explained_share == pytest.approx(1.0)
    assert np.allclose(list(c.loadings.values()), 1 / np.sqrt(3))


def test_composite_anticorrelated_inputs():
    v = np.array([1.0, 4.0, 2.0, 8.0, 5.0, 7.0])
    c = principal_composite(panel(a=v, b=-v), ["a", "b"])
    assert c.explained_share == pytest.approx(1.0)
    # equal-weight mean is constant here, so the first loading is made positive
    assert c.loadings["a"] > 0 > c.loadings["b"]
    assert np.corrcoef(c.values.ravel(), v)[0, 1] == pytest.approx(1.0)


def test_composite_sign_follows_mean():
    r = np.random.default_rng(1)
    base = r.normal(size=40)
    X = {f"v{i}": base + 0.3 * r.normal(size=40) for i in range(4)}
    c = principal_composite(panel(**X), list(X))
    Z = np.column_stack([(x - x.mean()) / x.std(ddof=1) for x in X.values()])
    assert np.corrcoef(c.values.ravel(), Z.mean(axis=1))[0, 1] > 0.9
    assert 0 < c.explained_share <= 1


@settings(max_examples=20, deadline=None)
@given(st.permutations(["v0", "v1", "v2", "v3"]), st.integers(0, 2 ** 32 - 1))
def test_composite_permutation_invariant(order, seed):
    r = np.random.default_rng(seed)
    base = r.normal(size=20)
    X = {f"v{i}": base * (i + 1) + r.normal(size=20) for i in range(4)}
    p = panel(**X)
    a = principal_composite(p, ["v0", "v1", "v2", "v3"])
    b = principal_composite(p, list(order))
    assert np.allclose(a.values, b.values, atol=1e-9)
    assert a.explained_share == pytest.approx(b.explained_share)
    assert all(a.loadings[k] == pytest.approx(b.loadings[k], abs=1e-9) for k in a.loadings)


def test_composite_errors_and_covariance_flag():
    v = np.arange(6.0)
    with pytest.raises(ZeroVariance):
        principal_composite(panel(a=v, b=np.ones(6)), ["a", "b"])
    with pytest.raises(ValueError):
        principal_composite(panel(a=v, b=v), ["a"])
    with pytest.raises(InsufficientOverlap):
        principal_composite(panel(a=v, b=[0, 1, np.nan, 3, 4, 5]), ["a", "b"])
    c = principal_composite(panel(a=v, b=2 * v + 1), ["a", "b"], method="covariance")
    assert c.loadings["b"] == pytest.approx(2 * c.loadings["a"])


def test_composite_table_reparses(tmp_path):
    r = np.random.default_rng(2)
    c = principal_composite(panel(a=r.normal(size=8), b=r.normal(size=8)), ["a", "b"])
    text = composite_table(c)
    header, _ = read_table(text)
    assert header["variables"] == ["a", "b"] and header["n"] == 8
    path = tmp_path / "c.csv"
    path.write_text("\n".join(line for line in text.splitlines() if not line.startswith("#")) + "\n")
    back = load_panel(path)
    assert np.array_equal(back.matrix("composite"), c.values)


def test_table_round_trip_and_document(tmp_path):
    rows = [{"x": 0.1, "y": float("inf"), "flag": True, "name": "a,b"}, {"x": 1 / 3, "y": None}]
    header, back = read_table(table_text(rows, ["x", "y", "flag", "name"], {"k": [1, 2]}))
    assert header == {"k": [1, 2]}
    assert float(back[1]["x"]) == 1 / 3 and back[0]["y"] == "inf" and back[0]["name"] == "a,b"
    assert back[0]["flag"] == "true" and back[1]["y"] == ""
    paths = Document("d", rows, metadata={"v": np.float64(np.nan), "a": np.arange(2)}).write(tmp_path)
    assert [p.name for p in paths] == ["d.csv", "d.json"]
    assert '"v": "nan"' in paths[1].read_text()
