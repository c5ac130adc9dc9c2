import numpy as np
import pytest

from scmkit.panel import PanelDataset, TreatmentSpec


def make_panel(series: dict, start: int = 2000, variable: str = "y") -> PanelDataset:
    """Panel from ``unit -> values``; units keep insertion order."""
    units = tuple(series)
    data = np.array([np.asarray(series[u], dtype=float) for u in units])
    return PanelDataset(units, tuple(range(start, start + data.shape[1])), {variable: data})


def spec_for(p: PanelDataset, treated: str, year: int) -> TreatmentSpec:
    return TreatmentSpec(treated, year, tuple(u for u in p.units if u != treated))


def twfe_panel(n_units=20, n_years=40, effect=-2.0, t0_index=30, noise=1.0, seed=0, rho=0.0):
    """Unit + year effects plus AR(rho) noise; unit 0 treated from ``t0_index``."""
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(n_units, 1))
    b = rng.normal(size=(1, n_years))
    e = rng.normal(scale=noise, size=(n_units, n_years))
    if rho:
        for t in range(1, n_years):
            e[:, t] += rho * e[:, t - 1]
    y = a + b + e
    y[0, t0_index:] += effect
    units = tuple(f"u{i:02d}" for i in range(n_units))
    p = PanelDataset(units, tuple(range(1960, 1960 + n_years)), {"y": y})
    return p, TreatmentSpec(units[0], 1960 + t0_index, units[1:])


@pytest.fixture
def toy_convex():
    """Treated pre (1.5, 3, 4.5) = 0.25 B + 0.75 C; two post years."""
    p = make_panel({"T": [1.5, 3.0, 4.5, 9.0, 9.0], "B": [0, 0, 0, 0, 0], "C": [2, 4, 6, 8, 10]})
    return p, spec_for(p, "T", 2003)
