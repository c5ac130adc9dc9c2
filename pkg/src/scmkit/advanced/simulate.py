"""Latent factor panel simulator: ``y = phi_t + Z'theta_t + lambda_t mu_j + eps``."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from ..errors import DimensionMismatch
from ..inference import rng
from ..panel import PanelDataset, TreatmentSpec


@dataclass(frozen=True, eq=False)
class FactorModelSpec:
    common_shocks: np.ndarray  # (T,)
    factors: np.ndarray  # (T, F)
    loadings: np.ndarray  # (N, F)
    noise_sd: float = 0.0
    treatment_effect: np.ndarray | float = 0.0  # scalar or (T_post,)
    covariates: Mapping[str, np.ndarray] = field(default_factory=dict)  # name -> (N, T)
    covariate_coefficients: Mapping[str, np.ndarray | float] = field(default_factory=dict)

    def __post_init__(self):
        f = np.asarray(self.factors, dtype=float).reshape(len(self.common_shocks), -1)
        m = np.asarray(self.loadings, dtype=float).reshape(-1, f.shape[1]) if f.shape[1] else \
            np.zeros((np.asarray(self.loadings).shape[0], 0))
        object.__setattr__(self, "factors", f)
        object.__setattr__(self, "loadings", m)
        object.__setattr__(self, "common_shocks", np.asarray(self.common_shocks, dtype=float))
        if self.noise_sd < 0:
            raise ValueError("noise_sd must be >= 0")
        if set(self.covariate_coefficients) - set(self.covariates):
            raise DimensionMismatch("coefficients given for unknown covariates", operation="FactorModelSpec")

    @property
    def n_factors(self) -> int:
        return self.factors.shape[1]

    @classmethod
    def random(cls, n_units: int, n_years: int, n_factors: int = 2, noise_sd: float = 0.5,
               effect: float = -1.0, seed: int = 0, trend: float = 0.05) -> "FactorModelSpec":
        """Gaussian factors and loadings with a linear common trend."""
        z = rng.normals(rng.derive_seed(seed, 1), np.arange(2, dtype=np.uint64), max(n_years, n_units) * max(n_factors, 1))
        lam = z[0, : n_years * n_factors].reshape(n_years, n_factors)
        mu = z[1, : n_units * n_factors].reshape(n_units, n_factors)
        phi = trend * np.arange(n_years, dtype=float)
        return cls(phi, lam, mu, noise_sd, effect)


@dataclass(eq=False)
class SimulatedPanel:
    panel: PanelDataset
    treatment: TreatmentSpec
    true_effect: dict[int, float]
    spec: FactorModelSpec

    @property
    def true_att(self) -> float:
        return float(np.mean(list(self.true_effect.values()))) if self.true_effect else 0.0


def simulate_factor_panel(spec: FactorModelSpec, n_units: int, n_years: int, seed: int = 0,
                          treatment_index: int | None = None, start_year: int = 1960,
                          outcome: str = "y") -> SimulatedPanel:
    """Draw one panel; unit ``u00`` is treated from ``treatment_index`` (default 3/4 of the span)."""
    if n_units < 1 or n_years < 1:
        raise DimensionMismatch("dims must be positive", operation="simulate_factor_panel")
    if spec.common_shocks.shape != (n_years,) or spec.factors.shape[0] != n_years \
            or spec.loadings.shape[0] != n_units:
        raise DimensionMismatch(f"spec does not match {n_units} units x {n_years} years",
                                operation="simulate_factor_panel")
    y = np.tile(spec.common_shocks, (n_units, 1)) + spec.loadings @ spec.factors.T
    for name, z in spec.covariates.items():
        z = np.asarray(z, dtype=float)
        if z.shape != (n_units, n_years):
            raise DimensionMismatch(f"covariate {name!r} has shape {z.shape}", operation="simulate_factor_panel")
        theta = np.broadcast_to(np.asarray(spec.covariate_coefficients.get(name, 0.0), dtype=float), (n_years,))
        y = y + z * theta
    if spec.noise_sd > 0:
        eps = rng.normals(seed, np.arange(n_units, dtype=np.uint64), n_years)
        y = y + spec.noise_sd * eps
    k0 = int(treatment_index if treatment_index is not None else (3 * n_years) // 4)
    if not 0 < k0 < n_years:
        raise DimensionMismatch("treatment index must leave pre and post years", operation="simulate_factor_panel")
    effect = np.broadcast_to(np.asarray(spec.treatment_effect, dtype=float), (n_years - k0,))
    y[0, k0:] += effect
    width = max(2, len(str(n_units - 1)))
    units = tuple(f"u{i:0{width}d}" for i in range(n_units))
    years = tuple(range(start_year, start_year + n_years))
    data = {outcome: y, **{k: np.asarray(v, dtype=float) for k, v in spec.covariates.items()}}
    roles = {outcome: "outcome", **{k: "covariate" for k in spec.covariates}}
    panel = PanelDataset(units, years, data, roles)
    t = TreatmentSpec(units[0], years[k0], units[1:])
    return SimulatedPanel(panel, t, dict(zip(years[k0:], map(float, effect))), spec)
