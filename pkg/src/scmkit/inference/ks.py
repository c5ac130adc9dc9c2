"""Two-sample Kolmogorov-Smirnov test with an exact small-sample path."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy import stats

from ..errors import SeriesTooShort

EXACT_BUDGET = 10_000


@dataclass(frozen=True)
class KsResult:
    statistic: float
    p_value: float
    n: int
    m: int
    method: str

    def __iter__(self):
        return iter((self.statistic, self.p_value))


def ks_two_sample(a, b, exact_budget: int = EXACT_BUDGET) -> KsResult:
    """Two-sided KS test; exact permutation p-value when ``n*m`` fits the budget.

    The exact path counts monotone lattice paths (scipy's implementation);
    beyond the budget the asymptotic Kolmogorov distribution is used.
    """
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    if a.size == 0 or b.size == 0:
        raise SeriesTooShort("both samples must be non-empty", operation="ks_two_sample")
    method = "exact" if a.size * b.size <= exact_budget else "asymp"
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        res = stats.ks_2samp(a, b, alternative="two-sided", method=method)
    if any("Switching to method=asymp" in str(w.message) for w in caught):
        method = "asymp"  # scipy's exact path gave up (heavy ties)
    return KsResult(float(res.statistic), float(min(1.0, res.pvalue)), a.size, b.size, method)
