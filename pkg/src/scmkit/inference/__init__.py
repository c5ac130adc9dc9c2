from .breaks import (ZA_CRITICAL_VALUES, BreakTestResult, differential_trend_test, sup_wald_null,
                     zivot_andrews_break)
from .ks import KsResult, ks_two_sample
from .placebo import (ParametricPlaceboResult, PlaceboDistribution, PlaceboEntry, in_space_placebo,
                      in_time_placebo, parametric_placebo_did, placebo_p_fraction, placebo_p_value,
                      placebo_p_value_path, placebo_rank, rmse_ratio)

__all__ = [
    "ZA_CRITICAL_VALUES", "BreakTestResult", "differential_trend_test", "sup_wald_null", "zivot_andrews_break",
    "KsResult", "ks_two_sample", "ParametricPlaceboResult", "PlaceboDistribution", "PlaceboEntry",
    "in_space_placebo", "in_time_placebo", "parametric_placebo_did", "placebo_p_fraction", "placebo_p_value",
    "placebo_p_value_path", "placebo_rank", "rmse_ratio",
]
