"""Exception and warning hierarchy.

Every error carries the module and operation that raised it so the CLI can
print ``module.operation: cause`` without parsing messages.
"""

from __future__ import annotations


class ScmKitError(Exception):
    module = "scmkit"
    operation = ""

    def __init__(self, message: str, *, operation: str | None = None):
        super().__init__(message)
        if operation is not None:
            self.operation = operation

    def describe(self) -> str:
        where = f"{self.module}.{self.operation}" if self.operation else self.module
        return f"{where}: {type(self).__name__}: {self}"


class ScmKitWarning(UserWarning):
    pass


# --- panel -----------------------------------------------------------------


class PanelError(ScmKitError):
    module = "panel"


class ParseError(PanelError):
    operation = "load_panel"

    def __init__(self, message: str, row: int | None = None):
        super().__init__(message if row is None else f"row {row}: {message}")
        self.row = row


class DuplicateCell(PanelError):
    operation = "load_panel"

    def __init__(self, cells):
        self.cells = list(cells)
        shown = ", ".join(map(str, self.cells[:5]))
        super().__init__(f"{len(self.cells)} duplicated cell(s): {shown}")


class UnbalancedPanel(PanelError):
    operation = "load_panel"

    def __init__(self, missing):
        self.missing = list(missing)
        shown = ", ".join(map(str, self.missing[:5]))
        more = "" if len(self.missing) <= 5 else f" (+{len(self.missing) - 5} more)"
        super().__init__(f"{len(self.missing)} missing cell(s): {shown}{more}")


class UnknownUnit(PanelError):
    operation = "restrict_donors"


class UnknownVariable(PanelError):
    pass


class TreatedInPool(PanelError):
    operation = "restrict_donors"


class EmptyDonorPool(PanelError):
    operation = "restrict_donors"


class InvalidTreatment(PanelError):
    operation = "TreatmentSpec"


class EmptyPredictorSet(PanelError):
    operation = "design_matrices"


class PeriodOutOfRange(PanelError):
    operation = "design_matrices"


# --- solvers ---------------------------------------------------------------


class SolverError(ScmKitError):
    module = "solvers"


class DimensionMismatch(SolverError):
    pass


class NonConvergence(SolverError):
    pass


class NonFiniteInput(SolverError):
    pass


class EmptyRowOrColumn(SolverError):
    operation = "soft_impute"


class RankDeficient(SolverError):
    operation = "ols_fit"

    def __init__(self, columns):
        self.columns = list(columns)
        super().__init__(f"design matrix is rank deficient; collinear column(s): {self.columns}")


class SingletonClusterWarning(ScmKitWarning):
    pass


class NonPsdCovarianceWarning(ScmKitWarning):
    pass


class NonConvergenceWarning(ScmKitWarning):
    pass


# --- scm -------------------------------------------------------------------


class ScmError(ScmKitError):
    module = "scm"


class InsufficientPrePeriod(ScmError):
    pass


class InsufficientVariation(ScmError):
    operation = "fit_synthetic_control"


class MissingDonorSeries(ScmError):
    operation = "counterfactual_path"


class DegenerateProjection(ScmKitWarning):
    """All projection coefficients vanished; uniform predictor weights used."""


# --- did -------------------------------------------------------------------


class DidError(ScmKitError):
    module = "did"


class LagUnavailable(DidError):
    operation = "fit_dynamic_did"


# --- inference -------------------------------------------------------------


class InferenceError(ScmKitError):
    module = "inference"


class EmptyPeriod(InferenceError):
    operation = "rmse_ratio"


class SeriesTooShort(InferenceError):
    pass


# --- advanced --------------------------------------------------------------


class AdvancedError(ScmKitError):
    module = "advanced"


class FactorRangeInvalid(AdvancedError):
    operation = "fit_gsynth"


# --- report ----------------------------------------------------------------


class ReportError(ScmKitError):
    module = "report"


class InsufficientOverlap(ReportError):
    operation = "cross_index_correlation"


class ZeroVariance(ReportError):
    operation = "principal_composite"


# --- cli -------------------------------------------------------------------


class ConfigError(ScmKitError):
    module = "cli"
    operation = "run"
