"""Counterfactual estimation for a single treated unit in a balanced panel."""

__version__ = "0.1.0"

from .errors import ScmKitError, ScmKitWarning
from .panel import PanelDataset, TreatmentSpec, load_panel, restrict_donors

__all__ = ["__version__", "ScmKitError", "ScmKitWarning", "PanelDataset", "TreatmentSpec", "load_panel",
           "restrict_donors"]
