"""Run configuration: YAML file -> nested dataclasses, with flag/env overrides."""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml

from .errors import ConfigError
from .inference.rng import check_seed


@dataclass
class ScmSection:
    validation_start: int | None = None
    v_method: str = "cv"
    normalize_predictors: bool | None = None


@dataclass
class DidSection:
    cluster: str = "twoway"
    window: list[int] | None = None
    regions: dict[str, str] | None = None


@dataclass
class PlaceboSection:
    n_samples: int = 10_000
    placebo_years: list[int] | None = None  # None: Zivot-Andrews break year
    za_mode: str = "intercept"
    trim: float = 0.15
    trend_break_year: int | None = None  # None: treatment year


@dataclass
class LooSection:
    max_replications: int | None = None


@dataclass
class GsynthSection:
    factor_range: list[int] = field(default_factory=lambda: [0, 1, 2, 3])
    n_boot: int = 500


@dataclass
class McSection:
    lambdas: list[float] = field(default_factory=lambda: [0.005, 0.05])
    n_boot: int = 500


@dataclass
class LassoSection:
    lambda_grid: list[float] | None = None


@dataclass
class SdidSection:
    regularization: float | None = None


@dataclass
class SimulateSection:
    n_units: int = 18
    n_years: int = 62
    n_factors: int = 2
    noise_sd: float = 0.5
    effect: float = -1.0
    treatment_index: int | None = None
    n_reps: int = 0
    n_boot: int = 200


@dataclass
class CorrelateSection:
    pairs: list[list[str]] | None = None
    composite: list[str] | None = None
    pca_method: str = "correlation"


@dataclass
class ReportSection:
    battery: list[str] = field(default_factory=lambda: list(BATTERY))


BATTERY = ("scm", "did", "event-study", "placebo-space", "placebo-param", "placebo-time",
           "trend-test", "loo", "gsynth", "mc", "lasso-scm", "sdid")


@dataclass
class RunConfig:
    panel_path: str | None = None
    schema: dict[str, str] = field(default_factory=dict)
    treated_unit: str | None = None
    treatment_year: int | None = None
    donors: Any = "all"  # "all", a preset name, or a list of units
    preset_dir: str | None = None
    outcomes: list[str] = field(default_factory=list)
    covariates: list[str] = field(default_factory=list)
    seed: int = 0
    threads: int = 1
    out: str = "results"
    scm: ScmSection = field(default_factory=ScmSection)
    did: DidSection = field(default_factory=DidSection)
    placebo: PlaceboSection = field(default_factory=PlaceboSection)
    loo: LooSection = field(default_factory=LooSection)
    gsynth: GsynthSection = field(default_factory=GsynthSection)
    mc: McSection = field(default_factory=McSection)
    lasso: LassoSection = field(default_factory=LassoSection)
    sdid: SdidSection = field(default_factory=SdidSection)
    simulate: SimulateSection = field(default_factory=SimulateSection)
    correlate: CorrelateSection = field(default_factory=CorrelateSection)
    report: ReportSection = field(default_factory=ReportSection)
    base_dir: str = field(default=".", repr=False)

    def __post_init__(self):
        try:
            self.seed = check_seed(self.seed)
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from None
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")

    def resolve(self, path: str | None) -> Path | None:
        if path is None:
            return None
        p = Path(path)
        return p if p.is_absolute() else Path(self.base_dir) / p

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d.pop("base_dir")
        return d

    def hash(self) -> str:
        """SHA-256 of the canonical JSON form, ignoring the output directory and thread count."""
        d = self.to_dict()
        d.pop("out")
        d.pop("threads")
        return hashlib.sha256(json.dumps(d, sort_keys=True, default=str).encode()).hexdigest()


def _build(cls, data: dict, where: str):
    if data is None:
        return cls()
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: expected a mapping")
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - names)
    if unknown:
        raise ConfigError(f"{where}: unknown key(s) {unknown}")
    return cls(**data)


def config_from_dict(data: dict | None, base_dir: str = ".") -> RunConfig:
    data = dict(data or {})
    sections = {"scm": ScmSection, "did": DidSection, "placebo": PlaceboSection, "loo": LooSection,
                "gsynth": GsynthSection, "mc": McSection, "lasso": LassoSection, "sdid": SdidSection,
                "simulate": SimulateSection, "correlate": CorrelateSection, "report": ReportSection}
    kwargs = {}
    top = {f.name for f in dataclasses.fields(RunConfig)} - set(sections) - {"base_dir"}
    unknown = sorted(set(data) - top - set(sections))
    if unknown:
        raise ConfigError(f"unknown config key(s) {unknown}")
    for k, v in data.items():
        kwargs[k] = _build(sections[k], v, k) if k in sections else v
    for key in ("outcomes", "covariates"):
        if isinstance(kwargs.get(key), str):
            kwargs[key] = [kwargs[key]]
    try:
        return RunConfig(**kwargs, base_dir=base_dir)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def load_config(path: str | Path | None) -> RunConfig:
    if path is None:
        return RunConfig()
    path = Path(path)
    try:
        data = yaml.safe_load(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"config {path} is not valid YAML: {exc}") from None
    return config_from_dict(data, base_dir=str(path.parent))
