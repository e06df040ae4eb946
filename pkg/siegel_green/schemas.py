"""
Pydantic models for the run configuration and JSON reports.

Defines:
- RunConfig and its sections (operator, disorder, engine, experiment, dos,
  green, blockdemo, output)
- load_config: YAML file + --set overrides -> validated RunConfig
- Report models emitted as JSON by the CLI
"""

from enum import Enum
from pathlib import Path
from typing import Any, Optional, Union

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .blockdecomp import BlockOperator, ContourShape, ContourSpec
from .disorder_mc import Experiment, Target
from .errors import ConfigError
from .green import EngineConfig, GreenKind
from .model import DisorderKind, DisorderModel, OperatorSpec, PotentialSample, sample_potential, strip_dirichlet

Matrix = list[list[float]]


class Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class OutputFormat(str, Enum):
    CSV = "csv"
    JSON = "json"


class LinearGrid(Section):
    """num points from start to stop inclusive."""

    start: float
    stop: float
    num: int = Field(ge=1)

    def values(self) -> list[float]:
        return [float(v) for v in np.linspace(self.start, self.stop, self.num)]


Grid = Union[list[float], LinearGrid]


def grid_values(grid: Grid) -> list[float]:
    return grid.values() if isinstance(grid, LinearGrid) else [float(v) for v in grid]


# ---------------------------------------------------------------------------
# Sections
# ---------------------------------------------------------------------------


class StripSection(Section):
    L: int = Field(ge=1, description="Side length of the cross-section cube")
    d: int = Field(ge=1, description="Cross-section dimension")


class OperatorSection(Section):
    """Exactly one of D (explicit symmetric matrix) or strip."""

    D: Optional[Matrix] = Field(None, description="Explicit channel matrix D")
    strip: Optional[StripSection] = Field(None, description="Strip Dirichlet Laplacian {L, d}")

    @model_validator(mode="after")
    def _one_source(self):
        if self.D is None and self.strip is None:
            self.D = [[0.0]]
        if self.D is not None and self.strip is not None:
            raise ValueError("give either D or strip, not both")
        return self

    def to_spec(self) -> OperatorSpec:
        if self.strip is not None:
            return strip_dirichlet(self.strip.L, self.strip.d)
        return OperatorSpec.from_matrix(self.D)


class DisorderSection(Section):
    kind: DisorderKind = Field(DisorderKind.RADEMACHER, description="Site distribution")
    c: float = Field(0.0, ge=0, description="Amplitude")
    alpha: float = Field(0.0, ge=0, description="Envelope exponent: c_n = c(1+|n|)^-alpha")
    direction: Optional[Matrix] = Field(None, description="Direction M (normalized to ‖M‖ = 1); identity if unset")
    support_bound: Optional[float] = Field(None, ge=0, description="Support radius K; defaults to c")
    seed: int = Field(0, ge=0, description="64-bit master seed")
    window: tuple[int, int] = Field((-20, 20), description="Sampled site range [n_min, n_max]")

    def to_model(self, m: int) -> DisorderModel:
        return DisorderModel(
            kind=self.kind,
            m=m,
            c=self.c,
            alpha=self.alpha,
            direction=None if self.direction is None else np.asarray(self.direction, dtype=float),
            support_bound=self.support_bound,
        )

    def sample(self, m: int) -> PotentialSample:
        return sample_potential(self.to_model(m), self.seed, self.window)


class EngineSection(Section):
    tol: float = Field(1e-10, gt=0)
    max_depth: int = Field(10**6, ge=0)
    depth_step: int = Field(32, ge=1)

    def to_engine(self) -> EngineConfig:
        return EngineConfig(tol=self.tol, max_depth=self.max_depth, depth_step=self.depth_step)


class ExperimentSection(Section):
    J: tuple[float, float] = Field((-1.0, 1.0), description="Energy interval inside I_D")
    x_grid: Grid = Field(default_factory=lambda: LinearGrid(start=-1.0, stop=1.0, num=5))
    eps_grid: list[float] = Field(default_factory=lambda: [1.0, 0.1, 0.01])
    trials: int = Field(100, ge=0)
    target: Target = Target.FORWARD
    site: int = 0
    C0: Optional[float] = Field(None, gt=0, description="C0 for the product bound; explicit chain if unset")


class DosSection(Section):
    x_grid: Grid = Field(default_factory=lambda: LinearGrid(start=-1.9, stop=1.9, num=39))
    eps_list: list[float] = Field(default_factory=lambda: [1e-6])
    site: int = 0


class GreenSection(Section):
    x: float = 0.0
    eps: float = Field(0.1, gt=0)
    sites: list[int] = Field(default_factory=lambda: [0])
    kinds: list[GreenKind] = Field(default_factory=lambda: [GreenKind.FORWARD, GreenKind.BACKWARD, GreenKind.DIAGONAL])


class ContourSection(Section):
    shape: ContourShape = ContourShape.CIRCLE
    center: float = 0.0
    radius: float = Field(1.0, gt=0)
    re_min: float = -1.0
    re_max: float = 1.0
    half_height: float = Field(1.0, gt=0)
    quad_points: int = Field(256, ge=4)

    def to_contour(self) -> ContourSpec:
        return ContourSpec(**self.model_dump())


class DenisovSection(Section):
    a: float
    b: float
    epsilon: float = Field(gt=0)


class BlockdemoSection(Section):
    H1: Matrix = Field(default_factory=lambda: [[0.0]])
    H2: Matrix = Field(default_factory=lambda: [[3.0]])
    V: Matrix = Field(default_factory=lambda: [[0.3]])
    contour: Optional[ContourSection] = Field(
        default_factory=ContourSection, description="Contour around σ(H1); default circle if null"
    )
    denisov: Optional[DenisovSection] = None

    def to_block(self) -> BlockOperator:
        return BlockOperator(np.asarray(self.H1, float), np.asarray(self.H2, float), np.asarray(self.V, float))


class OutputSection(Section):
    format: OutputFormat = OutputFormat.CSV
    path: Optional[str] = Field(None, description="Output file; stdout if null")


class RunConfig(Section):
    operator: OperatorSection = Field(default_factory=OperatorSection)
    disorder: DisorderSection = Field(default_factory=DisorderSection)
    engine: EngineSection = Field(default_factory=EngineSection)
    experiment: ExperimentSection = Field(default_factory=ExperimentSection)
    dos: DosSection = Field(default_factory=DosSection)
    green: GreenSection = Field(default_factory=GreenSection)
    blockdemo: BlockdemoSection = Field(default_factory=BlockdemoSection)
    output: OutputSection = Field(default_factory=OutputSection)

    def experiment_for(self, spec: OperatorSpec) -> Experiment:
        ex = self.experiment
        return Experiment(
            spec=spec,
            model=self.disorder.to_model(spec.m),
            J=ex.J,
            x_grid=tuple(grid_values(ex.x_grid)),
            eps_grid=tuple(ex.eps_grid),
            trials=ex.trials,
            master_seed=self.disorder.seed,
            window=self.disorder.window,
            cfg=self.engine.to_engine(),
            target=ex.target,
            site=ex.site,
        )


# ---------------------------------------------------------------------------
# Loading
# ---------------------------------------------------------------------------


def _yaml_error(exc: yaml.YAMLError, source: str) -> ConfigError:
    mark = getattr(exc, "problem_mark", None)
    where = f"{source}:{mark.line + 1}:{mark.column + 1}" if mark is not None else source
    problem = getattr(exc, "problem", None) or str(exc)
    return ConfigError(f"{where}: YAML syntax error: {problem}")


def apply_override(data: dict[str, Any], assignment: str) -> None:
    """Apply 'section.key=value' in place; value is parsed as YAML."""
    key, sep, raw = assignment.partition("=")
    if not sep or not key.strip():
        raise ConfigError(f"--set expects section.key=value, got {assignment!r}")
    try:
        value = yaml.safe_load(raw) if raw.strip() else None
    except yaml.YAMLError as exc:
        raise _yaml_error(exc, f"--set {key}") from exc
    parts = key.strip().split(".")
    node = data
    for part in parts[:-1]:
        child = node.get(part)
        if child is None:
            child = node[part] = {}
        if not isinstance(child, dict):
            raise ConfigError(f"--set {key}: '{part}' is not a section")
        node = child
    node[parts[-1]] = value


def _validation_error(exc: ValidationError, source: str) -> ConfigError:
    lines = []
    for err in exc.errors():
        loc = ".".join(str(p) for p in err["loc"]) or "(root)"
        lines.append(f"{source}: {loc}: {err['msg']}")
    return ConfigError("\n".join(lines))


def load_config(path: Optional[Union[str, Path]] = None, overrides: tuple[str, ...] = ()) -> RunConfig:
    """
    Parse and validate a configuration file.

    Raises:
        ConfigError: on unreadable files, YAML syntax errors (with line and
            column), unknown keys or invalid values (with dotted key path)
    """
    data: dict[str, Any] = {}
    source = "<defaults>"
    if path is not None:
        source = str(path)
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        try:
            loaded = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            raise _yaml_error(exc, source) from exc
        if loaded is None:
            loaded = {}
        if not isinstance(loaded, dict):
            raise ConfigError(f"{source}: top level must be a mapping of sections")
        data = loaded
    for assignment in overrides:
        apply_override(data, assignment)
    try:
        return RunConfig.model_validate(data)
    except ValidationError as exc:
        raise _validation_error(exc, source) from exc


def dump_config(config: RunConfig) -> str:
    return yaml.safe_dump(config.model_dump(mode="json"), sort_keys=False, default_flow_style=None)


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------


class BandIntervalModel(BaseModel):
    interval: tuple[float, float]
    count: int = Field(description="m(λ) on the open interval")
    channels: list[int] = Field(description="Eigenchannels of D in band on the interval")


class BandsReportModel(BaseModel):
    I_D: Optional[tuple[float, float]]
    sigma_free: list[tuple[float, float]]
    breakpoints: list[float]
    intervals: list[BandIntervalModel]


class MCPointModel(BaseModel):
    x: float
    eps: float
    mean: Optional[float]
    var: Optional[float]
    max: Optional[float]
    trials: int
    failures: int


class MCReportModel(BaseModel):
    config: dict[str, Any] = Field(description="Full configuration echo")
    results: list[MCPointModel]
    trials_requested: int
    failures: int
    failed_trials: list[int]
    flagged: bool = Field(description="More than 1% of evaluations failed")
    product_bound: float
    exp_bound: float
    c0: float
    sum_second_moments: float


class PropertyStatModel(BaseModel):
    name: str
    samples: int
    passed: int
    worst_margin: float


class VerifyReportModel(BaseModel):
    suite: str
    seed: int
    samples: int
    properties: list[PropertyStatModel]
