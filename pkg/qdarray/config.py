"""Pipeline Configuration

JSON configuration of a characterization campaign: the samples to
synthesize (one per oxide condition), sweep resolutions, extraction
thresholds, statistics options and an optional electron-temperature study.
"""

import json
import logging
import re
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from qdarray.device import default_disorder
from qdarray.exceptions import ConfigurationError
from qdarray.extraction.barrier_map import BarrierMapSettings
from qdarray.extraction.diamond import DiamondFitSettings
from qdarray.extraction.spurious import SpuriousSettings
from qdarray.instrument import DEFAULT_NOISE_FRACTION, DEFAULT_T0
from qdarray.models import ArrayGeometry, DisorderConfig, OxideStack
from qdarray.statistics.temperature import DEFAULT_SEPARATION
from qdarray.transport import DEFAULT_SOFTNESS

logger = logging.getLogger(__name__)

LABEL_PATTERN = re.compile(r"^[A-Za-z0-9_-]+$")


# Enums
class SigmaMethod(str, Enum):
    SLOPE = "slope"
    TRUNCATED = "truncated"


class OutputFormat(str, Enum):
    TABLE = "table"
    VECTOR_PLOT = "vector-plot"


# Samples
class SampleSpec(BaseModel):
    """One sample of the campaign (one oxide condition)."""
    model_config = ConfigDict(frozen=True, extra="forbid")

    label: str
    t1: float
    delta2: float = 4.5
    delta3: float = 0.8
    geometry: ArrayGeometry = Field(default_factory=ArrayGeometry)
    dead_columns: List[int] = Field(default_factory=list)
    disorder: Dict[str, Any] = Field(default_factory=dict)  # overrides of the campaign disorder
    disorder_replica: Optional[int] = Field(default=None, ge=0)  # shared threshold field across samples

    @field_validator("label")
    @classmethod
    def filename_safe(cls, v: str) -> str:
        if not LABEL_PATTERN.match(v):
            raise ValueError("label may only contain letters, digits, '-' and '_'")
        return v

    @model_validator(mode="after")
    def dead_columns_in_array(self) -> "SampleSpec":
        bad = [c for c in self.dead_columns if not 1 <= c <= self.geometry.n]
        if bad:
            raise ValueError(f"dead columns {bad} outside 1..{self.geometry.n}")
        return self

    @property
    def stack(self) -> OxideStack:
        return OxideStack(t1=self.t1, delta2=self.delta2, delta3=self.delta3)

    def disorder_config(self, base: DisorderConfig) -> DisorderConfig:
        if not self.disorder:
            return base
        unknown = sorted(set(self.disorder) - set(DisorderConfig.model_fields))
        if unknown:
            raise ConfigurationError(f"sample {self.label}: unknown disorder keys {unknown}")
        try:
            return DisorderConfig(**{**base.model_dump(), **self.disorder})
        except ValidationError as exc:
            raise ConfigurationError(f"sample {self.label}: {_format_validation(exc)}") from exc


# Sweeps
class TurnOnSweep(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    plunger_range: Tuple[float, float] = (0.0, 1.6)
    barrier_range: Tuple[float, float] = (0.0, 2.0)
    points: int = 401
    v_sd: float = 1e-3


class BarrierMapSweep(BaseModel):
    """Barrier window relative to the row-median barrier threshold."""
    model_config = ConfigDict(frozen=True, extra="forbid")

    plunger_offset: float = 0.15
    barrier_window: Tuple[float, float] = (-0.25, 0.5)
    points: int = 201
    v_sd: float = 0.5e-3
    local_maps: bool = True


class DiamondSweep(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    plunger_offset: float = 0.2
    plunger_span: float = 0.12
    plunger_points: int = 101
    v_sd_max: float = 10e-3
    v_sd_points: int = 101
    reference_v_sd: float = 0.5e-3

    @field_validator("v_sd_points")
    @classmethod
    def odd_points(cls, v: int) -> int:
        if v % 2 == 0:
            raise ValueError("v_sd_points must be odd so the scan contains zero bias")
        return v


class SweepSettings(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    turn_on: TurnOnSweep = Field(default_factory=TurnOnSweep)
    barrier_map: BarrierMapSweep = Field(default_factory=BarrierMapSweep)
    diamond: DiamondSweep = Field(default_factory=DiamondSweep)
    noise_fraction: float = DEFAULT_NOISE_FRACTION
    t0: float = DEFAULT_T0
    fridge_temperature: float = 0.01
    softness: float = DEFAULT_SOFTNESS
    accumulation_bias: float = 2.5
    confinement_bias: float = -0.5


class ExtractionSettings(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    barrier_map: BarrierMapSettings = Field(default_factory=BarrierMapSettings)
    diamond: DiamondFitSettings = Field(default_factory=DiamondFitSettings)
    spurious: SpuriousSettings = Field(default_factory=SpuriousSettings)


class StatisticsSettings(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    central_filter: bool = True
    sigma_method: SigmaMethod = SigmaMethod.SLOPE
    eta: float = 0.5
    delta_e_mev: float = 0.7
    regime_separation: float = DEFAULT_SEPARATION

    @field_validator("delta_e_mev", "regime_separation")
    @classmethod
    def positive(cls, v: float) -> float:
        if v <= 0:
            raise ValueError("must be positive")
        return v

    @field_validator("eta")
    @classmethod
    def non_negative(cls, v: float) -> float:
        if v < 0:
            raise ValueError("eta must be non-negative")
        return v


class TemperatureStudy(BaseModel):
    """Coulomb-peak traces of one dot at several fridge temperatures."""
    model_config = ConfigDict(frozen=True, extra="forbid")

    sample: str
    row: int
    col: int
    fridge_temperatures: List[float] = Field(default_factory=lambda: [0.2, 0.5, 1.0, 2.0, 3.0])
    v_sd: float = 40e-6
    half_window: float = 10e-3
    points: int = 201

    @field_validator("fridge_temperatures")
    @classmethod
    def enough_temperatures(cls, v: List[float]) -> List[float]:
        if len(v) < 3 or any(t < 0 for t in v):
            raise ValueError("need at least three non-negative fridge temperatures")
        return v


class PipelineConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    master_seed: int
    output_dir: str = "out"
    samples: List[SampleSpec] = Field(min_length=1)
    disorder: DisorderConfig = Field(default_factory=default_disorder)
    sweeps: SweepSettings = Field(default_factory=SweepSettings)
    extraction: ExtractionSettings = Field(default_factory=ExtractionSettings)
    statistics: StatisticsSettings = Field(default_factory=StatisticsSettings)
    temperature_study: Optional[TemperatureStudy] = None

    @field_validator("master_seed")
    @classmethod
    def u64(cls, v: int) -> int:
        if not 0 <= v < 2 ** 64:
            raise ValueError("master_seed must be an unsigned 64-bit integer")
        return v

    @model_validator(mode="after")
    def cross_checks(self) -> "PipelineConfig":
        labels = [s.label for s in self.samples]
        if len(set(labels)) != len(labels):
            raise ValueError("sample labels must be unique")
        study = self.temperature_study
        if study is not None:
            if study.sample not in labels:
                raise ValueError(f"temperature study names unknown sample {study.sample!r}")
            n = self.sample(study.sample).geometry.n
            if not (1 <= study.row <= n and 1 <= study.col <= n):
                raise ValueError("temperature study dot outside the array")
        return self

    def sample(self, label: str) -> SampleSpec:
        for spec in self.samples:
            if spec.label == label:
                return spec
        raise ConfigurationError(f"unknown sample {label!r}")

    @property
    def output_path(self) -> Path:
        return Path(self.output_dir)


def _format_validation(exc: ValidationError) -> str:
    problems = []
    for err in exc.errors():
        where = ".".join(str(part) for part in err["loc"]) or "<root>"
        problems.append(f"{where}: {err['msg']}")
    return "; ".join(problems)


def parse_config(text: str, source: str = "<config>", overrides: Optional[Dict[str, Any]] = None) -> PipelineConfig:
    """Parse a JSON configuration document.

    Args:
        text: JSON text
        source: Name used in error messages
        overrides: Top-level keys replacing those of the document

    Raises:
        ConfigurationError: With line and column for JSON syntax errors, or
            the offending key paths for schema errors
    """
    try:
        document = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"{source}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    if not isinstance(document, dict):
        raise ConfigurationError(f"{source}: configuration must be a JSON object")
    document.update({k: v for k, v in (overrides or {}).items() if v is not None})
    try:
        return PipelineConfig.model_validate(document)
    except ValidationError as exc:
        raise ConfigurationError(f"{source}: {_format_validation(exc)}") from exc


def load_config(path: Union[str, Path], overrides: Optional[Dict[str, Any]] = None) -> PipelineConfig:
    """Read and validate a configuration file."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigurationError(f"cannot read configuration {path}: {exc}") from exc
    config = parse_config(text, str(path), overrides)
    logger.debug("loaded %s: %d samples, seed %d", path, len(config.samples), config.master_seed)
    return config
