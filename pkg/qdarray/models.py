"""Domain Models

Pydantic models for the array geometry, oxide stack, disorder model,
ground-truth sample instances, bias points and measurement records.
All models are immutable once built.
"""

from typing import Any, Dict, List, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from qdarray.constants import ATTO, CONSTANTS

Side = Literal["source", "drain"]

VSD_AXIS = "VSD"


# Array and stack
class OxideStack(BaseModel):
    """Net oxide thicknesses under the three gate layers (nm)."""
    model_config = ConfigDict(frozen=True)

    t1: float
    delta2: float = 4.5
    delta3: float = 0.8

    @field_validator("t1")
    @classmethod
    def t1_positive(cls, v: float) -> float:
        if v <= 0:
            raise ValueError("t1 must be positive")
        return v

    @field_validator("delta2", "delta3")
    @classmethod
    def non_negative(cls, v: float) -> float:
        if v < 0:
            raise ValueError("inter-layer oxide must be non-negative")
        return v

    @property
    def t2(self) -> float:
        return self.t1 + self.delta2

    @property
    def t3(self) -> float:
        return self.t2 + self.delta3


class ArrayGeometry(BaseModel):
    """Square array of n x n dots."""
    model_config = ConfigDict(frozen=True)

    n: int = 7
    pitch: float = 110.0
    dot_width: float = 50.0
    dot_length: float = 70.0

    @field_validator("n")
    @classmethod
    def at_least_one(cls, v: int) -> int:
        if v < 1:
            raise ValueError("array needs at least one row")
        return v

    @field_validator("pitch", "dot_width", "dot_length")
    @classmethod
    def positive_length(cls, v: float) -> float:
        if v <= 0:
            raise ValueError("lengths must be positive")
        return v

    @property
    def dot_area(self) -> float:
        return self.dot_width * self.dot_length


class DisorderConfig(BaseModel):
    """Threshold-voltage disorder and device-parameter spreads.

    The plunger coefficients are calibrated for a minimum of 63 mV at t1 = 15 nm
    (t_gate = t1 + 4.5 nm); the barrier coefficients for 70 mV at t1 = 12 nm
    (t_gate = t1 + 5.3 nm). See ``device.calibrate_disorder``.
    """
    model_config = ConfigDict(frozen=True)

    strain_coeff_a: float = 623.1  # mV nm
    pelgrom_coeff_b: float = 2.429  # mV / nm
    sigma0: float = 0.0  # mV
    strain_coeff_a_barrier: Optional[float] = 537.6
    pelgrom_coeff_b_barrier: Optional[float] = 3.109
    sigma0_barrier: Optional[float] = None
    outlier_prob: float = 0.1
    outlier_scale: float = 4.0
    spurious_rate_coeff: float = 0.8  # nm
    spurious_vt_shift: float = 0.0  # V
    mean_vt_plunger: float = 0.65  # V
    mean_vt_barrier: float = 0.9  # V
    cp_rel_spread: float = 0.03
    alpha_mean: float = 0.165
    alpha_rel_spread: float = 0.26
    gmax: float = 2e-6  # S
    gmax_rel_spread: float = 0.1
    lever_bs: float = 0.05
    lever_bd: float = 0.05
    spurious_charging_energy: float = 4.0  # meV
    spurious_lever_range: Tuple[float, float] = (0.05, 0.2)
    spurious_depth_range: Tuple[float, float] = (0.3, 0.8)

    @field_validator(
        "strain_coeff_a", "pelgrom_coeff_b", "sigma0", "outlier_scale", "spurious_rate_coeff",
        "cp_rel_spread", "alpha_rel_spread", "gmax_rel_spread", "lever_bs", "lever_bd",
    )
    @classmethod
    def non_negative(cls, v: float) -> float:
        if v < 0:
            raise ValueError("disorder coefficients must be non-negative")
        return v

    @field_validator("strain_coeff_a_barrier", "pelgrom_coeff_b_barrier", "sigma0_barrier")
    @classmethod
    def optional_non_negative(cls, v: Optional[float]) -> Optional[float]:
        if v is not None and v < 0:
            raise ValueError("disorder coefficients must be non-negative")
        return v

    @field_validator("outlier_prob")
    @classmethod
    def probability(cls, v: float) -> float:
        if not 0.0 <= v <= 1.0:
            raise ValueError("outlier_prob must lie in [0, 1]")
        return v

    @field_validator("alpha_mean")
    @classmethod
    def lever_arm(cls, v: float) -> float:
        if not 0.0 < v < 1.0:
            raise ValueError("alpha_mean must lie in (0, 1)")
        return v

    @field_validator("gmax", "spurious_charging_energy")
    @classmethod
    def strictly_positive(cls, v: float) -> float:
        if v <= 0:
            raise ValueError("must be positive")
        return v

    @field_validator("spurious_lever_range", "spurious_depth_range")
    @classmethod
    def ordered_range(cls, v: Tuple[float, float]) -> Tuple[float, float]:
        if v[0] > v[1] or v[0] < 0:
            raise ValueError("range must be (low, high) with 0 <= low <= high")
        return v

    @model_validator(mode="after")
    def depth_within_unit(self) -> "DisorderConfig":
        if self.spurious_depth_range[1] > 1.0:
            raise ValueError("spurious depth cannot exceed 1")
        if self.spurious_lever_range[0] <= 0:
            raise ValueError("spurious coupling lever must be positive")
        return self

    def coefficients(self, family: str = "plunger") -> Tuple[float, float, float]:
        """(a, b, sigma0) for a gate family, barriers falling back to plunger values."""
        if family == "barrier":
            return (
                self.strain_coeff_a if self.strain_coeff_a_barrier is None else self.strain_coeff_a_barrier,
                self.pelgrom_coeff_b if self.pelgrom_coeff_b_barrier is None else self.pelgrom_coeff_b_barrier,
                self.sigma0 if self.sigma0_barrier is None else self.sigma0_barrier,
            )
        return self.strain_coeff_a, self.pelgrom_coeff_b, self.sigma0


# Ground truth
class DotGroundTruth(BaseModel):
    """Simulated parameters of one dot (row, col are 1-based)."""
    model_config = ConfigDict(frozen=True)

    row: int
    col: int
    vt_plunger: float  # V
    c_p: float  # aF
    c_sigma: float  # aF
    gmax: float  # S
    lever_bs: float
    lever_bd: float
    vt_bs: float  # V, source-barrier segment threshold
    vt_bd: float  # V, drain-barrier segment threshold
    dead: bool = False

    @model_validator(mode="after")
    def capacitances_consistent(self) -> "DotGroundTruth":
        if not 0 < self.c_p < self.c_sigma:
            raise ValueError("require 0 < c_p < c_sigma")
        if self.gmax <= 0:
            raise ValueError("gmax must be positive")
        return self

    @property
    def alpha(self) -> float:
        return self.c_p / self.c_sigma

    @property
    def charging_energy(self) -> float:
        """E_C = e^2 / C_sigma in meV."""
        return 1e3 * CONSTANTS.e_charge / (self.c_sigma * ATTO)

    @property
    def peak_period(self) -> float:
        """Plunger-voltage spacing of Coulomb peaks, e / C_P in V."""
        return CONSTANTS.e_charge / (self.c_p * ATTO)


class SpuriousDotSpec(BaseModel):
    """Unintended dot under barrier segment (barrier_index, col)."""
    model_config = ConfigDict(frozen=True)

    barrier_index: int
    col: int
    coupling_lever: float
    period: float  # V
    depth: float

    @field_validator("depth")
    @classmethod
    def depth_in_unit(cls, v: float) -> float:
        if not 0.0 <= v <= 1.0:
            raise ValueError("depth must lie in [0, 1]")
        return v

    @field_validator("period")
    @classmethod
    def period_positive(cls, v: float) -> float:
        if v <= 0:
            raise ValueError("period must be positive")
        return v


class SampleInstance(BaseModel):
    """A fully synthesized array."""
    model_config = ConfigDict(frozen=True)

    geometry: ArrayGeometry
    stack: OxideStack
    dots: List[List[DotGroundTruth]]
    barrier_vts: Dict[str, List[float]]  # "B1".."B(n+1)" -> per-column threshold
    spurious: List[SpuriousDotSpec] = Field(default_factory=list)
    seed: int
    label: str = ""

    @model_validator(mode="after")
    def grid_shape(self) -> "SampleInstance":
        n = self.geometry.n
        if len(self.dots) != n or any(len(row) != n for row in self.dots):
            raise ValueError(f"dots grid must be exactly {n}x{n}")
        if sorted(self.barrier_vts) != sorted(f"B{k}" for k in range(1, n + 2)):
            raise ValueError("barrier_vts must list B1..B(n+1)")
        if any(len(v) != n for v in self.barrier_vts.values()):
            raise ValueError("each barrier needs one threshold per column")
        return self

    def dot(self, row: int, col: int) -> DotGroundTruth:
        return self.dots[row - 1][col - 1]

    def barrier_vt(self, k: int, col: int) -> float:
        return self.barrier_vts[f"B{k}"][col - 1]

    def spurious_for_dot(self, row: int, col: int) -> List[Tuple[SpuriousDotSpec, Side]]:
        """Spurious dots seen by a dot: under its source barrier B_row or drain barrier B_row+1."""
        found: List[Tuple[SpuriousDotSpec, Side]] = []
        for spec in self.spurious:
            if spec.col != col:
                continue
            if spec.barrier_index == row:
                found.append((spec, "source"))
            elif spec.barrier_index == row + 1:
                found.append((spec, "drain"))
        return found

    @property
    def dead_columns(self) -> List[int]:
        return sorted({d.col for row in self.dots for d in row if d.dead})


# Bias context
class BiasPoint(BaseModel):
    """Voltages applied to one dot; temperature is the electron temperature."""
    model_config = ConfigDict(frozen=True)

    v_plunger: float
    v_bs: float
    v_bd: float
    v_sd: float
    temperature_T0: float = 1.4

    @field_validator("temperature_T0")
    @classmethod
    def temperature_positive(cls, v: float) -> float:
        if v <= 0:
            raise ValueError("temperature must be positive")
        return v


class PeakShape(BaseModel):
    """Parameters of a thermally broadened Coulomb peak."""
    model_config = ConfigDict(frozen=True)

    gmax: float
    t0: float

    @model_validator(mode="after")
    def positive(self) -> "PeakShape":
        if self.gmax <= 0 or self.t0 <= 0:
            raise ValueError("gmax and t0 must be positive")
        return self


# Measurement
class RoutingPlan(BaseModel):
    """Gate role assignment for measuring one row."""
    model_config = ConfigDict(frozen=True)

    array_size: int
    row_under_test: int
    plunger_gate: str
    source_barrier: str
    drain_barrier: str
    extender_gates: List[str]
    confinement_bias: float = -0.5
    accumulation_bias: float = 2.5

    @model_validator(mode="after")
    def roles_consistent(self) -> "RoutingPlan":
        x = self.row_under_test
        if self.plunger_gate != f"P{x}":
            raise ValueError("plunger index must equal the row index")
        if (self.source_barrier, self.drain_barrier) != (f"B{x}", f"B{x + 1}"):
            raise ValueError("source and drain barriers must be B_x and B_x+1")
        expected = {f"P{i}" for i in range(1, self.array_size + 1)} | {
            f"B{k}" for k in range(1, self.array_size + 2)
        }
        expected -= {self.plunger_gate, self.source_barrier, self.drain_barrier}
        if set(self.extender_gates) != expected:
            raise ValueError("extenders must be every other plunger and barrier gate")
        if self.confinement_bias >= 0 or self.accumulation_bias <= 0:
            raise ValueError("confinement bias must be negative and accumulation bias positive")
        return self

    @property
    def routed_gates(self) -> Tuple[str, str, str]:
        return self.plunger_gate, self.source_barrier, self.drain_barrier


class SweepAxis(BaseModel):
    """Inclusive linear sweep of one gate (or of the source-drain bias ``VSD``)."""
    model_config = ConfigDict(frozen=True)

    gate: str
    start: float
    stop: float
    points: int

    @model_validator(mode="after")
    def valid_axis(self) -> "SweepAxis":
        if self.points < 2:
            raise ValueError("an axis needs at least 2 points")
        if self.start == self.stop:
            raise ValueError("start and stop must differ")
        return self

    def values(self) -> np.ndarray:
        return np.linspace(self.start, self.stop, self.points)


class SweepSpec(BaseModel):
    """One 1D or 2D sweep.

    ``v_sd`` is the applied source-drain bias. When ``VSD`` is itself swept it
    is the reference bias used for the open-channel current and noise scale.
    """
    model_config = ConfigDict(frozen=True)

    axes: List[SweepAxis]
    fixed_biases: Dict[str, float] = Field(default_factory=dict)
    v_sd: float
    channels: List[int]
    shared_groups: List[List[str]] = Field(default_factory=list)
    fridge_temperature: float = 0.01

    @model_validator(mode="after")
    def valid_spec(self) -> "SweepSpec":
        if not 1 <= len(self.axes) <= 2:
            raise ValueError("a sweep has one or two axes")
        gates = [a.gate for a in self.axes]
        if len(set(gates)) != len(gates):
            raise ValueError("axes must sweep distinct gates")
        if not self.channels:
            raise ValueError("at least one channel is required")
        if len(set(self.channels)) != len(self.channels):
            raise ValueError("channels must be distinct")
        if self.fridge_temperature < 0:
            raise ValueError("fridge temperature must be non-negative")
        return self

    @property
    def shape(self) -> Tuple[int, ...]:
        return tuple(a.points for a in self.axes)

    @property
    def n_points(self) -> int:
        return int(np.prod(self.shape))


class RecordMetadata(BaseModel):
    """Per-channel context needed by the analysis code."""
    model_config = ConfigDict(frozen=True)

    reference_currents: Dict[int, float]  # open-channel current at the reference bias, A
    noise_sigma: Dict[int, float]  # A
    electron_temperature: float  # K
    kind: str = ""
    extra: Dict[str, Any] = Field(default_factory=dict)


class MeasurementRecord(BaseModel):
    """A persisted sweep: flat row-major current grid per channel."""
    model_config = ConfigDict(frozen=True)

    spec: SweepSpec
    routing: RoutingPlan
    currents: Dict[int, List[float]]
    metadata: RecordMetadata
    sample_label: str = ""
    timestamp: str = ""
    seed: int = 0

    @model_validator(mode="after")
    def grid_size(self) -> "MeasurementRecord":
        if sorted(self.currents) != sorted(self.spec.channels):
            raise ValueError("currents must hold exactly the swept channels")
        size = self.spec.n_points
        for channel, values in self.currents.items():
            if len(values) != size:
                raise ValueError(f"channel {channel} holds {len(values)} points, expected {size}")
        return self

    @property
    def ndim(self) -> int:
        return len(self.spec.axes)

    def grid(self, channel: int) -> np.ndarray:
        """Current grid of one channel shaped like the sweep axes."""
        return np.asarray(self.currents[channel], dtype=float).reshape(self.spec.shape)

    def axis_values(self, gate: str) -> np.ndarray:
        for axis in self.spec.axes:
            if axis.gate == gate:
                return axis.values()
        raise KeyError(gate)

    def axis_index(self, gate: str) -> int:
        for i, axis in enumerate(self.spec.axes):
            if axis.gate == gate:
                return i
        raise KeyError(gate)
