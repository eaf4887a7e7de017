"""Virtual Instrument

Switch-matrix routing for the row-selection protocol and a sweep engine that
reads out every column of the selected row in parallel.
"""

import logging
import math
from typing import Dict, List, Optional

import numpy as np

from qdarray import rng, transport
from qdarray.exceptions import AddressingError, RoutingError
from qdarray.models import (
    VSD_AXIS,
    MeasurementRecord,
    RecordMetadata,
    RoutingPlan,
    SampleInstance,
    SweepSpec,
)

logger = logging.getLogger(__name__)

DEFAULT_T0 = 1.4  # K
DEFAULT_NOISE_FRACTION = 0.01


def line_budget(n: int) -> int:
    """Control and readout lines for an n x n array.

    (n+1) confinement + n plungers + (n+1) barriers + n sources + 1 drain.
    """
    if n < 1:
        raise AddressingError("array size must be at least 1")
    return (n + 1) + n + (n + 1) + (n + 1)


def gate_names(n: int) -> List[str]:
    """Every gate and lead of an n x n array."""
    return (
        [f"C{i}" for i in range(1, n + 2)]
        + [f"P{i}" for i in range(1, n + 1)]
        + [f"B{i}" for i in range(1, n + 2)]
        + [f"S{i}" for i in range(1, n + 1)]
        + ["D"]
    )


def configure_row(
    sample: SampleInstance,
    row: int,
    accumulation_bias: float = 2.5,
    confinement_bias: float = -0.5,
) -> RoutingPlan:
    """Routing plan that isolates one row: P_row plunges, B_row and B_row+1 are
    the source and drain barriers, every other plunger and barrier extends the
    2DEG.

    Raises:
        AddressingError: If row is outside 1..n
    """
    n = sample.geometry.n
    if not 1 <= row <= n:
        raise AddressingError(f"row {row} outside 1..{n}")
    assigned = {f"P{row}", f"B{row}", f"B{row + 1}"}
    extenders = [g for g in gate_names(n) if g[0] in "PB" and g not in assigned]
    return RoutingPlan(
        array_size=n,
        row_under_test=row,
        plunger_gate=f"P{row}",
        source_barrier=f"B{row}",
        drain_barrier=f"B{row + 1}",
        extender_gates=extenders,
        confinement_bias=confinement_bias,
        accumulation_bias=accumulation_bias,
    )


def _validate(sample: SampleInstance, plan: RoutingPlan, spec: SweepSpec) -> None:
    n = sample.geometry.n
    if plan.array_size != n:
        raise RoutingError("routing plan was built for a different array")
    bad = [c for c in spec.channels if not 1 <= c <= n]
    if bad:
        raise RoutingError(f"channels {bad} outside 1..{n}")
    allowed = set(plan.routed_gates) | {VSD_AXIS}
    for axis in spec.axes:
        if axis.gate not in allowed:
            raise RoutingError(f"gate {axis.gate} is not routed to row {plan.row_under_test}")
    known = set(gate_names(n))
    for gate in spec.fixed_biases:
        if gate not in known:
            raise RoutingError(f"unknown gate {gate}")
    swept = {a.gate for a in spec.axes}
    for group in spec.shared_groups:
        unknown = [g for g in group if g not in known]
        if unknown:
            raise RoutingError(f"shared group names unknown gates {unknown}")
        if len(group) > 1 and swept & set(group):
            raise RoutingError(f"shared group {group} cannot be swept independently")
        levels = {spec.fixed_biases.get(g, _default_bias(plan, g)) for g in group}
        if len(levels) > 1:
            raise RoutingError(f"gates {group} share a line but carry different biases")


def _default_bias(plan: RoutingPlan, gate: str) -> float:
    if gate.startswith("C"):
        return plan.confinement_bias
    if gate.startswith(("P", "B")):
        return plan.accumulation_bias
    return 0.0


def electron_temperature(fridge_temperature: float, t0: float = DEFAULT_T0) -> float:
    """Electron temperature of the simulated device at a given fridge temperature."""
    return math.sqrt(t0 ** 2 + fridge_temperature ** 2)


def quantize(values: np.ndarray) -> np.ndarray:
    """Round to the 9 significant digits stored in record files."""
    return np.char.mod("%.8e", values).astype(float)


def run_sweep(
    sample: SampleInstance,
    plan: RoutingPlan,
    spec: SweepSpec,
    noise_seed: int,
    noise_fraction: float = DEFAULT_NOISE_FRACTION,
    t0: float = DEFAULT_T0,
    softness: float = transport.DEFAULT_SOFTNESS,
    kind: str = "",
    extra: Optional[Dict] = None,
) -> MeasurementRecord:
    """Evaluate a sweep on every requested column of the routed row.

    All channels share the swept gate voltages. Noise for (channel, point) is
    drawn from its own counter-based stream, so the record does not depend on
    evaluation order or on which other channels were read out.

    Args:
        sample: Sample under test
        plan: Routing plan of the row
        spec: Sweep specification
        noise_seed: Seed of the current-noise streams
        noise_fraction: Noise sigma as a fraction of the open-channel current
        t0: Intrinsic electron temperature (K)
        softness: Barrier and plunger logistic softness (1/V)
        kind: Free-form record kind stored in the metadata

    Returns:
        MeasurementRecord: Currents quantized to the record precision

    Raises:
        RoutingError: If a swept gate is not routed to the row, a channel is
            outside the array, or a shared gate group is violated
    """
    _validate(sample, plan, spec)
    row = plan.row_under_test
    grids = np.meshgrid(*(a.values() for a in spec.axes), indexing="ij")
    swept = {a.gate: g.ravel() for a, g in zip(spec.axes, grids)}

    def bias(gate: str):
        if gate in swept:
            return swept[gate]
        return spec.fixed_biases.get(gate, _default_bias(plan, gate))

    v_p = bias(plan.plunger_gate)
    v_bs = bias(plan.source_barrier)
    v_bd = bias(plan.drain_barrier)
    v_sd = swept.get(VSD_AXIS, spec.v_sd)
    temperature = electron_temperature(spec.fridge_temperature, t0)
    index = np.arange(spec.n_points)

    currents: Dict[int, List[float]] = {}
    reference: Dict[int, float] = {}
    sigmas: Dict[int, float] = {}
    for col in spec.channels:
        dot = sample.dot(row, col)
        i_open = transport.open_channel_current(dot, spec.v_sd)
        sigma = noise_fraction * i_open
        if dot.dead:
            values = np.zeros(spec.n_points)
        else:
            values = transport.current_array(
                dot, sample.spurious_for_dot(row, col), v_p, v_bs, v_bd, v_sd,
                temperature, softness,
            )
            values = np.broadcast_to(values, (spec.n_points,)).astype(float)
        if sigma > 0:
            values = values + sigma * rng.normal(noise_seed, "current_noise", col, index)
        currents[col] = quantize(values).tolist()
        reference[col] = i_open
        sigmas[col] = sigma
    logger.debug("row %d sweep %s: %d points x %d channels", row, kind, spec.n_points, len(spec.channels))
    return MeasurementRecord(
        spec=spec,
        routing=plan,
        currents=currents,
        metadata=RecordMetadata(
            reference_currents=reference,
            noise_sigma=sigmas,
            electron_temperature=temperature,
            kind=kind,
            extra=extra or {},
        ),
        sample_label=sample.label,
        timestamp="",
        seed=noise_seed,
    )
