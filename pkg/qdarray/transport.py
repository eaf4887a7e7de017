"""Transport Forward Model

Constant-interaction current through one dot with thermally broadened
levels, barrier pinch-off, plunger turn-on and spurious-dot modulation, plus
the analytic diamond geometry used as an oracle by the extraction code.

Units: voltages in V, energies in eV unless a name says meV, capacitances in
aF, conductances in S, currents in A.
"""

import math
from typing import List, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict
from scipy.special import expit

from qdarray import rng
from qdarray.constants import ATTO, CONSTANTS, PhysicalConstants
from qdarray.exceptions import ConfigurationError
from qdarray.models import BiasPoint, DotGroundTruth, PeakShape, Side, SpuriousDotSpec

DEFAULT_SOFTNESS = 20.0  # 1/V

SpuriousList = Sequence[Tuple[SpuriousDotSpec, Side]]


class DiamondGeometry(BaseModel):
    """Analytic Coulomb diamond in the (v_plunger, v_sd) plane.

    Edge lines are ``v_sd = slope * v_plunger + intercept`` in the order
    left-upper, left-lower, right-upper, right-lower.
    """
    model_config = ConfigDict(frozen=True)

    left_vertex: float
    right_vertex: float
    width: float
    height: float
    alpha: float
    e_c: float  # meV
    edge_lines: List[Tuple[float, float]]


def coulomb_peak_conductance(delta_eps, shape: PeakShape, constants: PhysicalConstants = CONSTANTS):
    """Thermally broadened peak G = gmax / cosh^2(delta_eps / (2 k_B T0)).

    Evaluated as 4a / (1 + a)^2 with a = exp(-2|x|), which is exactly even
    and never overflows.
    """
    x = np.abs(np.asarray(delta_eps, dtype=float)) / (2.0 * constants.k_B * shape.t0)
    a = np.exp(-2.0 * x)
    g = shape.gmax * 4.0 * a / (1.0 + a) ** 2
    return float(g) if np.ndim(g) == 0 else g


def peak_position(dot: DotGroundTruth, n_level: int) -> float:
    """Plunger voltage of the n-th charge degeneracy at the barrier reference."""
    return dot.vt_plunger + (n_level + 0.5) * dot.peak_period


def dot_detuning(dot: DotGroundTruth, bias: BiasPoint, n_level: int) -> float:
    """Energy (eV) of level n relative to the leads.

    Barrier voltages are referenced to the dot's own barrier thresholds.
    """
    return (
        dot.alpha * (bias.v_plunger - peak_position(dot, n_level))
        + dot.lever_bs * (bias.v_bs - dot.vt_bs)
        + dot.lever_bd * (bias.v_bd - dot.vt_bd)
    )


def diamond_geometry(c_p: float, c_sigma: float, left_vertex: float = 0.0,
                     constants: PhysicalConstants = CONSTANTS) -> DiamondGeometry:
    """Diamond for capacitances in aF, left zero-bias vertex at ``left_vertex``."""
    if c_p <= 0 or c_sigma <= 0 or c_p > c_sigma:
        raise ConfigurationError("require 0 < c_p <= c_sigma")
    width = constants.e_charge / (c_p * ATTO)
    height = constants.e_charge / (c_sigma * ATTO)
    alpha = c_p / c_sigma
    slope = 2.0 * alpha
    right_vertex = left_vertex + width
    lines = [
        (slope, -slope * left_vertex),
        (-slope, slope * left_vertex),
        (-slope, slope * right_vertex),
        (slope, -slope * right_vertex),
    ]
    return DiamondGeometry(
        left_vertex=left_vertex,
        right_vertex=right_vertex,
        width=width,
        height=height,
        alpha=alpha,
        e_c=1e3 * height,
        edge_lines=lines,
    )


def diamond_boundaries(dot: DotGroundTruth, n_level: int,
                       constants: PhysicalConstants = CONSTANTS) -> DiamondGeometry:
    """Blockade diamond between peaks n_level and n_level + 1 (barriers at reference)."""
    return diamond_geometry(dot.c_p, dot.c_sigma, peak_position(dot, n_level), constants)


def barrier_transmission(v_b, vt_b: float, softness: float = DEFAULT_SOFTNESS):
    """Logistic pinch-off of a barrier."""
    if softness <= 0:
        raise ConfigurationError("softness must be positive")
    t = expit(softness * (np.asarray(v_b, dtype=float) - vt_b))
    return float(t) if np.ndim(t) == 0 else t


def spurious_modulation(spec: SpuriousDotSpec, side: Side, v_barrier):
    """Current factor 1 - depth * sin^2(pi v / period) of a spurious dot.

    ``v_barrier`` is the voltage of the barrier on ``side``, the one the
    spurious dot sits under.
    """
    if side not in ("source", "drain"):
        raise ConfigurationError(f"unknown side {side!r}")
    s = np.sin(np.pi * np.asarray(v_barrier, dtype=float) / spec.period)
    f = 1.0 - spec.depth * s ** 2
    return float(f) if np.ndim(f) == 0 else f


def _level_current(eps: np.ndarray, v_sd: np.ndarray, kt: float, gmax: float) -> np.ndarray:
    # symmetric bias: source at +v_sd/2, drain at -v_sd/2
    return gmax * 4.0 * kt * (expit(-(eps - v_sd / 2.0) / kt) - expit(-(eps + v_sd / 2.0) / kt))


def current_array(
    dot: DotGroundTruth,
    spurious: SpuriousList,
    v_plunger,
    v_bs,
    v_bd,
    v_sd,
    temperature: float,
    softness: float = DEFAULT_SOFTNESS,
    constants: PhysicalConstants = CONSTANTS,
) -> np.ndarray:
    """Noiseless current on broadcast bias arrays.

    Fully open barriers give an ohmic channel gmax * v_sd; partially closed
    barriers weight in the Coulomb-blockaded level comb. The plunger turns the
    channel on with the same logistic as the barriers.
    """
    if temperature <= 0:
        raise ConfigurationError("temperature must be positive")
    vp, vbs, vbd, vsd = np.broadcast_arrays(
        *(np.asarray(v, dtype=float) for v in (v_plunger, v_bs, v_bd, v_sd))
    )
    kt = constants.k_B * temperature
    e_c = dot.charging_energy * 1e-3

    u = (vp - dot.vt_plunger) / dot.peak_period - 0.5
    u = u + (dot.lever_bs * (vbs - dot.vt_bs) + dot.lever_bd * (vbd - dot.vt_bd)) / e_c
    span = int(math.ceil(float(np.max(np.abs(vsd), initial=0.0)) / (2.0 * e_c))) + 2
    base = np.floor(u)
    comb = np.zeros(vp.shape)
    for offset in range(-span, span + 1):
        n = base + offset
        contrib = _level_current(e_c * (u - n), vsd, kt, dot.gmax)
        comb += np.where(n >= 0, contrib, 0.0)

    xs = softness * (vbs - dot.vt_bs)
    xd = softness * (vbd - dot.vt_bd)
    gs, gd = expit(xs), expit(xd)
    blockade = 16.0 * gs * expit(-xs) * gd * expit(-xd)
    turn_on = expit(softness * (vp - dot.vt_plunger))

    current = turn_on * (gs * gd * (1.0 - blockade) * dot.gmax * vsd + blockade * comb)
    for spec, side in spurious:
        current = current * spurious_modulation(spec, side, vbs if side == "source" else vbd)
    return current


def open_channel_current(dot: DotGroundTruth, v_sd: float) -> float:
    """Current with the plunger and both barriers fully open."""
    return dot.gmax * abs(v_sd)


def dot_current(
    dot: DotGroundTruth,
    spurious_for_dot: SpuriousList,
    bias: BiasPoint,
    noise_sigma: float = 0.0,
    noise_seed: int = 0,
    softness: float = DEFAULT_SOFTNESS,
    constants: PhysicalConstants = CONSTANTS,
) -> float:
    """Current through one dot at one bias point, with optional Gaussian noise.

    Args:
        dot: Ground-truth dot
        spurious_for_dot: (spurious dot, side) pairs seen by this dot
        bias: Bias point; its temperature is the electron temperature
        noise_sigma: Current noise standard deviation (A)
        noise_seed: Seed of the noise stream

    Returns:
        float: Current in A
    """
    current = float(
        current_array(
            dot, spurious_for_dot, bias.v_plunger, bias.v_bs, bias.v_bd, bias.v_sd,
            bias.temperature_T0, softness, constants,
        )
    )
    if noise_sigma > 0:
        current += noise_sigma * float(rng.normal(noise_seed, "current_noise", dot.col, 0)[0])
    return current
