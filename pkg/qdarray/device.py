"""Device Model

Oxide-stack arithmetic, the threshold-voltage disorder law, parallel-plate
plunger capacitance and reproducible synthesis of sample instances.
"""

import logging
import math
from typing import Iterable, List, Optional, Tuple

import numpy as np

from qdarray import rng
from qdarray.constants import CONSTANTS, PhysicalConstants
from qdarray.exceptions import ConfigurationError, SingularInputError
from qdarray.models import (
    ArrayGeometry,
    DisorderConfig,
    DotGroundTruth,
    OxideStack,
    SampleInstance,
    SpuriousDotSpec,
)

logger = logging.getLogger(__name__)

ALPHA_BOUNDS = (0.02, 0.9)


def effective_thicknesses(t1_nominal: float, delta2: float, delta3: float) -> Tuple[float, float, float]:
    """Net oxide thickness under each gate layer.

    Args:
        t1_nominal: Oxide under gate layer 1 (nm)
        delta2: Extra oxide between layers 1 and 2 (nm)
        delta3: Extra oxide between layers 2 and 3 (nm)

    Returns:
        Tuple[float, float, float]: (t1, t2, t3) in nm

    Raises:
        ConfigurationError: If t1 is not positive or an offset is negative
    """
    if t1_nominal <= 0:
        raise ConfigurationError(f"t1 must be positive, got {t1_nominal}")
    if delta2 < 0 or delta3 < 0:
        raise ConfigurationError("inter-layer oxide thicknesses must be non-negative")
    t2 = t1_nominal + delta2
    return t1_nominal, t2, t2 + delta3


def sigma_vt(t1: float, t_gate: float, cfg: DisorderConfig, family: str = "plunger") -> float:
    """Threshold-voltage spread in mV.

    Root-sum-square of a strain term falling as 1/t1, a term growing linearly
    with the gate's own oxide thickness, and a constant floor.

    Raises:
        SingularInputError: If t1 is zero
        ConfigurationError: If a thickness is negative
    """
    if t1 == 0:
        raise SingularInputError("sigma_vt is singular at t1 = 0")
    if t1 < 0 or t_gate <= 0:
        raise ConfigurationError("thicknesses must be positive")
    a, b, s0 = cfg.coefficients(family)
    return math.sqrt((a / t1) ** 2 + (b * t_gate) ** 2 + s0 ** 2)


def calibrate_disorder(t_star: float, offset: float, sigma_star: float) -> Tuple[float, float]:
    """Coefficients (a, b) placing the minimum of sigma_vt(t1, t1 + offset) at t_star.

    With sigma0 = 0 the minimum value equals sigma_star.
    """
    if t_star <= 0 or sigma_star <= 0 or offset < 0:
        raise ConfigurationError("calibration needs t_star > 0, sigma_star > 0, offset >= 0")
    a = sigma_star * math.sqrt(t_star ** 3 / (2 * t_star + offset))
    b = a / math.sqrt(t_star ** 3 * (t_star + offset))
    return a, b


def default_disorder(delta2: float = 4.5, delta3: float = 0.8, **overrides) -> DisorderConfig:
    """Disorder model calibrated to a 63 mV plunger minimum at t1 = 15 nm and a
    70 mV barrier minimum at t1 = 12 nm."""
    a_p, b_p = calibrate_disorder(15.0, delta2, 63.0)
    a_b, b_b = calibrate_disorder(12.0, delta2 + delta3, 70.0)
    values = dict(
        strain_coeff_a=a_p,
        pelgrom_coeff_b=b_p,
        strain_coeff_a_barrier=a_b,
        pelgrom_coeff_b_barrier=b_b,
    )
    values.update(overrides)
    return DisorderConfig(**values)


def plunger_capacitance(area: float, t2: float, constants: PhysicalConstants = CONSTANTS) -> float:
    """Parallel-plate plunger capacitance in aF for area in nm^2 and t2 in nm."""
    if area <= 0 or t2 <= 0:
        raise ConfigurationError("area and t2 must be positive")
    return constants.permittivity_af_per_nm * area / t2


def spurious_probability(t1: float, cfg: DisorderConfig) -> float:
    """Chance that a barrier segment hosts a spurious dot."""
    if t1 <= 0:
        raise ConfigurationError("t1 must be positive")
    return min(1.0, cfg.spurious_rate_coeff / t1)


def draw_spurious_dots(n: int, t1: float, cfg: DisorderConfig, seed: int) -> List[SpuriousDotSpec]:
    """Spurious dots for every (barrier k = 1..n+1, column) segment of an n x n array."""
    p = spurious_probability(t1, cfg)
    if p == 0.0:
        return []
    ks = np.arange(1, n + 2)[:, None]
    cols = np.arange(1, n + 1)[None, :]
    hit = rng.uniform(seed, "spurious", ks, cols) < p
    lever = rng.uniform(seed, "spurious_lever", ks, cols)
    depth = rng.uniform(seed, "spurious_depth", ks, cols)
    lo_l, hi_l = cfg.spurious_lever_range
    lo_d, hi_d = cfg.spurious_depth_range
    found = []
    for i, j in zip(*np.nonzero(hit)):
        coupling = lo_l + (hi_l - lo_l) * float(lever[i, j])
        found.append(
            SpuriousDotSpec(
                barrier_index=int(i) + 1,
                col=int(j) + 1,
                coupling_lever=coupling,
                period=cfg.spurious_charging_energy * 1e-3 / coupling,
                depth=lo_d + (hi_d - lo_d) * float(depth[i, j]),
            )
        )
    return found


def _thresholds(seed: int, tag: str, shape_keys, mean: float, sigma_mv: float, cfg: DisorderConfig) -> np.ndarray:
    z = rng.normal(seed, tag, *shape_keys)
    outlier = rng.uniform(seed, tag + "_outlier", *shape_keys) < cfg.outlier_prob
    scale = np.where(outlier, cfg.outlier_scale, 1.0)
    return mean + 1e-3 * sigma_mv * scale * z


def synthesize_sample(
    geometry: ArrayGeometry,
    stack: OxideStack,
    cfg: DisorderConfig,
    seed: int,
    label: str = "",
    dead_columns: Optional[Iterable[int]] = None,
    disorder_seed: Optional[int] = None,
    constants: PhysicalConstants = CONSTANTS,
) -> SampleInstance:
    """Draw a reproducible sample instance.

    Every draw comes from a counter-based stream keyed by (seed, field, row,
    col), so the result is a pure function of the inputs. Threshold disorder
    is drawn from ``disorder_seed`` when given: samples sharing it carry the
    same standardized threshold field, scaled by their own sigma_vt.

    Args:
        geometry: Array geometry
        stack: Oxide stack
        cfg: Disorder configuration
        seed: 64-bit seed
        label: Sample label
        dead_columns: Columns that never turn on
        disorder_seed: Seed of the standardized threshold field, ``seed`` if None

    Returns:
        SampleInstance: The synthesized array
    """
    n = geometry.n
    dead = set(dead_columns or ())
    if any(not 1 <= c <= n for c in dead):
        raise ConfigurationError(f"dead columns must lie in 1..{n}")
    t1, t2, t3 = effective_thicknesses(stack.t1, stack.delta2, stack.delta3)

    rows = np.arange(1, n + 1)[:, None]
    cols = np.arange(1, n + 1)[None, :]
    ks = np.arange(1, n + 2)[:, None]

    field = seed if disorder_seed is None else disorder_seed
    vt_p = _thresholds(field, "vt_plunger", (rows, cols), cfg.mean_vt_plunger, sigma_vt(t1, t2, cfg, "plunger"), cfg)
    vt_b = _thresholds(field, "vt_barrier", (ks, cols), cfg.mean_vt_barrier, sigma_vt(t1, t3, cfg, "barrier"), cfg)

    spurious = draw_spurious_dots(n, t1, cfg, seed)
    if cfg.spurious_vt_shift:
        for spec in spurious:
            vt_b[spec.barrier_index - 1, spec.col - 1] += cfg.spurious_vt_shift

    c_mean = plunger_capacitance(geometry.dot_area, t2, constants)
    c_p = c_mean * (1.0 + cfg.cp_rel_spread * rng.normal(seed, "c_p", rows, cols))
    alpha = cfg.alpha_mean * (1.0 + cfg.alpha_rel_spread * rng.normal(seed, "alpha", rows, cols))
    alpha = np.clip(alpha, *ALPHA_BOUNDS)
    gmax = cfg.gmax * (1.0 + cfg.gmax_rel_spread * rng.normal(seed, "gmax", rows, cols))
    gmax = np.maximum(gmax, 0.1 * cfg.gmax)

    dots = [
        [
            DotGroundTruth(
                row=r,
                col=c,
                vt_plunger=float(vt_p[r - 1, c - 1]),
                c_p=float(c_p[r - 1, c - 1]),
                c_sigma=float(c_p[r - 1, c - 1] / alpha[r - 1, c - 1]),
                gmax=float(gmax[r - 1, c - 1]),
                lever_bs=cfg.lever_bs,
                lever_bd=cfg.lever_bd,
                vt_bs=float(vt_b[r - 1, c - 1]),
                vt_bd=float(vt_b[r, c - 1]),
                dead=c in dead,
            )
            for c in range(1, n + 1)
        ]
        for r in range(1, n + 1)
    ]
    barrier_vts = {f"B{k}": [float(v) for v in vt_b[k - 1]] for k in range(1, n + 2)}
    logger.debug("synthesized %s: %d dots, %d spurious", label or seed, n * n, len(spurious))
    return SampleInstance(
        geometry=geometry,
        stack=OxideStack(t1=t1, delta2=stack.delta2, delta3=stack.delta3),
        dots=dots,
        barrier_vts=barrier_vts,
        spurious=spurious,
        seed=seed,
        label=label,
    )
