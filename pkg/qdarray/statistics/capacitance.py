"""Capacitance Statistics

Parallel-plate calibration C_P = eps0 * eps_r * A / (t1 + delta2) across oxide
thicknesses, and per-sample distributions of the extracted dot parameters.
"""

import logging
from typing import Dict, Sequence, Tuple

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, model_validator
from scipy.optimize import least_squares

from qdarray.constants import CONSTANTS, PhysicalConstants
from qdarray.exceptions import DataError, DegenerateFitError, InsufficientDataError

logger = logging.getLogger(__name__)

DIAMOND_QUANTITIES = ("c_p", "c_sigma", "alpha", "e_c")


# Pydantic Models
class CapFitResult(BaseModel):
    model_config = ConfigDict(frozen=True)

    area: float  # nm^2
    delta2: float  # nm
    residual: float  # aF, RMS misfit
    n_points: int

    @model_validator(mode="after")
    def physical(self) -> "CapFitResult":
        if self.area <= 0:
            raise ValueError("area must be positive")
        if self.delta2 < 0:
            raise ValueError("delta2 must be non-negative")
        return self


class QuantitySummary(BaseModel):
    model_config = ConfigDict(frozen=True)

    mean: float
    std: float
    rel_spread: float
    n: int


# Utility Functions
def parallel_plate(t1, area: float, delta2: float, constants: PhysicalConstants = CONSTANTS):
    """Plunger capacitance in aF for oxide thickness t1 (nm)."""
    return constants.permittivity_af_per_nm * area / (np.asarray(t1, dtype=float) + delta2)


def fit_parallel_plate(
    points: Sequence[Tuple[float, float]],
    constants: PhysicalConstants = CONSTANTS,
) -> CapFitResult:
    """Fit dot area and inter-layer oxide to (t1, mean C_P) points.

    1 / C_P is linear in t1, which gives the starting point; a bounded
    least-squares fit in C_P space then refines it.

    Args:
        points: (t1 in nm, mean C_P in aF) pairs
        constants: Physical constants

    Returns:
        CapFitResult: Area (nm^2), delta2 (nm) and RMS residual (aF)

    Raises:
        DegenerateFitError: If fewer than two distinct t1 values are given
        DataError: If a capacitance is not positive
    """
    data = np.asarray(points, dtype=float).reshape(-1, 2)
    t1, cap = data[:, 0], data[:, 1]
    if np.unique(t1).size < 2:
        raise DegenerateFitError("parallel-plate fit needs at least two distinct t1 values")
    if np.any(cap <= 0):
        raise DataError("capacitances must be positive")

    eps = constants.permittivity_af_per_nm
    slope, intercept = np.polyfit(t1, 1.0 / cap, 1)
    if slope <= 0:
        raise DegenerateFitError("capacitance does not decrease with oxide thickness")
    x0 = np.array([1.0 / (eps * slope), max(intercept / slope, 0.0)])

    def residuals(x):
        return parallel_plate(t1, x[0], x[1], constants) - cap

    result = least_squares(
        residuals, x0, bounds=([1e-12, 0.0], [np.inf, np.inf]),
        x_scale=np.maximum(np.abs(x0), 1.0), xtol=1e-15, ftol=1e-15, gtol=1e-15,
    )
    area, delta2 = (float(v) for v in result.x)
    residual = float(np.sqrt(np.mean(residuals(result.x) ** 2)))
    logger.info("parallel-plate fit: A = %.1f nm^2, delta2 = %.3f nm, rms %.3g aF", area, delta2, residual)
    return CapFitResult(area=area, delta2=delta2, residual=residual, n_points=len(t1))


def summarize(values: Sequence[float]) -> QuantitySummary:
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        raise InsufficientDataError("no values to summarize")
    mean = float(v.mean())
    std = float(v.std(ddof=1)) if v.size > 1 else 0.0
    return QuantitySummary(mean=mean, std=std, rel_spread=std / mean if mean else 0.0, n=int(v.size))


def capacitance_summary(fits: Sequence) -> Dict[str, QuantitySummary]:
    """Mean, spread and relative spread of C_P, C_sigma, alpha and E_C over diamond fits."""
    return {q: summarize([getattr(f, q) for f in fits]) for q in DIAMOND_QUANTITIES}


def empirical_cdf(values: Sequence[float], name: str = "value") -> pd.DataFrame:
    """Sorted values with cumulative fractions i / N."""
    v = np.sort(np.asarray(values, dtype=float), kind="stable")
    return pd.DataFrame({name: v, "cdf": np.arange(1, v.size + 1) / max(v.size, 1)})
