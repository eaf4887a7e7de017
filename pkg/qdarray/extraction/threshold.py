"""Threshold Extraction

Fits the logistic turn-on I_max / (1 + exp(-k (V - V_t))) to a 1D sweep. The
maximum slope of the logistic sits at V_t, so V_t is reported directly.
"""

import logging
import warnings
from typing import Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict
from scipy.optimize import OptimizeWarning, curve_fit
from scipy.special import expit

from qdarray.exceptions import InsufficientDataError, NoTurnOnError

logger = logging.getLogger(__name__)

MIN_POINTS = 10
NOISE_FLOOR_FACTOR = 8.0
MAX_RELATIVE_RMS = 0.2


# Pydantic Models
class SigmoidFit(BaseModel):
    """Result of a turn-on fit."""
    model_config = ConfigDict(frozen=True)

    v_t: float
    k: float
    i_max: float
    residual_rms: float
    converged: bool


# Utility Functions
def sigmoid(v, i_max, v_t, k):
    return i_max * expit(k * (v - v_t))


def _sigmoid_jac(v, i_max, v_t, k):
    s = expit(k * (v - v_t))
    ds = s * (1.0 - s)
    return np.column_stack([s, -i_max * k * ds, i_max * (v - v_t) * ds])


def estimate_noise(currents: np.ndarray) -> float:
    """Robust point-noise estimate from the MAD of first differences."""
    d = np.diff(currents)
    if d.size == 0:
        return 0.0
    mad = np.median(np.abs(d - np.median(d)))
    return 1.4826 * mad / np.sqrt(2.0)


def _first_crossing(v: np.ndarray, y: np.ndarray, level: float) -> Optional[float]:
    above = np.nonzero(y >= level)[0]
    if above.size == 0:
        return None
    i = int(above[0])
    if i == 0:
        return float(v[0])
    y0, y1 = y[i - 1], y[i]
    return float(v[i - 1] + (level - y0) * (v[i] - v[i - 1]) / (y1 - y0))


def initial_guess(v: np.ndarray, y: np.ndarray):
    """Closed-form start: i_max, half-crossing and k = 4 / (V90 - V10)."""
    i_max = float(np.max(y))
    v_half = _first_crossing(v, y, 0.5 * i_max)
    v10 = _first_crossing(v, y, 0.1 * i_max)
    v90 = _first_crossing(v, y, 0.9 * i_max)
    span = float(v[-1] - v[0])
    if v_half is None:
        v_half = float(v[0] + 0.5 * span)
    if v10 is None or v90 is None or v90 <= v10:
        k = 10.0 / span
    else:
        k = 4.0 / (v90 - v10)
    return i_max, v_half, k


def fit_threshold(trace: Sequence[Tuple[float, float]], abs_floor: float = 0.0) -> SigmoidFit:
    """Fit a logistic turn-on to one sweep.

    Args:
        trace: (gate voltage in V, current in A) pairs, voltages strictly increasing
        abs_floor: Absolute current range below which the trace counts as flat

    Returns:
        SigmoidFit: Fit result; ``converged`` is False for a poor fit

    Raises:
        InsufficientDataError: If fewer than 10 points or voltages not increasing
        NoTurnOnError: If the current range is below the noise floor
    """
    data = np.asarray(trace, dtype=float).reshape(-1, 2)
    v, i = data[:, 0], data[:, 1]
    if v.size < MIN_POINTS:
        raise InsufficientDataError(f"threshold fit needs at least {MIN_POINTS} points")
    if np.any(np.diff(v) <= 0):
        raise InsufficientDataError("voltages must be strictly increasing")

    spread = float(np.ptp(i))
    floor = max(abs_floor, NOISE_FLOOR_FACTOR * estimate_noise(i))
    if spread <= floor:
        raise NoTurnOnError(f"current range {spread:.3e} A is below the noise floor {floor:.3e} A")

    scale = float(np.max(np.abs(i)))
    y = i / scale
    p0 = initial_guess(v, y)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", OptimizeWarning)
            popt, _ = curve_fit(sigmoid, v, y, p0=p0, jac=_sigmoid_jac, maxfev=10000)
    except RuntimeError as exc:
        logger.warning("sigmoid fit did not converge: %s", exc)
        rms = float(np.sqrt(np.mean((sigmoid(v, *p0) - y) ** 2)))
        return SigmoidFit(v_t=p0[1], k=p0[2], i_max=p0[0] * scale, residual_rms=rms * scale, converged=False)

    i_max, v_t, k = (float(p) for p in popt)
    rms = float(np.sqrt(np.mean((sigmoid(v, *popt) - y) ** 2)))
    converged = bool(
        k > 0
        and v[0] <= v_t <= v[-1]
        and rms <= MAX_RELATIVE_RMS * abs(i_max)
        and np.isfinite(popt).all()
    )
    return SigmoidFit(v_t=v_t, k=k, i_max=i_max * scale, residual_rms=rms * scale, converged=converged)
