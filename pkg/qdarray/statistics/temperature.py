"""Electron Temperature

Each Coulomb peak measured at small source-drain bias is fitted with the
thermally broadened lineshape gmax / cosh^2(alpha (V - V0) / (2 k_B T_e)).
The effective temperatures across fridge temperatures are then fitted with
T_e = sqrt(T0^2 + T_ph^2 + T_sd^2), T0 being the only free parameter.
"""

import logging
import warnings
from typing import List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict
from scipy.optimize import OptimizeWarning, curve_fit

from qdarray.constants import CONSTANTS, PhysicalConstants
from qdarray.exceptions import ConfigurationError, FitError, InsufficientDataError

logger = logging.getLogger(__name__)

DEFAULT_ETA = 0.5
DEFAULT_SEPARATION = 3.0
MIN_TRACES = 3
FWHM_FACTOR = 3.5255  # cosh^-2 full width at half maximum in units of k_B T


# Pydantic Models
class PeakTrace(BaseModel):
    """Current across one Coulomb peak at one fridge temperature."""
    model_config = ConfigDict(frozen=True)

    t_fridge: float  # K
    v_plunger: List[float]
    current: List[float]


class PeakFit(BaseModel):
    model_config = ConfigDict(frozen=True)

    t_fridge: float
    t_e: float
    stderr: float
    v_peak: float
    amplitude: float


class ETempResult(BaseModel):
    model_config = ConfigDict(frozen=True)

    t0_points: List[Tuple[float, float, float]]  # (t_fridge, t_e, stderr)
    t0_fit: float
    t0_stderr: Optional[float] = None
    t_e_curve: List[Tuple[float, float]]  # (t_ph, t_e)
    valid_regime: bool
    excluded: List[float] = []
    eta: float
    v_sd: float


# Utility Functions
def electron_temperature(t0: float, t_ph: float = 0.0, t_sd: float = 0.0):
    """Quadrature sum of the intrinsic, phonon and source-drain temperatures."""
    return np.sqrt(np.square(t0) + np.square(t_ph) + np.square(t_sd))


def source_drain_temperature(v_sd: float, eta: float = DEFAULT_ETA,
                             constants: PhysicalConstants = CONSTANTS) -> float:
    """Temperature equivalent eta * e * |v_sd| / k_B of the bias window."""
    return eta * abs(v_sd) / constants.k_B


def valid_regime(t_max: float, delta_e_mev: float, e_c_mev: float,
                 separation: float = DEFAULT_SEPARATION,
                 constants: PhysicalConstants = CONSTANTS) -> bool:
    """k_B T << delta_E << E_C, each step by at least ``separation``."""
    return constants.k_B_mev * t_max * separation < delta_e_mev and delta_e_mev * separation < e_c_mev


def _lineshape(alpha: float, constants: PhysicalConstants):
    # constant offset absorbs the non-resonant background of partly open barriers
    def model(v, amplitude, v0, t, offset):
        x = np.abs(alpha * (v - v0)) / (2.0 * constants.k_B * np.abs(t))
        a = np.exp(-2.0 * x)
        return amplitude * 4.0 * a / (1.0 + a) ** 2 + offset
    return model


def fit_peak(trace: PeakTrace, alpha: float, constants: PhysicalConstants = CONSTANTS) -> Optional[PeakFit]:
    """Fit the thermal lineshape to one trace; None if the fit does not converge."""
    v = np.asarray(trace.v_plunger, dtype=float)
    i = np.asarray(trace.current, dtype=float)
    if v.size < 5:
        return None
    k = int(np.argmax(i))
    offset = float(np.min(i))
    amplitude = float(i[k]) - offset
    if amplitude <= 0:
        return None
    above = v[i - offset >= 0.5 * amplitude]
    fwhm = max(float(above.max() - above.min()), float(abs(v[1] - v[0])))
    t_guess = alpha * fwhm / (FWHM_FACTOR * constants.k_B)
    model = _lineshape(alpha, constants)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", OptimizeWarning)
            popt, pcov = curve_fit(model, v, i, p0=[amplitude, float(v[k]), t_guess, offset], maxfev=10000)
    except (RuntimeError, ValueError):
        return None
    stderr = float(np.sqrt(pcov[2, 2])) if np.all(np.isfinite(pcov)) else float("nan")
    t_e = abs(float(popt[2]))
    if not np.isfinite(t_e) or t_e <= 0 or not np.isfinite(stderr) or not v.min() <= popt[1] <= v.max():
        return None
    return PeakFit(t_fridge=trace.t_fridge, t_e=t_e, stderr=stderr, v_peak=float(popt[1]), amplitude=float(popt[0]))


def fit_electron_temperature(
    traces: Sequence[PeakTrace],
    alpha: float,
    v_sd: float,
    delta_e: float,
    e_c: float,
    eta: float = DEFAULT_ETA,
    separation: float = DEFAULT_SEPARATION,
    constants: PhysicalConstants = CONSTANTS,
) -> ETempResult:
    """Recover the intrinsic electron temperature from peaks at several fridge temperatures.

    Args:
        traces: One Coulomb-peak trace per fridge temperature
        alpha: Plunger lever arm of the dot
        v_sd: Source-drain bias of the traces (V)
        delta_e: Level spacing (meV), for the regime check
        e_c: Charging energy (meV), for the regime check
        eta: Fraction of e * v_sd counted as source-drain broadening

    Returns:
        ETempResult: Per-trace temperatures, fitted T0 and the T_e curve

    Raises:
        InsufficientDataError: If fewer than 3 traces are given
        ConfigurationError: If alpha is not positive
        FitError: If no peak fit converges
    """
    if len(traces) < MIN_TRACES:
        raise InsufficientDataError(f"need at least {MIN_TRACES} fridge temperatures, got {len(traces)}")
    if alpha <= 0:
        raise ConfigurationError("alpha must be positive")

    fits: List[PeakFit] = []
    excluded: List[float] = []
    for trace in traces:
        fit = fit_peak(trace, alpha, constants)
        if fit is None:
            logger.warning("peak fit at %.3f K did not converge, excluded", trace.t_fridge)
            excluded.append(trace.t_fridge)
        else:
            fits.append(fit)
    if not fits:
        raise FitError("no Coulomb peak fit converged")

    t_ph = np.array([f.t_fridge for f in fits])
    t_e = np.array([f.t_e for f in fits])
    stderr = np.array([f.stderr for f in fits])
    t_sd = source_drain_temperature(v_sd, eta, constants)

    def model(t, t0):
        return electron_temperature(t0, t, t_sd)

    sigma = stderr if np.all(stderr > 0) else None
    guess = float(np.sqrt(max(np.min(t_e ** 2 - t_ph ** 2) - t_sd ** 2, 1e-6)))
    try:
        popt, pcov = curve_fit(model, t_ph, t_e, p0=[guess], sigma=sigma, absolute_sigma=sigma is not None,
                               bounds=(0.0, np.inf))
    except (RuntimeError, ValueError) as exc:
        raise FitError(f"electron temperature fit failed: {exc}") from exc
    t0 = float(popt[0])
    t0_stderr = float(np.sqrt(pcov[0, 0])) if np.isfinite(pcov[0, 0]) else None

    t_max = float(max(tr.t_fridge for tr in traces))
    grid = np.linspace(0.0, t_max, 50)
    curve = [(float(t), float(model(t, t0))) for t in grid]
    logger.info("electron temperature T0 = %.3f K from %d peaks", t0, len(fits))
    return ETempResult(
        t0_points=[(f.t_fridge, f.t_e, f.stderr) for f in fits],
        t0_fit=t0,
        t0_stderr=t0_stderr,
        t_e_curve=curve,
        valid_regime=valid_regime(t_max, delta_e, e_c, separation, constants),
        excluded=excluded,
        eta=eta,
        v_sd=v_sd,
    )
