"""Spurious Dot Detection

A spurious dot under one barrier segment adds Coulomb oscillations that depend
on that barrier alone, i.e. lines perpendicular to its axis in a barrier map.
Averaging the map along the other axis keeps them and washes out the diagonal
oscillations of the intended dot; a sharp line in the spectrum of the
averaged profile flags the affected axis.
"""

import logging
from typing import List, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict
from scipy.fft import rfft, rfftfreq
from scipy.signal import get_window

from qdarray.exceptions import DimensionalityError
from qdarray.models import MeasurementRecord

logger = logging.getLogger(__name__)


# Pydantic Models
class SpuriousSettings(BaseModel):
    model_config = ConfigDict(frozen=True)

    min_bin: int = 3
    min_strength: float = 8.0
    sidelobe_ratio: float = 4.0
    min_mean_fraction: float = 0.05
    min_modulation: float = 0.02
    on_fraction: float = 0.1
    min_points: int = 16


class SpuriousDetection(BaseModel):
    """Perpendicular oscillation along one barrier axis."""
    model_config = ConfigDict(frozen=True)

    axis: str  # "bs" | "bd"
    gate: str
    period: float  # V
    strength: float
    modulation: float
    frequency_bin: float  # 1/V, spectral resolution of the analyzed profile


# Utility Functions
def _on_segment(values: np.ndarray, profile: np.ndarray, fraction: float):
    """Part of the profile after the barrier has turned on for good."""
    below = np.nonzero(profile < fraction * profile.max())[0]
    start = int(below[-1]) + 1 if below.size else 0
    return values[start:], profile[start:]


def _analyze_profile(
    values: np.ndarray,
    profile: np.ndarray,
    i_ref: float,
    settings: SpuriousSettings,
) -> Optional[dict]:
    if profile.max() <= 0:
        return None
    x, p = _on_segment(values, profile, settings.on_fraction)
    n = x.size
    if n < settings.min_points:
        return None
    mean = float(p.mean())
    if mean < settings.min_mean_fraction * i_ref:
        return None

    h = float(x[1] - x[0])
    window = get_window("hann", n)
    spectrum = rfft(np.gradient(p, h) * window)
    power = np.abs(spectrum) ** 2
    freqs = rfftfreq(n, d=h)
    lo = settings.min_bin
    if power.size <= lo + 1:
        return None

    k = lo + int(np.argmax(power[lo:-1]))
    peak = power[k]
    if not (peak > power[k - 1] and peak > power[k + 1]):
        return None
    sidelobes = [power[j] for j in (k - 2, k + 2) if 0 <= j < power.size]
    if sidelobes and peak < settings.sidelobe_ratio * max(sidelobes):
        return None
    background = float(np.median(power[lo:]))
    strength = float(peak / background) if background > 0 else float("inf")
    if strength < settings.min_strength:
        return None

    l0, l1, l2 = np.log(power[k - 1: k + 2] + np.finfo(float).tiny)
    denom = l0 - 2.0 * l1 + l2
    shift = 0.5 * (l0 - l2) / denom if denom < 0 else 0.0
    df = float(freqs[1])
    f = float(freqs[k] + np.clip(shift, -0.5, 0.5) * df)

    amplitude = 2.0 * float(np.abs(spectrum[k])) / float(window.sum()) / (2.0 * np.pi * f)
    modulation = amplitude / mean
    if modulation < settings.min_modulation:
        return None
    return {"period": 1.0 / f, "strength": strength, "modulation": modulation, "frequency_bin": df}


def detect_spurious(
    record: MeasurementRecord,
    channel: int,
    settings: Optional[SpuriousSettings] = None,
) -> List[SpuriousDetection]:
    """Find barrier axes carrying oscillations of a spurious dot.

    Works on a 2D barrier map and, for single-axis checks, on a 1D barrier
    sweep. Each axis is tested on the map averaged along the other axis.

    Args:
        record: Barrier map (or 1D barrier sweep) of the row
        channel: Column to analyze
        settings: Detection thresholds

    Returns:
        List[SpuriousDetection]: One entry per affected axis, empty if none

    Raises:
        DimensionalityError: If an axis is not one of the row's barriers
    """
    settings = settings or SpuriousSettings()
    roles = {record.routing.source_barrier: "bs", record.routing.drain_barrier: "bd"}
    gates = [a.gate for a in record.spec.axes]
    unknown = [g for g in gates if g not in roles]
    if unknown:
        raise DimensionalityError(f"spurious detection needs barrier axes, got {gates}")

    grid = record.grid(channel)
    i_ref = record.metadata.reference_currents.get(channel, 0.0)
    found: List[SpuriousDetection] = []
    for i, gate in enumerate(gates):
        other = tuple(j for j in range(grid.ndim) if j != i)
        profile = grid.mean(axis=other) if other else grid
        values = record.axis_values(gate)
        if values[1] < values[0]:
            values, profile = values[::-1], profile[::-1]
        hit = _analyze_profile(values, np.abs(profile), i_ref, settings)
        if hit is not None:
            found.append(SpuriousDetection(axis=roles[gate], gate=gate, **hit))
            logger.debug(
                "channel %d: spurious oscillation on %s, period %.1f mV, strength %.1f",
                channel, gate, 1e3 * hit["period"], hit["strength"],
            )
    return found
