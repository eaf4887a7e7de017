"""Coulomb Diamond Extraction

Locates the edges of the first complete blockade diamond in a
(plunger, source-drain bias) scan and fits straight lines through them.

Procedure:
1. Every bias row is smoothed and differentiated along the plunger axis;
   maxima of +dI/dV mark rising edges, maxima of -dI/dV falling edges.
2. The rows at +-delta_cut around zero bias anchor the first blockaded valley
   (a falling edge followed by a rising edge).
3. The valley is followed row by row away from zero bias until it closes.
4. Four edge lines are fitted, then refitted using only rows inside the
   middle band of the diamond height, away from thermal rounding near zero
   bias and from the tips.
"""

import logging
from typing import Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator
from scipy.ndimage import uniform_filter1d
from scipy.signal import find_peaks

from qdarray.constants import ATTO, CONSTANTS, PhysicalConstants
from qdarray.exceptions import DimensionalityError, GeometryError, UnfittableDiamondError
from qdarray.models import VSD_AXIS, MeasurementRecord

logger = logging.getLogger(__name__)

EDGE_NAMES = ("left_upper", "left_lower", "right_upper", "right_lower")


# Pydantic Models
class DiamondFitSettings(BaseModel):
    model_config = ConfigDict(frozen=True)

    smoothing: int = 3
    delta_cut_steps: int = 2
    edge_fraction: float = 0.15
    edge_noise_factor: float = 5.0
    signal_noise_factor: float = 8.0
    min_signal_fraction: float = 1e-3
    band: Tuple[float, float] = (0.25, 0.8)


class DiamondFit(BaseModel):
    """Extracted diamond. Edge lines are ``v_sd = slope * v_plunger + intercept``
    in the order left-upper, left-lower, right-upper, right-lower."""
    model_config = ConfigDict(frozen=True)

    c_p: float  # aF
    c_sigma: float  # aF
    alpha: float
    e_c: float  # meV
    edge_lines: List[Tuple[float, float]]
    quality: float
    width: float  # V
    height: float  # V
    left_vertex: float  # V
    right_vertex: float  # V
    n_points: int

    @model_validator(mode="after")
    def identities(self) -> "DiamondFit":
        if not 0 < self.alpha < 1:
            raise ValueError("lever arm must lie in (0, 1)")
        if abs(self.alpha * self.c_sigma - self.c_p) > 1e-9 * self.c_p:
            raise ValueError("alpha must equal c_p / c_sigma")
        e_c = 1e3 * CONSTANTS.e_charge / (self.c_sigma * ATTO)
        if abs(self.e_c - e_c) > 1e-9 * e_c:
            raise ValueError("e_c must equal e^2 / c_sigma")
        return self


# Utility Functions
def _refine(d: np.ndarray, i: int) -> float:
    y0, y1, y2 = d[i - 1], d[i], d[i + 1]
    denom = y0 - 2.0 * y1 + y2
    if denom >= 0:
        return 0.0
    return float(np.clip(0.5 * (y0 - y2) / denom, -0.5, 0.5))


class _EdgeFinder:
    """Edge positions per bias row, computed on demand."""

    def __init__(self, current: np.ndarray, vp: np.ndarray, settings: DiamondFitSettings,
                 noise_sigma: float, i_ref: float):
        self.current = np.abs(current)
        self.vp = vp
        self.h = float(vp[1] - vp[0])
        self.settings = settings
        self.noise_sigma = noise_sigma
        self.signal_floor = max(settings.signal_noise_factor * noise_sigma, settings.min_signal_fraction * i_ref)
        self._cache: Dict[int, Tuple[np.ndarray, np.ndarray]] = {}

    def _peaks(self, d: np.ndarray, height: float) -> np.ndarray:
        idx, _ = find_peaks(d, height=height)
        return np.array([self.vp[i] + _refine(d, i) * self.h for i in idx])

    def edges(self, row: int) -> Tuple[np.ndarray, np.ndarray]:
        if row not in self._cache:
            s = uniform_filter1d(self.current[row], size=self.settings.smoothing, mode="nearest")
            if np.ptp(s) <= self.signal_floor:
                self._cache[row] = (np.array([]), np.array([]))
            else:
                d = np.gradient(s, self.vp)
                height = max(
                    self.settings.edge_fraction * float(np.max(np.abs(d))),
                    self.settings.edge_noise_factor * self.noise_sigma / (3.0 * self.h),
                )
                self._cache[row] = (self._peaks(d, height), self._peaks(-d, height))
        return self._cache[row]

    def valleys(self, row: int) -> List[Tuple[float, float]]:
        rising, falling = self.edges(row)
        events = sorted([(v, 1) for v in rising] + [(v, -1) for v in falling])
        return [
            (events[i][0], events[i + 1][0])
            for i in range(len(events) - 1)
            if events[i][1] == -1 and events[i + 1][1] == 1
        ]

    def valley_around(self, row: int, center: float) -> Optional[Tuple[float, float]]:
        rising, falling = self.edges(row)
        left = falling[falling < center]
        right = rising[rising > center]
        if left.size == 0 or right.size == 0:
            return None
        return float(left.max()), float(right.min())


def _oriented(record: MeasurementRecord, channel: int):
    if record.ndim != 2:
        raise DimensionalityError(f"diamond fit needs a 2D record, got {record.ndim}D")
    gates = [a.gate for a in record.spec.axes]
    plunger = record.routing.plunger_gate
    if sorted(gates) != sorted([plunger, VSD_AXIS]):
        raise DimensionalityError(f"diamond scan must sweep {plunger} and {VSD_AXIS}, got {gates}")
    grid = record.grid(channel)
    if gates[0] == plunger:
        grid = grid.T
    vp = record.axis_values(plunger)
    vsd = record.axis_values(VSD_AXIS)
    if vp[1] < vp[0]:
        vp, grid = vp[::-1], grid[:, ::-1]
    if vsd[1] < vsd[0]:
        vsd, grid = vsd[::-1], grid[::-1, :]
    return vp, vsd, grid


def _fit_line(points: List[Tuple[float, float]]) -> Optional[Tuple[float, float, float]]:
    """Least-squares v_plunger = m * v_sd + q; returns (m, q, rms)."""
    if len(points) < 2:
        return None
    s = np.array([p[1] for p in points])
    v = np.array([p[0] for p in points])
    if np.ptp(s) == 0:
        return None
    m, q = np.polyfit(s, v, 1)
    rms = float(np.sqrt(np.mean((m * s + q - v) ** 2)))
    return float(m), float(q), rms


def _fit_edges(edges: Dict[str, List[Tuple[float, float]]]) -> Dict[str, Tuple[float, float, float]]:
    lines = {}
    for name in EDGE_NAMES:
        line = _fit_line(edges[name])
        if line is None:
            raise UnfittableDiamondError(f"too few points on the {name.replace('_', '-')} edge")
        lines[name] = line
    return lines


def _tips(lines: Dict[str, Tuple[float, float, float]]) -> Tuple[float, float]:
    m_lu, q_lu, _ = lines["left_upper"]
    m_ru, q_ru, _ = lines["right_upper"]
    m_ll, q_ll, _ = lines["left_lower"]
    m_rl, q_rl, _ = lines["right_lower"]
    if m_lu == m_ru or m_ll == m_rl:
        raise GeometryError("parallel diamond edges")
    return (q_ru - q_lu) / (m_lu - m_ru), (q_rl - q_ll) / (m_ll - m_rl)


def _height(lines) -> float:
    top, bottom = _tips(lines)
    height = 0.5 * (top - bottom)
    if not np.isfinite(height) or height <= 0:
        raise GeometryError(f"negative extracted diamond height {height:.3e} V")
    return float(height)


def trace_edges(finder: _EdgeFinder, vsd: np.ndarray, settings: DiamondFitSettings) -> Dict[str, List[Tuple[float, float]]]:
    """Edge points (v_plunger, v_sd) of the first complete valley, per edge."""
    i0 = int(np.argmin(np.abs(vsd)))
    step = float(abs(vsd[1] - vsd[0]))
    if abs(vsd[i0]) > 0.5 * step:
        raise UnfittableDiamondError("scan has no zero-bias row")
    dc = settings.delta_cut_steps
    up, down = i0 + dc, i0 - dc
    if down < 0 or up >= vsd.size:
        raise UnfittableDiamondError("scan too small for the zero-bias line cuts")

    up_valleys, down_valleys = finder.valleys(up), finder.valleys(down)
    if not up_valleys or not down_valleys:
        raise UnfittableDiamondError("no blockaded valley near zero bias")
    f_up, r_up = up_valleys[0]
    c_up = 0.5 * (f_up + r_up)
    f_dn, r_dn = min(down_valleys, key=lambda fr: abs(0.5 * (fr[0] + fr[1]) - c_up))
    anchor = 0.5 * (c_up + 0.5 * (f_dn + r_dn))

    edges: Dict[str, List[Tuple[float, float]]] = {name: [] for name in EDGE_NAMES}
    for sign, side in ((1, "upper"), (-1, "lower")):
        center, prev_width = anchor, np.inf
        row = i0 + sign
        while 0 <= row < vsd.size:
            valley = finder.valley_around(row, center)
            if valley is None:
                break
            f, r = valley
            width = r - f
            if width < 2 * finder.h or width > prev_width + 2 * finder.h:
                break
            edges[f"left_{side}"].append((f, float(vsd[row])))
            edges[f"right_{side}"].append((r, float(vsd[row])))
            center, prev_width = 0.5 * (f + r), width
            row += sign
    return edges


def fit_diamond(
    record: MeasurementRecord,
    channel: int,
    settings: Optional[DiamondFitSettings] = None,
    constants: PhysicalConstants = CONSTANTS,
) -> DiamondFit:
    """Extract C_P, C_sigma, lever arm and charging energy from one channel.

    Args:
        record: 2D scan over the row's plunger and ``VSD``
        channel: Column to fit
        settings: Edge detection settings

    Returns:
        DiamondFit: Extracted parameters and fitted edge lines

    Raises:
        DimensionalityError: If the record is not a plunger/bias scan
        UnfittableDiamondError: If the edges cannot be found
        GeometryError: If the fitted edges give a non-physical diamond
    """
    settings = settings or DiamondFitSettings()
    vp, vsd, grid = _oriented(record, channel)
    finder = _EdgeFinder(
        grid, vp, settings,
        noise_sigma=record.metadata.noise_sigma.get(channel, 0.0),
        i_ref=record.metadata.reference_currents.get(channel, 0.0),
    )
    edges = trace_edges(finder, vsd, settings)
    lines = _fit_edges(edges)
    first_height = _height(lines)

    lo, hi = settings.band[0] * first_height, settings.band[1] * first_height
    used = 0
    for name in EDGE_NAMES:
        banded = [p for p in edges[name] if lo <= abs(p[1]) <= hi]
        refit = _fit_line(banded)
        if refit is None:
            logger.debug("%s edge: too few points in the fitting band, keeping first pass", name)
            used += len(edges[name])
        else:
            lines[name] = refit
            used += len(banded)

    height = _height(lines)
    left = 0.5 * (lines["left_upper"][1] + lines["left_lower"][1])
    right = 0.5 * (lines["right_upper"][1] + lines["right_lower"][1])
    width = right - left
    if width <= 0:
        raise GeometryError(f"non-positive diamond width {width:.3e} V")

    c_p = constants.e_charge / width / ATTO
    c_sigma = constants.e_charge / height / ATTO
    alpha = c_p / c_sigma
    if not 0 < alpha < 1:
        raise GeometryError(f"lever arm {alpha:.3f} outside (0, 1)")
    rms = float(np.sqrt(np.mean([lines[n][2] ** 2 for n in EDGE_NAMES])))
    edge_lines = [(1.0 / lines[n][0], -lines[n][1] / lines[n][0]) for n in EDGE_NAMES]
    return DiamondFit(
        c_p=c_p,
        c_sigma=c_sigma,
        alpha=alpha,
        e_c=1e3 * constants.e_charge / (c_sigma * ATTO),
        edge_lines=edge_lines,
        quality=float(max(0.0, 1.0 - rms / width)),
        width=float(width),
        height=height,
        left_vertex=float(left),
        right_vertex=float(right),
        n_points=used,
    )
