"""Barrier Map Analysis

Finds Coulomb-oscillation regions in 2D (source barrier, drain barrier) maps
and chooses one barrier bias point shared by as many columns of a row as
possible, falling back to per-column points for the rest.
"""

import logging
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator
from scipy.ndimage import uniform_filter

from qdarray.exceptions import DimensionalityError
from qdarray.models import MeasurementRecord

logger = logging.getLogger(__name__)


# Pydantic Models
class BarrierMapSettings(BaseModel):
    model_config = ConfigDict(frozen=True)

    smoothing: int = 3
    diagonal_half_window: int = 8
    osc_noise_factor: float = 3.0
    osc_min_fraction: float = 0.02
    current_window: Tuple[float, float] = (0.05, 0.8)


class BiasCandidate(BaseModel):
    """A bias point with Coulomb oscillations inside the usable current window."""
    model_config = ConfigDict(frozen=True)

    v_bs: float
    v_bd: float
    contrast: float
    mean_current: float

    @property
    def point(self) -> Tuple[float, float]:
        return self.v_bs, self.v_bd


class BarrierMapAnalysis(BaseModel):
    """Per-channel map analysis; grids are indexed [i_bs, i_bd]."""
    model_config = ConfigDict(frozen=True)

    channel: int
    v_bs: List[float]
    v_bd: List[float]
    contrast: List[List[float]]
    mask: List[List[bool]]
    threshold: float
    candidates: List[BiasCandidate]


class CommonBiasDecision(BaseModel):
    """Outcome of the shared-bias selection for one row."""
    model_config = ConfigDict(frozen=True)

    row: int = 0
    shared_point: Optional[Tuple[float, float]] = None
    shared_ok: List[int] = []
    individual_points: Dict[int, Tuple[float, float]] = {}
    failed: List[int] = []

    @model_validator(mode="after")
    def partition(self) -> "CommonBiasDecision":
        groups = [set(self.shared_ok), set(self.individual_points), set(self.failed)]
        if sum(len(g) for g in groups) != len(set().union(*groups)):
            raise ValueError("shared, individual and failed columns must be disjoint")
        return self

    @property
    def measured(self) -> List[int]:
        return sorted(set(self.shared_ok) | set(self.individual_points) | set(self.failed))

    def bias_for(self, col: int) -> Optional[Tuple[float, float]]:
        if col in self.shared_ok:
            return self.shared_point
        return self.individual_points.get(col)

    def mode_for(self, col: int) -> str:
        if col in self.shared_ok:
            return "shared"
        if col in self.individual_points:
            return "individual"
        return "failed"


# Utility Functions
def _oriented_grid(record: MeasurementRecord, channel: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    if record.ndim != 2:
        raise DimensionalityError(f"barrier map needs a 2D record, got {record.ndim}D")
    source, drain = record.routing.source_barrier, record.routing.drain_barrier
    gates = [a.gate for a in record.spec.axes]
    if sorted(gates) != sorted([source, drain]):
        raise DimensionalityError(f"barrier map must sweep {source} and {drain}, got {gates}")
    grid = record.grid(channel)
    if gates[0] == drain:
        grid = grid.T
    return record.axis_values(source), record.axis_values(drain), grid


def diagonal_windows(grid: np.ndarray, half_window: int) -> np.ndarray:
    """Stack of the grid shifted along the (1, 1) diagonal, NaN beyond the edges."""
    w = half_window
    padded = np.pad(grid, w, mode="constant", constant_values=np.nan)
    n0, n1 = grid.shape
    return np.stack([padded[w + t:w + t + n0, w + t:w + t + n1] for t in range(-w, w + 1)])


def analyze_barrier_map(
    record: MeasurementRecord,
    channel: int,
    settings: Optional[BarrierMapSettings] = None,
) -> BarrierMapAnalysis:
    """Detect Coulomb oscillations in one channel of a barrier map.

    Contrast at a point is the peak-to-valley range of the smoothed current
    along the diagonal window through it, minus the net change across the
    window so that monotone turn-on edges do not count as oscillations.

    Args:
        record: 2D sweep of the row's source and drain barriers
        channel: Column to analyze
        settings: Detection thresholds

    Returns:
        BarrierMapAnalysis: Contrast grid, oscillation mask and candidates

    Raises:
        DimensionalityError: If the record is not a 2D barrier map
    """
    settings = settings or BarrierMapSettings()
    v_bs, v_bd, grid = _oriented_grid(record, channel)
    smoothed = uniform_filter(grid, size=settings.smoothing, mode="nearest")
    windows = diagonal_windows(smoothed, settings.diagonal_half_window)

    complete = ~np.isnan(windows).any(axis=0)
    filled = np.where(np.isnan(windows), 0.0, windows)
    trend = np.abs(filled[-1] - filled[0])
    contrast = np.where(complete, filled.max(axis=0) - filled.min(axis=0) - trend, 0.0)
    mean = filled.mean(axis=0)

    i_open = record.metadata.reference_currents[channel]
    sigma = record.metadata.noise_sigma.get(channel, 0.0)
    threshold = max(settings.osc_noise_factor * sigma, settings.osc_min_fraction * i_open)
    mask = complete & (contrast > threshold)
    lo, hi = settings.current_window
    usable = mask & (mean >= lo * i_open) & (mean <= hi * i_open)

    candidates = [
        BiasCandidate(
            v_bs=float(v_bs[i]), v_bd=float(v_bd[j]),
            contrast=float(contrast[i, j]), mean_current=float(mean[i, j]),
        )
        for i, j in zip(*np.nonzero(usable))
    ]
    logger.debug("channel %d: %d oscillating points, %d candidates", channel, int(mask.sum()), len(candidates))
    return BarrierMapAnalysis(
        channel=channel,
        v_bs=v_bs.tolist(),
        v_bd=v_bd.tolist(),
        contrast=contrast.tolist(),
        mask=mask.tolist(),
        threshold=threshold,
        candidates=candidates,
    )


def best_candidate(candidates: Sequence[BiasCandidate]) -> BiasCandidate:
    """Highest contrast, then lowest v_bs + v_bd."""
    return min(candidates, key=lambda c: (-c.contrast, c.v_bs + c.v_bd, c.v_bs))


def select_common_bias(
    candidate_sets: Mapping[int, Sequence[BiasCandidate]],
    row: int = 0,
) -> CommonBiasDecision:
    """Choose the bias point covered by the most columns.

    Ties break on the highest summed contrast, then the lowest v_bs + v_bd.
    Columns not covered get their own best candidate; columns without any
    candidate fail.

    Args:
        candidate_sets: Column -> candidate bias points (from one shared map grid)
        row: Row the decision belongs to

    Returns:
        CommonBiasDecision: Partition of the columns
    """
    coverage: Dict[Tuple[float, float], List[int]] = {}
    summed: Dict[Tuple[float, float], float] = {}
    for col, candidates in candidate_sets.items():
        for cand in candidates:
            coverage.setdefault(cand.point, [])
            if col not in coverage[cand.point]:
                coverage[cand.point].append(col)
            summed[cand.point] = summed.get(cand.point, 0.0) + cand.contrast

    if not coverage:
        return CommonBiasDecision(row=row, failed=sorted(candidate_sets))

    shared = min(coverage, key=lambda p: (-len(coverage[p]), -summed[p], p[0] + p[1], p[0]))
    shared_ok = sorted(coverage[shared])
    individual: Dict[int, Tuple[float, float]] = {}
    failed: List[int] = []
    for col in sorted(candidate_sets):
        if col in shared_ok:
            continue
        if candidate_sets[col]:
            individual[col] = best_candidate(candidate_sets[col]).point
        else:
            failed.append(col)
    logger.info(
        "row %d: shared bias (%.4f, %.4f) V covers %d columns, %d individual, %d failed",
        row, shared[0], shared[1], len(shared_ok), len(individual), len(failed),
    )
    return CommonBiasDecision(
        row=row, shared_point=shared, shared_ok=shared_ok,
        individual_points=individual, failed=failed,
    )
