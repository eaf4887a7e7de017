"""Probit Statistics

Sorted threshold voltages are mapped through the inverse normal CDF. A
Gaussian population then lies on a straight line whose slope is its standard
deviation; outliers bend the tails away from it. Restricting the fit to the
central |z| <= 1 band gives a spread estimate that ignores them.
"""

import logging
from typing import Iterable, List, Optional, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator
from scipy.stats import norm, truncnorm

from qdarray.exceptions import ConfigurationError, InsufficientDataError

logger = logging.getLogger(__name__)

MIN_VALUES = 3
Z_LIMIT = 1.0
TRUNCATED_STD = float(truncnorm(-Z_LIMIT, Z_LIMIT).std())
SIGMA_METHODS = ("slope", "truncated")


# Pydantic Models
class ProbitResult(BaseModel):
    """Probit transform of one population, with the spread estimates once computed."""
    model_config = ConfigDict(frozen=True)

    sorted_values: List[float]
    z_scores: List[float]
    sigma_raw: Optional[float] = None
    sigma_filtered: Optional[float] = None
    mu_filtered: Optional[float] = None
    kept: Optional[int] = None
    method: Optional[str] = None

    @model_validator(mode="after")
    def consistent(self) -> "ProbitResult":
        if len(self.sorted_values) != len(self.z_scores):
            raise ValueError("one z-score per value")
        if np.any(np.diff(self.z_scores) <= 0):
            raise ValueError("z-scores must be strictly increasing")
        if self.sigma_raw is not None and self.sigma_raw < 0:
            raise ValueError("sigma_raw must be non-negative")
        if self.kept is not None and self.kept > len(self.sorted_values):
            raise ValueError("kept cannot exceed the number of values")
        return self

    @property
    def n(self) -> int:
        return len(self.sorted_values)


# Utility Functions
def plotting_positions(n: int) -> np.ndarray:
    """z-scores of the (i - 0.5) / n positions, exactly antisymmetric."""
    p = (np.arange(1, n + 1) - 0.5) / n
    z = norm.ppf(p)
    return 0.5 * (z - z[::-1])


def probit_transform(values: Sequence[float]) -> ProbitResult:
    """Sort values and assign normal z-scores.

    Ties keep their input order.

    Raises:
        InsufficientDataError: If fewer than 3 values are given
    """
    v = np.asarray(values, dtype=float)
    if v.size < MIN_VALUES:
        raise InsufficientDataError(f"probit needs at least {MIN_VALUES} values, got {v.size}")
    order = np.argsort(v, kind="stable")
    return ProbitResult(sorted_values=v[order].tolist(), z_scores=plotting_positions(v.size).tolist())


def gaussian_sigma_filtered(
    values: Sequence[float],
    method: str = "slope",
    z_limit: float = Z_LIMIT,
) -> ProbitResult:
    """Spread of the Gaussian component of a population.

    Args:
        values: Population (e.g. threshold voltages)
        method: ``slope`` fits value against z over |z| <= z_limit and reports
            slope and intercept; ``truncated`` divides the standard deviation
            of the kept values by that of a unit normal truncated to the band
        z_limit: Half-width of the kept z band

    Returns:
        ProbitResult: Complete result including sigma_raw and sigma_filtered

    Raises:
        InsufficientDataError: If fewer than 3 values fall in the band
        ConfigurationError: For an unknown method
    """
    if method not in SIGMA_METHODS:
        raise ConfigurationError(f"unknown sigma method {method!r}, expected one of {SIGMA_METHODS}")
    base = probit_transform(values)
    v = np.asarray(base.sorted_values)
    z = np.asarray(base.z_scores)
    keep = np.abs(z) <= z_limit
    kept = int(keep.sum())
    if kept < MIN_VALUES:
        raise InsufficientDataError(f"only {kept} values with |z| <= {z_limit}")

    if method == "slope":
        slope, intercept = np.polyfit(z[keep], v[keep], 1)
        sigma, mu = float(slope), float(intercept)
    else:
        scale = TRUNCATED_STD if z_limit == Z_LIMIT else float(truncnorm(-z_limit, z_limit).std())
        sigma = float(np.std(v[keep]) / scale)
        mu = float(np.mean(v[keep]))

    return base.model_copy(update={
        "sigma_raw": float(np.std(v, ddof=1)),
        "sigma_filtered": sigma,
        "mu_filtered": mu,
        "kept": kept,
        "method": method,
    })


def is_central(row: int, col: int, n: int) -> bool:
    """Dot outside the outer rows and columns."""
    return 1 < row < n and 1 < col < n


def is_central_segment(k: int, col: int, n: int) -> bool:
    """Barrier segment between two central rows, in a central column."""
    return 2 <= k <= n and 1 < col < n


def central_values(entries: Iterable, n: int, enabled: bool = True, segment: bool = False) -> List[float]:
    """Values of (row_or_k, col, value) entries kept by the central filter."""
    test = is_central_segment if segment else is_central
    return [value for a, col, value in entries if not enabled or test(a, col, n)]
