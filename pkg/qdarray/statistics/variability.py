"""Variability Versus Oxide Thickness

Per-sample threshold spreads are keyed by the oxide thickness under their
gate layer: t2 for plungers, t3 for barriers. Samples sharing a thickness are
averaged; no smoothing is applied.
"""

import logging
from typing import Optional, Sequence

import pandas as pd
from pydantic import BaseModel, ConfigDict, field_validator

from qdarray.exceptions import InsufficientDataError
from qdarray.models import OxideStack
from qdarray.statistics.probit import gaussian_sigma_filtered

logger = logging.getLogger(__name__)

FAMILIES = ("plunger", "barrier")
CURVE_COLUMNS = ["family", "t_gate", "sigma", "sigma_filtered", "n_samples"]


class VariabilityPoint(BaseModel):
    """Spread of one gate family in one sample (volts)."""
    model_config = ConfigDict(frozen=True)

    family: str
    label: str
    t1: float
    t_gate: float
    sigma: float
    sigma_filtered: float
    n_values: int

    @field_validator("family")
    @classmethod
    def known_family(cls, v: str) -> str:
        if v not in FAMILIES:
            raise ValueError(f"family must be one of {FAMILIES}")
        return v


def gate_thickness(stack: OxideStack, family: str) -> float:
    return stack.t2 if family == "plunger" else stack.t3


def family_variability(
    values: Sequence[float],
    stack: OxideStack,
    family: str,
    label: str = "",
    method: str = "slope",
) -> VariabilityPoint:
    """Raw and filtered spread of one family's thresholds in one sample."""
    result = gaussian_sigma_filtered(values, method=method)
    return VariabilityPoint(
        family=family,
        label=label,
        t1=stack.t1,
        t_gate=gate_thickness(stack, family),
        sigma=result.sigma_raw,
        sigma_filtered=result.sigma_filtered,
        n_values=result.n,
    )


def variability_curve(points: Sequence[VariabilityPoint]) -> pd.DataFrame:
    """Plot-ready table of (family, t_gate, sigma, sigma_filtered, n_samples).

    Raises:
        InsufficientDataError: If fewer than two samples are given
    """
    if len({p.label for p in points}) < 2:
        raise InsufficientDataError("a variability curve needs at least two samples")
    frame = pd.DataFrame([p.model_dump() for p in points])
    curve = (
        frame.groupby(["family", "t_gate"], sort=True)
        .agg(sigma=("sigma", "mean"), sigma_filtered=("sigma_filtered", "mean"), n_samples=("label", "nunique"))
        .reset_index()
    )
    return curve[CURVE_COLUMNS]


def curve_minimum(curve: pd.DataFrame, family: str, column: str = "sigma_filtered") -> Optional[float]:
    """Gate thickness at which a family's spread is smallest."""
    rows = curve[curve["family"] == family]
    if rows.empty:
        return None
    return float(rows.loc[rows[column].idxmin(), "t_gate"])
