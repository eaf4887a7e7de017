"""Yield Metrics"""

import logging
from typing import Mapping, Tuple

from pydantic import BaseModel, ConfigDict, model_validator

from qdarray.extraction.barrier_map import CommonBiasDecision

logger = logging.getLogger(__name__)


class YieldReport(BaseModel):
    """Fractions of measured dots with a fitted diamond.

    Dots never measured (dead columns) are not counted.
    """
    model_config = ConfigDict(frozen=True)

    measured: int
    shared_ok: int
    individual_ok: int
    row_shared_yield: float
    total_yield: float

    @model_validator(mode="after")
    def consistent(self) -> "YieldReport":
        if min(self.measured, self.shared_ok, self.individual_ok) < 0:
            raise ValueError("counts must be non-negative")
        if self.shared_ok + self.individual_ok > self.measured:
            raise ValueError("more successful dots than measured dots")
        if not 0.0 <= self.row_shared_yield <= self.total_yield <= 1.0:
            raise ValueError("require 0 <= row_shared_yield <= total_yield <= 1")
        return self

    @classmethod
    def from_counts(cls, measured: int, shared_ok: int, individual_ok: int) -> "YieldReport":
        if measured == 0:
            return cls(measured=0, shared_ok=0, individual_ok=0, row_shared_yield=0.0, total_yield=0.0)
        return cls(
            measured=measured,
            shared_ok=shared_ok,
            individual_ok=individual_ok,
            row_shared_yield=shared_ok / measured,
            total_yield=(shared_ok + individual_ok) / measured,
        )


def yield_metrics(
    decisions: Mapping[int, CommonBiasDecision],
    diamond_ok: Mapping[Tuple[int, int], bool],
) -> YieldReport:
    """Count dots whose diamond was fitted at the shared or at an individual bias.

    Args:
        decisions: Row -> bias decision of that row
        diamond_ok: (row, col) -> whether the diamond fit succeeded

    Returns:
        YieldReport: Counts and yields, zero yields when nothing was measured
    """
    measured = shared = individual = 0
    for row, decision in decisions.items():
        measured += len(decision.measured)
        shared += sum(1 for col in decision.shared_ok if diamond_ok.get((row, col), False))
        individual += sum(1 for col in decision.individual_points if diamond_ok.get((row, col), False))
    report = YieldReport.from_counts(measured, shared, individual)
    logger.debug("yield: %d shared + %d individual of %d measured", shared, individual, measured)
    return report
