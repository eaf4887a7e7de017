"""Shared fixtures."""

import json
from typing import Dict, List, Optional

import numpy as np
import pytest

from qdarray.device import default_disorder, synthesize_sample
from qdarray.models import (
    ArrayGeometry,
    DotGroundTruth,
    MeasurementRecord,
    OxideStack,
    RecordMetadata,
    RoutingPlan,
    SweepAxis,
    SweepSpec,
)


@pytest.fixture
def disorder():
    return default_disorder()


@pytest.fixture
def stack():
    return OxideStack(t1=15.0)


@pytest.fixture
def small_sample(disorder, stack):
    return synthesize_sample(ArrayGeometry(n=3), stack, disorder, seed=1234, label="S")


@pytest.fixture
def make_dot():
    def factory(**overrides) -> DotGroundTruth:
        values = dict(
            row=1, col=1, vt_plunger=0.6, c_p=20.0, c_sigma=100.0, gmax=2e-6,
            lever_bs=0.05, lever_bd=0.05, vt_bs=0.9, vt_bd=0.9,
        )
        values.update(overrides)
        return DotGroundTruth(**values)
    return factory


def routing_plan(n: int = 1, row: int = 1) -> RoutingPlan:
    extenders = [f"P{i}" for i in range(1, n + 1) if i != row]
    extenders += [f"B{k}" for k in range(1, n + 2) if k not in (row, row + 1)]
    return RoutingPlan(
        array_size=n, row_under_test=row, plunger_gate=f"P{row}",
        source_barrier=f"B{row}", drain_barrier=f"B{row + 1}", extender_gates=extenders,
    )


@pytest.fixture
def make_record():
    """Record built straight from current grids, bypassing the sweep engine."""
    def factory(
        axes: List[SweepAxis],
        grids: Dict[int, np.ndarray],
        i_ref: Optional[Dict[int, float]] = None,
        noise: Optional[Dict[int, float]] = None,
        v_sd: float = 1e-3,
        n: int = 1,
        row: int = 1,
        fridge_temperature: float = 0.01,
        kind: str = "",
    ) -> MeasurementRecord:
        channels = sorted(grids)
        spec = SweepSpec(axes=axes, v_sd=v_sd, channels=channels, fridge_temperature=fridge_temperature)
        return MeasurementRecord(
            spec=spec,
            routing=routing_plan(n, row),
            currents={c: np.asarray(grids[c], dtype=float).ravel().tolist() for c in channels},
            metadata=RecordMetadata(
                reference_currents=i_ref or {c: 2e-9 for c in channels},
                noise_sigma=noise or {c: 0.0 for c in channels},
                electron_temperature=1.4,
                kind=kind,
            ),
        )
    return factory


def small_config(**overrides) -> dict:
    """Two tiny samples with coarse sweeps."""
    config = {
        "master_seed": 20240601,
        "samples": [
            {"label": "A", "t1": 12.0, "geometry": {"n": 3}},
            {"label": "B", "t1": 20.0, "geometry": {"n": 3}},
        ],
        "sweeps": {
            "turn_on": {"points": 161},
            "barrier_map": {"points": 61},
            "diamond": {"plunger_points": 61, "v_sd_points": 61},
        },
    }
    config.update(overrides)
    return config


@pytest.fixture
def config_file(tmp_path):
    def factory(**overrides) -> str:
        path = tmp_path / "config.json"
        path.write_text(json.dumps(small_config(**overrides), indent=2), encoding="utf-8")
        return str(path)
    return factory
