"""Measurement Campaign

Row-by-row characterization of a synthesized sample:

1. turn-on sweeps of the plunger and both barriers of the row,
2. a barrier map around the row-median thresholds, with local maps for
   columns the shared map cannot serve,
3. one diamond scan at the shared barrier bias and one per individually
   biased column,
4. optionally, Coulomb-peak traces of one dot at several fridge temperatures.

Every record is written to disk and listed in a manifest. Seeds fan out from
the master seed: sample = (master, "sample", label), measurement =
(sample, "measure"), record = (measurement, kind, row[, col[, index]]).
"""

import json
import logging
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from qdarray import rng
from qdarray.config import PipelineConfig, SampleSpec, TemperatureStudy
from qdarray.device import synthesize_sample
from qdarray.exceptions import FitError, QDArrayError, RecordFormatError, UnsupportedVersionError
from qdarray.extraction.barrier_map import (
    BarrierMapSettings,
    CommonBiasDecision,
    analyze_barrier_map,
    best_candidate,
    select_common_bias,
)
from qdarray.extraction.diamond import DiamondFitSettings, fit_diamond
from qdarray.extraction.threshold import SigmoidFit, fit_threshold
from qdarray.instrument import configure_row, run_sweep
from qdarray.models import VSD_AXIS, MeasurementRecord, RoutingPlan, SampleInstance, SweepAxis, SweepSpec
from qdarray.records import load_record, save_record

logger = logging.getLogger(__name__)

MANIFEST_VERSION = 1
MANIFEST_NAME = "manifest.json"
SAMPLE_NAME = "sample.json"
RECORD_DIR = "records"
TURN_ON_KINDS = {"plunger": "turn_on_plunger", "source": "turn_on_source", "drain": "turn_on_drain"}
TURN_ON_FLOOR = 0.02  # of the open-channel current


# Pydantic Models
class ManifestEntry(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: str
    row: int
    col: Optional[int] = None
    index: Optional[int] = None
    path: str  # relative to the sample directory
    channels: List[int]
    seed: int


class SkippedDot(BaseModel):
    model_config = ConfigDict(frozen=True)

    row: int
    col: int
    reason: str


class Manifest(BaseModel):
    """Index of the records measured on one sample."""
    model_config = ConfigDict(frozen=True)

    schema_version: int = MANIFEST_VERSION
    sample_label: str
    sample_seed: int
    measure_seed: int
    n: int
    entries: List[ManifestEntry] = Field(default_factory=list)
    decisions: List[CommonBiasDecision] = Field(default_factory=list)
    skipped: List[SkippedDot] = Field(default_factory=list)
    temperature_dot: Optional[Tuple[int, int]] = None

    def select(self, kind: str, row: Optional[int] = None, col: Optional[int] = None) -> List[ManifestEntry]:
        return [
            e for e in self.entries
            if e.kind == kind and (row is None or e.row == row) and (col is None or e.col == col)
        ]


class RowThresholds(BaseModel):
    """Turn-on fits of one row; flat traces are absent."""
    model_config = ConfigDict(frozen=True)

    plunger: Dict[int, SigmoidFit] = Field(default_factory=dict)
    source: Dict[int, SigmoidFit] = Field(default_factory=dict)
    drain: Dict[int, SigmoidFit] = Field(default_factory=dict)

    def own(self, which: str, col: int) -> Optional[float]:
        fit = getattr(self, which).get(col)
        return fit.v_t if fit is not None and fit.converged else None

    def reference(self, *which: str) -> Optional[float]:
        values = [f.v_t for w in which for f in getattr(self, w).values() if f.converged]
        return float(np.median(values)) if values else None


# Seeds and paths
def sample_seed(master_seed: int, label: str) -> int:
    return rng.derive_seed(master_seed, "sample", label)


def disorder_seed(master_seed: int, replica: Optional[int]) -> Optional[int]:
    """Seed of the threshold field shared by every sample of one replica."""
    return None if replica is None else rng.derive_seed(master_seed, "disorder", replica)


def measure_seed(seed_of_sample: int) -> int:
    return rng.derive_seed(seed_of_sample, "measure")


def record_seed(seed_of_measurement: int, kind: str, row: int, *more: int) -> int:
    return rng.derive_seed(seed_of_measurement, kind, row, *more)


def sample_dir(out_dir, label: str) -> Path:
    return Path(out_dir) / label


def record_name(kind: str, row: int, col: Optional[int] = None, index: Optional[int] = None) -> str:
    name = f"row{row}_{kind}"
    if col is not None:
        name += f"_c{col}"
    if index is not None:
        name += f"_{index}"
    return f"{RECORD_DIR}/{name}.dat"


def synthesize(spec: SampleSpec, config: PipelineConfig) -> SampleInstance:
    """Sample instance of one configured oxide condition."""
    return synthesize_sample(
        spec.geometry,
        spec.stack,
        spec.disorder_config(config.disorder),
        sample_seed(config.master_seed, spec.label),
        label=spec.label,
        dead_columns=spec.dead_columns,
        disorder_seed=disorder_seed(config.master_seed, spec.disorder_replica),
    )


# Row analysis, shared with the extraction step
def fit_row_thresholds(records: Mapping[str, MeasurementRecord], columns: Sequence[int]) -> RowThresholds:
    """Fit the three turn-on sweeps of a row for every column."""
    fits: Dict[str, Dict[int, SigmoidFit]] = {}
    for which, kind in TURN_ON_KINDS.items():
        fits[which] = {}
        record = records.get(kind)
        if record is None:
            continue
        voltages = record.spec.axes[0].values()
        for col in columns:
            floor = TURN_ON_FLOOR * record.metadata.reference_currents.get(col, 0.0)
            try:
                fits[which][col] = fit_threshold(list(zip(voltages, record.grid(col))), abs_floor=floor)
            except FitError as exc:
                logger.warning("row %d col %d %s: %s", record.routing.row_under_test, col, kind, exc.detail)
    return RowThresholds(**fits)


def decide_row_bias(
    row: int,
    columns: Sequence[int],
    map_record: Optional[MeasurementRecord],
    local_maps: Mapping[int, MeasurementRecord],
    settings: BarrierMapSettings,
) -> CommonBiasDecision:
    """Shared bias from the row map, then individual points from local maps for failed columns."""
    if map_record is None:
        return CommonBiasDecision(row=row, failed=sorted(columns))
    candidates = {col: analyze_barrier_map(map_record, col, settings).candidates for col in columns}
    decision = select_common_bias(candidates, row)
    rescued = {}
    for col in decision.failed:
        if col in local_maps:
            local = analyze_barrier_map(local_maps[col], col, settings).candidates
            if local:
                rescued[col] = best_candidate(local).point
    if not rescued:
        return decision
    logger.info("row %d: local maps recovered columns %s", row, sorted(rescued))
    return CommonBiasDecision(
        row=row,
        shared_point=decision.shared_point,
        shared_ok=decision.shared_ok,
        individual_points={**decision.individual_points, **rescued},
        failed=[c for c in decision.failed if c not in rescued],
    )


# Measurement
class RowMeasurement:
    """Sweeps of one row, written to disk as they are taken."""

    def __init__(self, sample: SampleInstance, row: int, config: PipelineConfig, seed: int, root: Path):
        self.sample = sample
        self.row = row
        self.config = config
        self.sweeps = config.sweeps
        self.seed = seed
        self.root = root
        self.plan: RoutingPlan = configure_row(
            sample, row, self.sweeps.accumulation_bias, self.sweeps.confinement_bias
        )
        self.entries: List[ManifestEntry] = []

    def take(self, kind: str, spec: SweepSpec, col: Optional[int] = None,
             index: Optional[int] = None, extra: Optional[Dict] = None) -> MeasurementRecord:
        keys = [k for k in (col, index) if k is not None]
        seed = record_seed(self.seed, kind, self.row, *keys)
        record = run_sweep(
            self.sample, self.plan, spec, seed,
            noise_fraction=self.sweeps.noise_fraction, t0=self.sweeps.t0,
            softness=self.sweeps.softness, kind=kind, extra=extra,
        )
        relative = record_name(kind, self.row, col, index)
        save_record(record, self.root / relative)
        self.entries.append(ManifestEntry(
            kind=kind, row=self.row, col=col, index=index, path=relative,
            channels=list(spec.channels), seed=seed,
        ))
        return record

    def _spec(self, axes: List[SweepAxis], channels: Sequence[int], v_sd: float,
              fixed: Optional[Dict[str, float]] = None, fridge: Optional[float] = None) -> SweepSpec:
        return SweepSpec(
            axes=axes,
            fixed_biases=fixed or {},
            v_sd=v_sd,
            channels=list(channels),
            fridge_temperature=self.sweeps.fridge_temperature if fridge is None else fridge,
        )

    def turn_on(self, columns: Sequence[int]) -> Dict[str, MeasurementRecord]:
        cfg = self.sweeps.turn_on
        gates = {
            "plunger": (self.plan.plunger_gate, cfg.plunger_range),
            "source": (self.plan.source_barrier, cfg.barrier_range),
            "drain": (self.plan.drain_barrier, cfg.barrier_range),
        }
        records = {}
        for which, (gate, (start, stop)) in gates.items():
            axes = [SweepAxis(gate=gate, start=start, stop=stop, points=cfg.points)]
            kind = TURN_ON_KINDS[which]
            records[kind] = self.take(kind, self._spec(axes, columns, cfg.v_sd))
        return records

    def barrier_map(self, channels: Sequence[int], v_plunger: float, vt_bs: float, vt_bd: float,
                    kind: str = "barrier_map", col: Optional[int] = None) -> MeasurementRecord:
        cfg = self.sweeps.barrier_map
        lo, hi = cfg.barrier_window
        axes = [
            SweepAxis(gate=self.plan.source_barrier, start=vt_bs + lo, stop=vt_bs + hi, points=cfg.points),
            SweepAxis(gate=self.plan.drain_barrier, start=vt_bd + lo, stop=vt_bd + hi, points=cfg.points),
        ]
        spec = self._spec(axes, channels, cfg.v_sd, {self.plan.plunger_gate: v_plunger})
        return self.take(kind, spec, col=col)

    def diamond(self, channels: Sequence[int], v_plunger: float, bias: Tuple[float, float],
                kind: str, col: Optional[int] = None) -> MeasurementRecord:
        cfg = self.sweeps.diamond
        start = v_plunger + cfg.plunger_offset
        axes = [
            SweepAxis(gate=self.plan.plunger_gate, start=start, stop=start + cfg.plunger_span,
                      points=cfg.plunger_points),
            SweepAxis(gate=VSD_AXIS, start=-cfg.v_sd_max, stop=cfg.v_sd_max, points=cfg.v_sd_points),
        ]
        fixed = {self.plan.source_barrier: bias[0], self.plan.drain_barrier: bias[1]}
        return self.take(kind, self._spec(axes, channels, cfg.reference_v_sd, fixed), col=col)

    def temperature_traces(self, study: TemperatureStudy, v_peak: float, bias: Tuple[float, float]) -> None:
        axes = [SweepAxis(gate=self.plan.plunger_gate, start=v_peak - study.half_window,
                          stop=v_peak + study.half_window, points=study.points)]
        fixed = {self.plan.source_barrier: bias[0], self.plan.drain_barrier: bias[1]}
        for index, t_fridge in enumerate(study.fridge_temperatures):
            spec = self._spec(axes, [study.col], study.v_sd, fixed, fridge=t_fridge)
            self.take("temperature", spec, col=study.col, index=index, extra={"t_fridge": t_fridge})


def diamond_record_for(records: Mapping[str, MeasurementRecord], decision: CommonBiasDecision,
                       col: int) -> Optional[MeasurementRecord]:
    """Diamond scan that contains a column: the shared scan or its own."""
    if col in decision.shared_ok:
        return records.get("diamond_shared")
    return records.get(f"diamond_individual_c{col}")


def measure_row(
    sample: SampleInstance,
    row: int,
    config: PipelineConfig,
    seed: int,
    root: Path,
) -> Tuple[List[ManifestEntry], CommonBiasDecision, List[SkippedDot], bool]:
    """Run the full protocol on one row.

    Returns:
        Tuple: Manifest entries, the bias decision, skipped dots and whether
        the temperature study was recorded on this row
    """
    n = sample.geometry.n
    dead = set(sample.dead_columns)
    skipped = [SkippedDot(row=row, col=c, reason="dead column") for c in sorted(dead)]
    columns = [c for c in range(1, n + 1) if c not in dead]
    run = RowMeasurement(sample, row, config, seed, root)
    if not columns:
        logger.warning("%s row %d: no live columns", sample.label, row)
        return run.entries, CommonBiasDecision(row=row), skipped, False

    thresholds = fit_row_thresholds(run.turn_on(columns), columns)
    ref_p = thresholds.reference("plunger")
    ref_b = thresholds.reference("source", "drain")
    map_settings = config.extraction.barrier_map
    if ref_p is None or ref_b is None:
        logger.warning("%s row %d: no converged turn-on fits, row not measured further", sample.label, row)
        return run.entries, CommonBiasDecision(row=row, failed=columns), skipped, False

    map_cfg = config.sweeps.barrier_map
    row_map = run.barrier_map(columns, ref_p + map_cfg.plunger_offset, ref_b, ref_b)
    decision = decide_row_bias(row, columns, row_map, {}, map_settings)
    local_maps: Dict[int, MeasurementRecord] = {}
    if map_cfg.local_maps:
        for col in decision.failed:
            own_p = thresholds.own("plunger", col)
            own_s = thresholds.own("source", col)
            own_d = thresholds.own("drain", col)
            if own_p is None or own_s is None or own_d is None:
                continue
            local_maps[col] = run.barrier_map([col], own_p + map_cfg.plunger_offset, own_s, own_d,
                                              kind="barrier_map_local", col=col)
        decision = decide_row_bias(row, columns, row_map, local_maps, map_settings)

    diamonds: Dict[str, MeasurementRecord] = {}
    if decision.shared_ok:
        diamonds["diamond_shared"] = run.diamond(decision.shared_ok, ref_p, decision.shared_point, "diamond_shared")
    for col, point in sorted(decision.individual_points.items()):
        v_p = thresholds.own("plunger", col)
        diamonds[f"diamond_individual_c{col}"] = run.diamond(
            [col], ref_p if v_p is None else v_p, point, "diamond_individual", col=col
        )

    study = config.temperature_study
    recorded = False
    if study is not None and study.sample == sample.label and study.row == row:
        recorded = _temperature_study(run, study, decision, diamonds, config.extraction.diamond)
    return run.entries, decision, skipped, recorded


def _temperature_study(run: RowMeasurement, study: TemperatureStudy, decision: CommonBiasDecision,
                       diamonds: Mapping[str, MeasurementRecord], settings: DiamondFitSettings) -> bool:
    bias = decision.bias_for(study.col)
    record = diamond_record_for(diamonds, decision, study.col)
    if bias is None or record is None:
        logger.warning("temperature study: dot (%d, %d) has no bias point", study.row, study.col)
        return False
    try:
        fit = fit_diamond(record, study.col, settings)
    except QDArrayError as exc:
        logger.warning("temperature study: cannot locate a peak of dot (%d, %d): %s", study.row, study.col, exc)
        return False
    run.temperature_traces(study, fit.left_vertex, bias)
    return True


def measure_sample(sample: SampleInstance, config: PipelineConfig, out_dir) -> Manifest:
    """Measure every row of a sample and write the manifest.

    Args:
        sample: Synthesized sample
        config: Campaign configuration
        out_dir: Output root; records go to ``<out_dir>/<label>/records``

    Returns:
        Manifest: Index of the written records
    """
    root = sample_dir(out_dir, sample.label)
    s_seed = sample_seed(config.master_seed, sample.label)
    m_seed = measure_seed(s_seed)
    entries: List[ManifestEntry] = []
    decisions: List[CommonBiasDecision] = []
    skipped: List[SkippedDot] = []
    temperature_dot = None
    for row in range(1, sample.geometry.n + 1):
        row_entries, decision, row_skipped, recorded = measure_row(sample, row, config, m_seed, root)
        entries.extend(row_entries)
        decisions.append(decision)
        skipped.extend(row_skipped)
        if recorded:
            temperature_dot = (config.temperature_study.row, config.temperature_study.col)
        logger.info(
            "%s row %d: %d shared, %d individual, %d failed",
            sample.label, row, len(decision.shared_ok), len(decision.individual_points), len(decision.failed),
        )
    manifest = Manifest(
        sample_label=sample.label,
        sample_seed=s_seed,
        measure_seed=m_seed,
        n=sample.geometry.n,
        entries=entries,
        decisions=decisions,
        skipped=skipped,
        temperature_dot=temperature_dot,
    )
    write_manifest(manifest, root / MANIFEST_NAME)
    return manifest


def write_manifest(manifest: Manifest, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(manifest.model_dump(mode="json"), sort_keys=True, indent=2) + "\n", encoding="utf-8")
    return path


def load_manifest(path) -> Manifest:
    path = Path(path)
    try:
        document = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise RecordFormatError(f"{path}: {exc}") from exc
    if document.get("schema_version") != MANIFEST_VERSION:
        raise UnsupportedVersionError(f"{path}: manifest version {document.get('schema_version')} is not supported")
    try:
        return Manifest.model_validate(document)
    except ValidationError as exc:
        raise RecordFormatError(f"{path}: invalid manifest ({exc})") from exc


def load_entry(root: Path, entry: ManifestEntry) -> MeasurementRecord:
    return load_record(root / entry.path)
