"""Extraction and Statistics Reports

Per-sample extraction re-derives every quantity from the record files listed
in a sample's manifest. Statistics aggregate the extraction reports across
samples. Both are written as versioned JSON with sorted keys; tables go to CSV
and, on request, plots to SVG.
"""

import json
import logging
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402
from pydantic import BaseModel, ConfigDict, Field, ValidationError  # noqa: E402

from qdarray.campaign import (  # noqa: E402
    MANIFEST_NAME,
    TURN_ON_KINDS,
    SkippedDot,
    decide_row_bias,
    diamond_record_for,
    fit_row_thresholds,
    load_manifest,
    sample_dir,
)
from qdarray.config import ExtractionSettings, PipelineConfig, SampleSpec, StatisticsSettings  # noqa: E402
from qdarray.exceptions import FitError, QDArrayError, RecordFormatError, UnsupportedVersionError  # noqa: E402
from qdarray.extraction.barrier_map import CommonBiasDecision  # noqa: E402
from qdarray.extraction.diamond import DiamondFit, fit_diamond  # noqa: E402
from qdarray.extraction.spurious import SpuriousDetection, detect_spurious  # noqa: E402
from qdarray.models import MeasurementRecord, OxideStack  # noqa: E402
from qdarray.records import load_record  # noqa: E402
from qdarray.statistics.capacitance import (  # noqa: E402
    DIAMOND_QUANTITIES,
    CapFitResult,
    QuantitySummary,
    capacitance_summary,
    empirical_cdf,
    fit_parallel_plate,
    parallel_plate,
)
from qdarray.statistics.probit import central_values, probit_transform  # noqa: E402
from qdarray.statistics.temperature import ETempResult, PeakTrace, fit_electron_temperature  # noqa: E402
from qdarray.statistics.variability import (  # noqa: E402
    FAMILIES,
    VariabilityPoint,
    curve_minimum,
    family_variability,
    variability_curve,
)
from qdarray.statistics.yields import YieldReport, yield_metrics  # noqa: E402

logger = logging.getLogger(__name__)

REPORT_VERSION = 1
EXTRACTION_NAME = "extraction.json"
STATISTICS_NAME = "statistics.json"
TABLE_DIR = "tables"
PLOT_DIR = "plots"


# Pydantic Models
class DotRecord(BaseModel):
    """Everything extracted for one measured dot."""
    model_config = ConfigDict(frozen=True)

    row: int
    col: int
    vt_plunger: Optional[float] = None
    vt_bs: Optional[float] = None
    vt_bd: Optional[float] = None
    bias_mode: str
    bias_point: Optional[Tuple[float, float]] = None
    diamond: Optional[DiamondFit] = None
    diamond_error: Optional[str] = None
    spurious: List[SpuriousDetection] = Field(default_factory=list)


class BarrierSegment(BaseModel):
    """Threshold of barrier gate B_k above column col."""
    model_config = ConfigDict(frozen=True)

    k: int
    col: int
    vt: float
    n_fits: int


class TemperatureStudyReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    row: int
    col: int
    alpha: Optional[float] = None
    e_c: Optional[float] = None
    result: Optional[ETempResult] = None
    error: Optional[str] = None


class ExtractionReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    schema_version: int = REPORT_VERSION
    sample_label: str
    t1: float
    delta2: float
    delta3: float
    n: int
    dots: List[DotRecord] = Field(default_factory=list)
    segments: List[BarrierSegment] = Field(default_factory=list)
    decisions: List[CommonBiasDecision] = Field(default_factory=list)
    skipped: List[SkippedDot] = Field(default_factory=list)
    temperature: Optional[TemperatureStudyReport] = None

    @property
    def stack(self) -> OxideStack:
        return OxideStack(t1=self.t1, delta2=self.delta2, delta3=self.delta3)

    def diamond_ok(self) -> Dict[Tuple[int, int], bool]:
        return {(d.row, d.col): d.diamond is not None for d in self.dots}

    def dot(self, row: int, col: int) -> Optional[DotRecord]:
        for d in self.dots:
            if (d.row, d.col) == (row, col):
                return d
        return None


class SampleStatistics(BaseModel):
    model_config = ConfigDict(frozen=True)

    label: str
    t1: float
    t2: float
    t3: float
    yields: YieldReport
    plunger: Optional[VariabilityPoint] = None
    barrier: Optional[VariabilityPoint] = None
    capacitance: Dict[str, QuantitySummary] = Field(default_factory=dict)
    n_diamonds: int
    spurious_segments: List[Tuple[int, int]] = Field(default_factory=list)
    temperature: Optional[ETempResult] = None


class CurvePoint(BaseModel):
    model_config = ConfigDict(frozen=True)

    family: str
    t_gate: float
    sigma: float
    sigma_filtered: float
    n_samples: int


class StatisticsReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    schema_version: int = REPORT_VERSION
    samples: List[SampleStatistics]
    variability: Optional[List[CurvePoint]] = None
    minima: Dict[str, float] = Field(default_factory=dict)
    capacitance_fit: Optional[CapFitResult] = None


# Extraction
class _RecordCache:
    def __init__(self, root: Path):
        self.root = root
        self._records: Dict[str, MeasurementRecord] = {}

    def get(self, path: str) -> MeasurementRecord:
        if path not in self._records:
            self._records[path] = load_record(self.root / path)
        return self._records[path]


def _fit_dot_diamond(record: Optional[MeasurementRecord], col: int, mode: str,
                     settings: ExtractionSettings) -> Tuple[Optional[DiamondFit], Optional[str]]:
    if record is None:
        return None, "no bias point" if mode == "failed" else "no diamond scan"
    try:
        return fit_diamond(record, col, settings.diamond), None
    except QDArrayError as exc:
        logger.warning("row %d col %d: diamond fit failed: %s", record.routing.row_under_test, col, exc.detail)
        return None, exc.detail


def _temperature_report(manifest, records: _RecordCache, dots: Sequence[DotRecord],
                        settings: StatisticsSettings) -> Optional[TemperatureStudyReport]:
    if manifest.temperature_dot is None:
        return None
    row, col = manifest.temperature_dot
    dot = next((d for d in dots if (d.row, d.col) == (row, col)), None)
    if dot is None or dot.diamond is None:
        return TemperatureStudyReport(row=row, col=col, error="no diamond fit for the study dot")
    entries = sorted(manifest.select("temperature", row, col), key=lambda e: e.index or 0)
    traces = []
    v_sd = 0.0
    for entry in entries:
        record = records.get(entry.path)
        v_sd = record.spec.v_sd
        traces.append(PeakTrace(
            t_fridge=record.spec.fridge_temperature,
            v_plunger=record.spec.axes[0].values().tolist(),
            current=record.grid(col).tolist(),
        ))
    try:
        result = fit_electron_temperature(
            traces, dot.diamond.alpha, v_sd, settings.delta_e_mev, dot.diamond.e_c,
            eta=settings.eta, separation=settings.regime_separation,
        )
    except QDArrayError as exc:
        logger.warning("temperature study of dot (%d, %d): %s", row, col, exc.detail)
        return TemperatureStudyReport(row=row, col=col, alpha=dot.diamond.alpha, e_c=dot.diamond.e_c,
                                      error=exc.detail)
    return TemperatureStudyReport(row=row, col=col, alpha=dot.diamond.alpha, e_c=dot.diamond.e_c, result=result)


def extract_sample(spec: SampleSpec, config: PipelineConfig, out_dir) -> ExtractionReport:
    """Re-derive thresholds, bias decisions, diamonds and spurious dots of one sample.

    Args:
        spec: Sample configuration (labels the output directory)
        config: Campaign configuration (extraction and statistics settings)
        out_dir: Output root holding ``<label>/manifest.json``

    Returns:
        ExtractionReport: Per-dot results and barrier-segment thresholds

    Raises:
        RecordFormatError: If the manifest or a record file is unreadable
    """
    root = sample_dir(out_dir, spec.label)
    manifest = load_manifest(root / MANIFEST_NAME)
    records = _RecordCache(root)
    settings = config.extraction

    dots: List[DotRecord] = []
    segment_fits: Dict[Tuple[int, int], List[float]] = {}
    decisions: List[CommonBiasDecision] = []
    for stored in manifest.decisions:
        row = stored.row
        columns = stored.measured
        if not columns:
            decisions.append(stored)
            continue
        turn_on = {kind: records.get(e.path) for kind in TURN_ON_KINDS.values() for e in manifest.select(kind, row)}
        thresholds = fit_row_thresholds(turn_on, columns)
        map_entries = manifest.select("barrier_map", row)
        row_map = records.get(map_entries[0].path) if map_entries else None
        local_maps = {e.col: records.get(e.path) for e in manifest.select("barrier_map_local", row)}
        decision = decide_row_bias(row, columns, row_map, local_maps, settings.barrier_map)
        if decision != stored:
            logger.warning("row %d: recomputed bias decision differs from the manifest", row)
        decisions.append(decision)

        diamonds = {}
        for entry in manifest.select("diamond_shared", row):
            diamonds["diamond_shared"] = records.get(entry.path)
        for entry in manifest.select("diamond_individual", row):
            diamonds[f"diamond_individual_c{entry.col}"] = records.get(entry.path)

        for col in columns:
            mode = decision.mode_for(col)
            fit, error = _fit_dot_diamond(diamond_record_for(diamonds, decision, col), col, mode, settings)
            spurious = detect_spurious(row_map, col, settings.spurious) if row_map is not None else []
            vt_bs, vt_bd = thresholds.own("source", col), thresholds.own("drain", col)
            if vt_bs is not None:
                segment_fits.setdefault((row, col), []).append(vt_bs)
            if vt_bd is not None:
                segment_fits.setdefault((row + 1, col), []).append(vt_bd)
            dots.append(DotRecord(
                row=row, col=col,
                vt_plunger=thresholds.own("plunger", col), vt_bs=vt_bs, vt_bd=vt_bd,
                bias_mode=mode, bias_point=decision.bias_for(col),
                diamond=fit, diamond_error=error, spurious=spurious,
            ))

    segments = [
        BarrierSegment(k=k, col=col, vt=float(np.mean(values)), n_fits=len(values))
        for (k, col), values in sorted(segment_fits.items())
    ]
    report = ExtractionReport(
        sample_label=spec.label,
        t1=spec.t1,
        delta2=spec.delta2,
        delta3=spec.delta3,
        n=manifest.n,
        dots=dots,
        segments=segments,
        decisions=decisions,
        skipped=manifest.skipped,
        temperature=_temperature_report(manifest, records, dots, config.statistics),
    )
    fitted = sum(1 for d in dots if d.diamond is not None)
    logger.info("%s: %d dots extracted, %d diamonds fitted", spec.label, len(dots), fitted)
    return report


def write_json(model: BaseModel, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    text = json.dumps(model.model_dump(mode="json"), sort_keys=True, indent=2)
    path.write_text(text + "\n", encoding="utf-8")
    return path


def load_extraction(path) -> ExtractionReport:
    path = Path(path)
    try:
        document = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise RecordFormatError(f"{path}: {exc}") from exc
    if document.get("schema_version") != REPORT_VERSION:
        raise UnsupportedVersionError(f"{path}: report version {document.get('schema_version')} is not supported")
    try:
        return ExtractionReport.model_validate(document)
    except ValidationError as exc:
        raise RecordFormatError(f"{path}: invalid extraction report ({exc})") from exc


# Statistics
def sample_statistics(report: ExtractionReport, settings: StatisticsSettings) -> Tuple[SampleStatistics, Dict[str, pd.DataFrame]]:
    """Yields, threshold spreads and capacitance distributions of one sample."""
    n = report.n
    stack = report.stack
    method = settings.sigma_method.value
    tables: Dict[str, pd.DataFrame] = {}
    families: Dict[str, Optional[VariabilityPoint]] = {}
    populations = {
        "plunger": central_values(
            [(d.row, d.col, d.vt_plunger) for d in report.dots if d.vt_plunger is not None],
            n, settings.central_filter,
        ),
        "barrier": central_values(
            [(s.k, s.col, s.vt) for s in report.segments], n, settings.central_filter, segment=True,
        ),
    }
    for family, values in populations.items():
        try:
            families[family] = family_variability(values, stack, family, report.sample_label, method)
        except QDArrayError as exc:
            logger.warning("%s %s thresholds: %s", report.sample_label, family, exc.detail)
            families[family] = None
            continue
        probit = probit_transform(values)
        tables[f"probit_{report.sample_label}_{family}"] = pd.DataFrame(
            {"vt": probit.sorted_values, "z": probit.z_scores}
        )

    decisions = {d.row: d for d in report.decisions}
    yields = yield_metrics(decisions, report.diamond_ok())
    fits = [d.diamond for d in report.dots if d.diamond is not None]
    summary = capacitance_summary(fits) if fits else {}
    for quantity in DIAMOND_QUANTITIES if fits else ():
        tables[f"cdf_{report.sample_label}_{quantity}"] = empirical_cdf([getattr(f, quantity) for f in fits], quantity)

    spurious = sorted({
        (d.row if s.axis == "bs" else d.row + 1, d.col) for d in report.dots for s in d.spurious
    })
    stats = SampleStatistics(
        label=report.sample_label,
        t1=stack.t1,
        t2=stack.t2,
        t3=stack.t3,
        yields=yields,
        plunger=families["plunger"],
        barrier=families["barrier"],
        capacitance=summary,
        n_diamonds=len(fits),
        spurious_segments=spurious,
        temperature=report.temperature.result if report.temperature else None,
    )
    return stats, tables


def build_statistics(reports: Sequence[ExtractionReport], settings: StatisticsSettings) -> Tuple[StatisticsReport, Dict[str, pd.DataFrame]]:
    """Aggregate extraction reports into the campaign statistics.

    The variability curve and the capacitance calibration need at least two
    samples and are omitted otherwise.
    """
    samples: List[SampleStatistics] = []
    tables: Dict[str, pd.DataFrame] = {}
    for report in reports:
        stats, sample_tables = sample_statistics(report, settings)
        samples.append(stats)
        tables.update(sample_tables)

    tables["yields"] = pd.DataFrame([
        {"label": s.label, "t1": s.t1, **s.yields.model_dump(), "spurious_segments": len(s.spurious_segments)}
        for s in samples
    ])

    variability = None
    minima: Dict[str, float] = {}
    points = [p for s in samples for p in (s.plunger, s.barrier) if p is not None]
    if len({p.label for p in points}) >= 2:
        curve = variability_curve(points)
        tables["variability"] = curve
        variability = [
            CurvePoint(family=r.family, t_gate=float(r.t_gate), sigma=float(r.sigma),
                       sigma_filtered=float(r.sigma_filtered), n_samples=int(r.n_samples))
            for r in curve.itertuples(index=False)
        ]
        for family in FAMILIES:
            t_min = curve_minimum(curve, family)
            if t_min is not None:
                minima[family] = t_min
    else:
        logger.info("fewer than two samples with threshold statistics, variability curve omitted")

    cap_fit = None
    cap_points = [(s.t1, s.capacitance["c_p"].mean) for s in samples if "c_p" in s.capacitance]
    if cap_points:
        tables["capacitance"] = pd.DataFrame(cap_points, columns=["t1", "c_p_mean"])
    if len({t for t, _ in cap_points}) >= 2:
        try:
            cap_fit = fit_parallel_plate(cap_points)
        except FitError as exc:
            logger.warning("capacitance fit omitted: %s", exc.detail)
    else:
        logger.info("fewer than two oxide thicknesses with diamonds, capacitance fit omitted")

    temperature_rows = [
        {"label": s.label, "t_fridge": t, "t_e": te, "stderr": err}
        for s in samples if s.temperature is not None for t, te, err in s.temperature.t0_points
    ]
    if temperature_rows:
        tables["temperature"] = pd.DataFrame(temperature_rows)

    report = StatisticsReport(samples=samples, variability=variability, minima=minima, capacitance_fit=cap_fit)
    return report, tables


def write_tables(tables: Dict[str, pd.DataFrame], out_dir: Path) -> List[Path]:
    directory = Path(out_dir) / TABLE_DIR
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for name, frame in sorted(tables.items()):
        path = directory / f"{name}.csv"
        frame.to_csv(path, index=False, float_format="%.9g", lineterminator="\n")
        paths.append(path)
    return paths


# Plots
def _save(fig, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path


def write_plots(report: StatisticsReport, tables: Dict[str, pd.DataFrame], out_dir: Path,
                hashsalt: str = "qdarray") -> List[Path]:
    """Vector renderings of the statistics tables."""
    plt.rcParams["svg.hashsalt"] = hashsalt
    directory = Path(out_dir) / PLOT_DIR
    paths = []

    for name, frame in sorted(tables.items()):
        if not name.startswith("probit_"):
            continue
        fig, ax = plt.subplots(figsize=(4, 3))
        ax.plot(1e3 * frame["vt"], frame["z"], "o", ms=3)
        ax.axhspan(-1, 1, color="0.9", zorder=0)
        ax.set_xlabel("threshold voltage (mV)")
        ax.set_ylabel("z")
        ax.set_title(name.removeprefix("probit_"))
        paths.append(_save(fig, directory / f"{name}.svg"))

    if "variability" in tables:
        curve = tables["variability"]
        fig, ax = plt.subplots(figsize=(4, 3))
        for family, rows in curve.groupby("family"):
            ax.plot(rows["t_gate"], 1e3 * rows["sigma_filtered"], "o-", label=f"{family} (filtered)")
            ax.plot(rows["t_gate"], 1e3 * rows["sigma"], "x--", label=f"{family} (raw)")
        ax.set_xlabel("gate oxide thickness (nm)")
        ax.set_ylabel("sigma (mV)")
        ax.legend(fontsize=6)
        paths.append(_save(fig, directory / "variability.svg"))

    if "capacitance" in tables and report.capacitance_fit is not None:
        frame = tables["capacitance"]
        fit = report.capacitance_fit
        t = np.linspace(frame["t1"].min() * 0.8, frame["t1"].max() * 1.2, 100)
        fig, ax = plt.subplots(figsize=(4, 3))
        ax.plot(frame["t1"], frame["c_p_mean"], "o")
        ax.plot(t, parallel_plate(t, fit.area, fit.delta2), "-")
        ax.set_xlabel("t1 (nm)")
        ax.set_ylabel("C_P (aF)")
        paths.append(_save(fig, directory / "capacitance.svg"))

    frame = tables["yields"]
    fig, ax = plt.subplots(figsize=(4, 3))
    x = np.arange(len(frame))
    ax.bar(x - 0.2, frame["row_shared_yield"], 0.4, label="row shared")
    ax.bar(x + 0.2, frame["total_yield"], 0.4, label="total")
    ax.set_xticks(x, frame["label"])
    ax.set_ylim(0, 1)
    ax.legend(fontsize=6)
    paths.append(_save(fig, directory / "yields.svg"))
    return paths
