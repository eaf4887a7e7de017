import json

import numpy as np
import pytest

from qdarray.config import SigmaMethod, StatisticsSettings
from qdarray.constants import ATTO, CONSTANTS
from qdarray.exceptions import UnsupportedVersionError
from qdarray.extraction.barrier_map import CommonBiasDecision
from qdarray.extraction.diamond import DiamondFit
from qdarray.extraction.spurious import SpuriousDetection
from qdarray.reports import (
    BarrierSegment,
    DotRecord,
    ExtractionReport,
    build_statistics,
    load_extraction,
    sample_statistics,
    write_json,
    write_plots,
    write_tables,
)
from qdarray.statistics.capacitance import parallel_plate
from qdarray.statistics.probit import plotting_positions

N = 5
ALL = StatisticsSettings(central_filter=False)


def _diamond(c_p, alpha=0.2):
    c_sigma = c_p / alpha
    return DiamondFit(
        c_p=c_p, c_sigma=c_sigma, alpha=alpha, e_c=1e3 * CONSTANTS.e_charge / (c_sigma * ATTO),
        edge_lines=[(1.0, 0.0)] * 4, quality=1.0, width=0.02, height=0.004,
        left_vertex=0.8, right_vertex=0.82, n_points=100,
    )


def _report(label, t1, sigma_p, sigma_b, failed=(), spurious_at=None):
    z_p = plotting_positions(N * N)[::-1]
    z_b = plotting_positions((N + 1) * N)
    c_p = float(parallel_plate(t1, 1500.0, 4.5))
    dots = []
    for i, (row, col) in enumerate((r, c) for r in range(1, N + 1) for c in range(1, N + 1)):
        ok = (row, col) not in failed
        hits = []
        if spurious_at == (row, col):
            hits = [SpuriousDetection(axis="bd", gate=f"B{row + 1}", period=0.04, strength=9.0,
                                      modulation=0.3, frequency_bin=1.3)]
        dots.append(DotRecord(
            row=row, col=col, vt_plunger=0.65 + sigma_p * z_p[i], bias_mode="shared",
            bias_point=(1.0, 1.0), diamond=_diamond(c_p) if ok else None,
            diamond_error=None if ok else "unfittable", spurious=hits,
        ))
    segments = [
        BarrierSegment(k=k, col=col, vt=0.9 + sigma_b * z_b[(k - 1) * N + col - 1], n_fits=2)
        for k in range(1, N + 2) for col in range(1, N + 1)
    ]
    decisions = [
        CommonBiasDecision(row=r, shared_point=(1.0, 1.0), shared_ok=list(range(1, N + 1))) for r in range(1, N + 1)
    ]
    return ExtractionReport(sample_label=label, t1=t1, delta2=4.5, delta3=0.8, n=N,
                            dots=dots, segments=segments, decisions=decisions)


@pytest.fixture
def reports():
    return [
        _report("A", 12.0, 0.05, 0.04, failed={(1, 1), (2, 3)}, spurious_at=(2, 2)),
        _report("B", 20.0, 0.03, 0.06),
    ]


def test_sample_statistics(reports):
    stats, tables = sample_statistics(reports[0], ALL)
    assert stats.t2 == pytest.approx(16.5) and stats.t3 == pytest.approx(17.3)
    assert stats.plunger.sigma_filtered == pytest.approx(0.05, rel=1e-9)
    assert stats.barrier.sigma_filtered == pytest.approx(0.04, rel=1e-9)
    assert stats.barrier.n_values == 30
    assert stats.n_diamonds == 23
    assert stats.yields.total_yield == pytest.approx(23 / 25)
    assert stats.spurious_segments == [(3, 2)]
    assert stats.capacitance["c_p"].std == pytest.approx(0.0, abs=1e-12)
    assert {"probit_A_plunger", "probit_A_barrier", "cdf_A_c_p", "cdf_A_e_c"} <= set(tables)
    assert list(tables["probit_A_plunger"]["vt"]) == sorted(tables["probit_A_plunger"]["vt"])


def test_central_filter_shrinks_the_populations(reports):
    stats, _ = sample_statistics(reports[0], StatisticsSettings())
    assert stats.plunger.n_values == 9
    assert stats.barrier.n_values == 12


def test_too_few_thresholds_leave_the_family_empty(reports):
    small = reports[0].model_copy(update={"n": 3, "segments": []})
    stats, tables = sample_statistics(small, StatisticsSettings())
    assert stats.plunger is None and stats.barrier is None
    assert "probit_A_plunger" not in tables


def test_campaign_statistics(reports):
    report, tables = build_statistics(reports, ALL)
    assert [s.label for s in report.samples] == ["A", "B"]
    assert report.minima == {"plunger": pytest.approx(24.5), "barrier": pytest.approx(17.3)}
    assert len(report.variability) == 4
    assert report.capacitance_fit.area == pytest.approx(1500.0, rel=1e-6)
    assert report.capacitance_fit.delta2 == pytest.approx(4.5, rel=1e-6)
    assert tables["yields"]["spurious_segments"].tolist() == [1, 0]
    assert "temperature" not in tables


def test_single_sample_has_no_curve(reports):
    report, tables = build_statistics(reports[:1], ALL)
    assert report.variability is None
    assert report.minima == {}
    assert report.capacitance_fit is None
    assert "variability" not in tables


def test_truncated_method(reports):
    report, _ = build_statistics(reports, StatisticsSettings(central_filter=False, sigma_method=SigmaMethod.TRUNCATED))
    assert report.samples[1].plunger.sigma_filtered == pytest.approx(0.03, rel=0.1)


def test_outputs_are_reproducible(reports, tmp_path):
    report, tables = build_statistics(reports, ALL)
    first = sorted(p.name for p in write_tables(tables, tmp_path / "one"))
    write_tables(tables, tmp_path / "two")
    assert "variability.csv" in first and "yields.csv" in first
    for name in first:
        assert (tmp_path / "one" / "tables" / name).read_bytes() == (tmp_path / "two" / "tables" / name).read_bytes()

    plots = [p.name for p in write_plots(report, tables, tmp_path / "one")]
    write_plots(report, tables, tmp_path / "two")
    assert {"variability.svg", "capacitance.svg", "yields.svg", "probit_A_plunger.svg"} <= set(plots)
    for name in plots:
        assert (tmp_path / "one" / "plots" / name).read_bytes() == (tmp_path / "two" / "plots" / name).read_bytes()


def test_extraction_report_file(reports, tmp_path):
    path = write_json(reports[1], tmp_path / "extraction.json")
    assert load_extraction(path) == reports[1]
    document = json.loads(path.read_text())
    document["schema_version"] = 99
    path.write_text(json.dumps(document))
    with pytest.raises(UnsupportedVersionError):
        load_extraction(path)


def test_dot_lookup(reports):
    assert reports[0].dot(2, 3).diamond is None
    assert reports[0].dot(9, 9) is None
    assert reports[0].diamond_ok()[(1, 2)]
    assert np.isclose(reports[0].stack.t3, 17.3)
