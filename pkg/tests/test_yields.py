import numpy as np
import pytest
from pydantic import ValidationError

from qdarray import rng
from qdarray.extraction.barrier_map import CommonBiasDecision
from qdarray.statistics.yields import YieldReport, yield_metrics


def test_yield_counts_shared_and_individual():
    decisions = {
        1: CommonBiasDecision(row=1, shared_point=(1.0, 1.0), shared_ok=[1, 2, 3], individual_points={4: (0.9, 1.1)}),
        2: CommonBiasDecision(row=2, shared_point=(1.0, 1.0), shared_ok=[1, 2], failed=[3, 4]),
    }
    diamond_ok = {(1, 1): True, (1, 2): True, (1, 3): False, (1, 4): True, (2, 1): True, (2, 2): True}
    report = yield_metrics(decisions, diamond_ok)
    assert report.measured == 8
    assert report.shared_ok == 4
    assert report.individual_ok == 1
    assert report.row_shared_yield == pytest.approx(0.5)
    assert report.total_yield == pytest.approx(5 / 8)


def test_dead_columns_are_not_counted():
    # column 3 never measured: it appears in no group of the decision
    decisions = {1: CommonBiasDecision(row=1, shared_point=(1.0, 1.0), shared_ok=[1, 2])}
    report = yield_metrics(decisions, {(1, 1): True, (1, 2): True, (1, 3): True})
    assert report.measured == 2
    assert report.total_yield == 1.0


def test_nothing_measured():
    report = yield_metrics({}, {})
    assert report.measured == 0
    assert report.total_yield == 0.0


def test_inconsistent_report_is_rejected():
    with pytest.raises(ValidationError):
        YieldReport(measured=2, shared_ok=2, individual_ok=1, row_shared_yield=1.0, total_yield=1.0)
    with pytest.raises(ValidationError):
        YieldReport(measured=4, shared_ok=2, individual_ok=0, row_shared_yield=0.75, total_yield=0.5)


def _full_array(n=7, failed=(), individual=()):
    decisions = {}
    for row in range(1, n + 1):
        cols = range(1, n + 1)
        decisions[row] = CommonBiasDecision(
            row=row,
            shared_point=(1.0, 1.0),
            shared_ok=[c for c in cols if (row, c) not in individual],
            individual_points={c: (0.9, 1.1) for c in cols if (row, c) in individual},
        )
    diamond_ok = {(r, c): (r, c) not in failed for r in range(1, n + 1) for c in range(1, n + 1)}
    return decisions, diamond_ok


def test_one_missing_diamond_in_a_seven_by_seven_array():
    report = yield_metrics(*_full_array(failed={(4, 5)}))
    assert report.measured == 49
    assert report.shared_ok == 48
    assert report.individual_ok == 0
    assert report.row_shared_yield == pytest.approx(48 / 49)
    assert report.total_yield == pytest.approx(0.9796, abs=1e-4)


def test_individual_biases_raise_only_the_total_yield():
    individual = {(r, c) for r in (1, 7) for c in (1, 7)} | {(4, 4)}
    failed = {(2, 2), (2, 3)}
    report = yield_metrics(*_full_array(failed=failed, individual=individual))
    assert (report.shared_ok, report.individual_ok) == (42, 5)
    assert report.row_shared_yield == pytest.approx(0.857, abs=1e-3)
    assert report.total_yield == pytest.approx(0.959, abs=1e-3)


def _random_outcomes(seed):
    n = 1 + int(7 * rng.uniform(seed, "n")[0])
    rows = np.arange(1, n + 1)[:, None]
    cols = np.arange(1, n + 1)[None, :]
    group = np.floor(4 * rng.uniform(seed, "group", rows, cols)).astype(int)
    fitted = rng.uniform(seed, "fitted", rows, cols) < rng.uniform(seed, "rate")[0]
    decisions, diamond_ok = {}, {}
    expected = np.zeros(3, dtype=int)
    for r in range(1, n + 1):
        shared, individual, failed = [], {}, []
        for c in range(1, n + 1):
            g, ok = group[r - 1, c - 1], bool(fitted[r - 1, c - 1])
            diamond_ok[(r, c)] = ok
            if g == 3:
                continue  # dead column, never measured
            expected[0] += 1
            if g == 0:
                shared.append(c)
                expected[1] += ok
            elif g == 1:
                individual[c] = (0.9, 1.1)
                expected[2] += ok
            else:
                failed.append(c)
        decisions[r] = CommonBiasDecision(
            row=r, shared_point=(1.0, 1.0) if shared else None,
            shared_ok=shared, individual_points=individual, failed=failed,
        )
    return decisions, diamond_ok, expected


def test_randomized_outcomes_keep_the_yield_ordering():
    for seed in range(1000):
        decisions, diamond_ok, (measured, shared, individual) = _random_outcomes(seed)
        report = yield_metrics(decisions, diamond_ok)
        assert (report.measured, report.shared_ok, report.individual_ok) == (measured, shared, individual)
        assert report.shared_ok + report.individual_ok <= report.measured
        assert 0.0 <= report.row_shared_yield <= report.total_yield <= 1.0
