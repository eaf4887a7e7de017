from types import SimpleNamespace

import numpy as np
import pytest

from qdarray.exceptions import DataError, DegenerateFitError, InsufficientDataError
from qdarray.statistics.capacitance import (
    capacitance_summary,
    empirical_cdf,
    fit_parallel_plate,
    parallel_plate,
    summarize,
)

T1 = [8.0, 12.0, 15.0, 20.0]


def test_parallel_plate_recovery():
    caps = parallel_plate(T1, 1500.0, 4.5)
    fit = fit_parallel_plate(list(zip(T1, caps)))
    assert fit.area == pytest.approx(1500.0, rel=1e-6)
    assert fit.delta2 == pytest.approx(4.5, rel=1e-6)
    assert fit.residual < 1e-9
    assert fit.n_points == 4


def test_parallel_plate_with_scatter():
    caps = parallel_plate(T1, 1500.0, 4.5) * np.array([1.01, 0.99, 1.005, 0.995])
    fit = fit_parallel_plate(list(zip(T1, caps)))
    assert fit.area == pytest.approx(1500.0, rel=0.1)
    assert fit.delta2 == pytest.approx(4.5, abs=1.0)


def test_capacitance_decreases_with_thickness():
    caps = parallel_plate(T1, 1500.0, 4.5)
    assert np.all(np.diff(caps) < 0)


def test_degenerate_inputs():
    with pytest.raises(DegenerateFitError):
        fit_parallel_plate([(12.0, 4.0), (12.0, 4.1)])
    with pytest.raises(DegenerateFitError):
        fit_parallel_plate([(8.0, 3.0), (20.0, 4.0)])
    with pytest.raises(DataError):
        fit_parallel_plate([(8.0, 3.0), (20.0, -1.0)])


def test_summary_of_diamond_fits():
    fits = [SimpleNamespace(c_p=c, c_sigma=5 * c, alpha=0.2, e_c=160.0 / (5 * c)) for c in (4.0, 5.0, 6.0)]
    summary = capacitance_summary(fits)
    assert set(summary) == {"c_p", "c_sigma", "alpha", "e_c"}
    assert summary["c_p"].mean == pytest.approx(5.0)
    assert summary["c_p"].std == pytest.approx(1.0)
    assert summary["c_p"].rel_spread == pytest.approx(0.2)
    assert summary["alpha"].std == pytest.approx(0.0, abs=1e-15)
    assert summary["e_c"].n == 3


def test_summarize_edge_cases():
    assert summarize([2.0]).std == 0.0
    with pytest.raises(InsufficientDataError):
        summarize([])


def test_empirical_cdf():
    frame = empirical_cdf([0.3, 0.1, 0.2], name="c_p")
    assert list(frame.columns) == ["c_p", "cdf"]
    assert frame["c_p"].tolist() == [0.1, 0.2, 0.3]
    assert frame["cdf"].tolist() == pytest.approx([1 / 3, 2 / 3, 1.0])
