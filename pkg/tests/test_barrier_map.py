import numpy as np
import pytest
from pydantic import ValidationError

from qdarray.exceptions import DimensionalityError
from qdarray.extraction.barrier_map import (
    BiasCandidate,
    CommonBiasDecision,
    analyze_barrier_map,
    best_candidate,
    diagonal_windows,
    select_common_bias,
)
from qdarray.models import SpuriousDotSpec, SweepAxis
from qdarray.transport import current_array

V_SD = 0.5e-3


@pytest.fixture
def pipeline_dot(make_dot):
    # C_P and lever arm typical of a 15 nm sample
    return make_dot(c_p=6.0, c_sigma=36.0)


@pytest.fixture
def barrier_map(make_record):
    def build(dot, window=(-0.25, 0.5), points=201, spurious=()):
        lo, hi = window
        axes = [
            SweepAxis(gate="B1", start=dot.vt_bs + lo, stop=dot.vt_bs + hi, points=points),
            SweepAxis(gate="B2", start=dot.vt_bd + lo, stop=dot.vt_bd + hi, points=points),
        ]
        v_bs = axes[0].values()[:, None]
        v_bd = axes[1].values()[None, :]
        grid = current_array(dot, list(spurious), dot.vt_plunger + 0.15, v_bs, v_bd, V_SD, 1.4)
        return make_record(axes, {1: grid}, i_ref={1: dot.gmax * V_SD}, v_sd=V_SD)
    return build


def test_clean_dot_has_candidates(pipeline_dot, barrier_map):
    analysis = analyze_barrier_map(barrier_map(pipeline_dot), 1)
    assert analysis.candidates
    mask = np.array(analysis.mask)
    assert mask.any()
    best = best_candidate(analysis.candidates)
    assert best.contrast == max(c.contrast for c in analysis.candidates)
    i_open = pipeline_dot.gmax * V_SD
    assert all(0.05 * i_open <= c.mean_current <= 0.8 * i_open for c in analysis.candidates)


def test_closed_barriers_give_no_candidates(pipeline_dot, barrier_map):
    analysis = analyze_barrier_map(barrier_map(pipeline_dot, window=(-0.9, -0.5)), 1)
    assert analysis.candidates == []
    assert not np.array(analysis.mask).any()


def test_open_barriers_give_no_candidates(pipeline_dot, barrier_map):
    # ohmic channel: no oscillations, current above the usable window
    analysis = analyze_barrier_map(barrier_map(pipeline_dot, window=(0.6, 1.0)), 1)
    assert analysis.candidates == []


def test_detection_survives_spurious_lines(pipeline_dot, barrier_map):
    spec = SpuriousDotSpec(barrier_index=1, col=1, coupling_lever=0.1, period=0.04, depth=0.5)
    analysis = analyze_barrier_map(barrier_map(pipeline_dot, spurious=[(spec, "source")]), 1)
    assert np.array(analysis.mask).any()


def test_1d_record_is_rejected(make_record):
    axes = [SweepAxis(gate="B1", start=0.0, stop=1.0, points=11)]
    with pytest.raises(DimensionalityError):
        analyze_barrier_map(make_record(axes, {1: np.zeros(11)}), 1)


def test_plunger_map_is_rejected(make_record):
    axes = [
        SweepAxis(gate="P1", start=0.0, stop=1.0, points=5),
        SweepAxis(gate="B2", start=0.0, stop=1.0, points=5),
    ]
    with pytest.raises(DimensionalityError):
        analyze_barrier_map(make_record(axes, {1: np.zeros((5, 5))}), 1)


def test_diagonal_windows_shift_along_the_diagonal():
    grid = np.arange(25, dtype=float).reshape(5, 5)
    windows = diagonal_windows(grid, 1)
    assert windows.shape == (3, 5, 5)
    assert windows[2, 1, 1] == grid[2, 2]
    assert windows[0, 1, 1] == grid[0, 0]
    assert np.isnan(windows[2, 4, 4])


def _cand(v_bs, v_bd, contrast=1.0):
    return BiasCandidate(v_bs=v_bs, v_bd=v_bd, contrast=contrast, mean_current=1e-10)


def test_shared_point_covers_most_columns():
    sets = {
        1: [_cand(1.0, 1.0), _cand(1.1, 1.0)],
        2: [_cand(1.0, 1.0)],
        3: [_cand(1.2, 1.2, contrast=3.0)],
        4: [],
    }
    decision = select_common_bias(sets, row=2)
    assert decision.row == 2
    assert decision.shared_point == (1.0, 1.0)
    assert decision.shared_ok == [1, 2]
    assert decision.individual_points == {3: (1.2, 1.2)}
    assert decision.failed == [4]
    assert decision.measured == [1, 2, 3, 4]
    assert decision.mode_for(3) == "individual"
    assert decision.bias_for(1) == (1.0, 1.0)
    assert decision.bias_for(4) is None


def test_ties_break_on_contrast_then_lowest_bias():
    sets = {1: [_cand(1.0, 1.0, 1.0), _cand(0.9, 0.9, 2.0)], 2: [_cand(1.0, 1.0, 1.0), _cand(0.9, 0.9, 2.0)]}
    assert select_common_bias(sets).shared_point == (0.9, 0.9)
    sets = {1: [_cand(1.0, 1.0), _cand(0.9, 0.9)], 2: [_cand(1.0, 1.0), _cand(0.9, 0.9)]}
    assert select_common_bias(sets).shared_point == (0.9, 0.9)


def test_no_candidates_anywhere():
    decision = select_common_bias({1: [], 2: []})
    assert decision.shared_point is None
    assert decision.failed == [1, 2]


def test_decision_columns_must_partition():
    with pytest.raises(ValidationError):
        CommonBiasDecision(shared_ok=[1, 2], failed=[2])
