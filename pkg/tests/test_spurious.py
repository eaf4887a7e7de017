import numpy as np
import pytest

from qdarray.device import draw_spurious_dots, synthesize_sample
from qdarray.exceptions import DimensionalityError
from qdarray.extraction.spurious import SpuriousSettings, detect_spurious
from qdarray.instrument import configure_row, run_sweep
from qdarray.models import ArrayGeometry, OxideStack, SpuriousDotSpec, SweepAxis, SweepSpec
from qdarray.transport import current_array

V_SD = 0.5e-3
WINDOW = (-0.2, 1.0)
POINTS = 241


@pytest.fixture
def dot(make_dot):
    return make_dot(c_p=6.0, c_sigma=36.0)


@pytest.fixture
def wide_map(make_record, dot):
    def build(spurious=()):
        lo, hi = WINDOW
        axes = [
            SweepAxis(gate="B1", start=dot.vt_bs + lo, stop=dot.vt_bs + hi, points=POINTS),
            SweepAxis(gate="B2", start=dot.vt_bd + lo, stop=dot.vt_bd + hi, points=POINTS),
        ]
        grid = current_array(
            dot, list(spurious), dot.vt_plunger + 0.15,
            axes[0].values()[:, None], axes[1].values()[None, :], V_SD, 1.4,
        )
        return make_record(axes, {1: grid}, i_ref={1: dot.gmax * V_SD}, v_sd=V_SD)
    return build


def _spec(period, depth=0.5, barrier_index=1):
    return SpuriousDotSpec(barrier_index=barrier_index, col=1, coupling_lever=4e-3 / period, period=period, depth=depth)


def test_clean_map_has_no_spurious_lines(wide_map):
    assert detect_spurious(wide_map(), 1) == []


@pytest.mark.parametrize("period", [0.025, 0.04, 0.07])
def test_source_side_spurious_dot(wide_map, period):
    found = detect_spurious(wide_map([(_spec(period), "source")]), 1)
    assert [d.axis for d in found] == ["bs"]
    hit = found[0]
    assert hit.gate == "B1"
    assert abs(1.0 / hit.period - 1.0 / period) <= hit.frequency_bin
    assert hit.strength >= SpuriousSettings().min_strength
    assert hit.modulation > 0.1


def test_drain_side_spurious_dot(wide_map):
    found = detect_spurious(wide_map([(_spec(0.05, barrier_index=2), "drain")]), 1)
    assert [(d.axis, d.gate) for d in found] == [("bd", "B2")]


def test_zero_depth_is_not_detected(wide_map):
    assert detect_spurious(wide_map([(_spec(0.04, depth=0.0), "source")]), 1) == []


def test_single_axis_sweep(make_record, dot):
    axis = SweepAxis(gate="B1", start=dot.vt_bs + WINDOW[0], stop=dot.vt_bs + WINDOW[1], points=POINTS)
    current = current_array(
        dot, [(_spec(0.04), "source")], dot.vt_plunger + 0.15, axis.values(), 2.5, V_SD, 1.4
    )
    record = make_record([axis], {1: current}, i_ref={1: dot.gmax * V_SD}, v_sd=V_SD)
    found = detect_spurious(record, 1)
    assert len(found) == 1 and found[0].axis == "bs"


def test_closed_channel_is_skipped(make_record):
    axis = SweepAxis(gate="B2", start=0.0, stop=1.0, points=101)
    assert detect_spurious(make_record([axis], {1: np.zeros(101)}), 1) == []


def test_plunger_axis_is_rejected(make_record):
    axis = SweepAxis(gate="P1", start=0.0, stop=1.0, points=101)
    with pytest.raises(DimensionalityError):
        detect_spurious(make_record([axis], {1: np.zeros(101)}), 1)


UNIFORM_THRESHOLDS = {
    "strain_coeff_a": 0.0, "pelgrom_coeff_b": 0.0,
    "strain_coeff_a_barrier": 0.0, "pelgrom_coeff_b_barrier": 0.0,
    "outlier_prob": 0.0, "alpha_rel_spread": 0.0,
}


def _array_detections(sample, cfg, noise_seed, noise_fraction):
    """(row, col, axis) of every detection over the row maps of an array."""
    n = sample.geometry.n
    vt_b = cfg.mean_vt_barrier
    seen = set()
    for row in range(1, n + 1):
        plan = configure_row(sample, row)
        spec = SweepSpec(
            axes=[
                SweepAxis(gate=plan.source_barrier, start=vt_b + WINDOW[0], stop=vt_b + WINDOW[1], points=POINTS),
                SweepAxis(gate=plan.drain_barrier, start=vt_b + WINDOW[0], stop=vt_b + WINDOW[1], points=POINTS),
            ],
            fixed_biases={plan.plunger_gate: cfg.mean_vt_plunger + 0.15},
            v_sd=V_SD,
            channels=list(range(1, n + 1)),
        )
        record = run_sweep(sample, plan, spec, noise_seed=row + 100 * noise_seed, noise_fraction=noise_fraction)
        for col in range(1, n + 1):
            seen |= {(row, col, d.axis) for d in detect_spurious(record, col)}
    return seen


def test_injected_dot_is_seen_from_both_adjacent_rows(disorder):
    uniform = disorder.model_copy(update={
        **UNIFORM_THRESHOLDS,
        "cp_rel_spread": 0.0, "gmax_rel_spread": 0.0, "spurious_rate_coeff": 0.0,
    })
    sample = synthesize_sample(ArrayGeometry(n=5), OxideStack(t1=15.0), uniform, seed=11)
    sample = sample.model_copy(update={"spurious": [_spec(0.04, barrier_index=4).model_copy(update={"col": 3})]})
    assert _array_detections(sample, uniform, 0, 0.0) == {(3, 3, "bd"), (4, 3, "bs")}


@pytest.mark.parametrize("seed", range(20))
def test_drawn_spurious_dot_is_found_for_every_seed(disorder, seed):
    cfg = disorder.model_copy(update={**UNIFORM_THRESHOLDS, "spurious_rate_coeff": 0.0})
    stack = OxideStack(t1=15.0)
    # a rate coefficient equal to t1 puts a dot under every segment; keep the one under B4, column 3
    every_segment = draw_spurious_dots(5, stack.t1, cfg.model_copy(update={"spurious_rate_coeff": stack.t1}), seed)
    injected = next(s for s in every_segment if (s.barrier_index, s.col) == (4, 3))
    injected = injected.model_copy(update={"depth": 0.5})

    sample = synthesize_sample(ArrayGeometry(n=5), stack, cfg, seed=seed)
    assert sample.spurious == []
    clean = _array_detections(sample, cfg, seed, 0.01)
    assert clean == set()

    dirty = _array_detections(sample.model_copy(update={"spurious": [injected]}), cfg, seed, 0.01)
    assert dirty == {(3, 3, "bd"), (4, 3, "bs")}
