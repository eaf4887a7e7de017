import numpy as np
import pytest

from qdarray import rng


def test_uniform_is_a_pure_function_of_seed_and_keys():
    a = rng.uniform(7, "noise", np.arange(100))
    b = rng.uniform(7, "noise", np.arange(100))
    np.testing.assert_array_equal(a, b)
    assert np.all((a > 0) & (a < 1))


def test_draws_do_not_depend_on_evaluation_order():
    batch = rng.uniform(11, "vt", np.arange(1, 8)[:, None], np.arange(1, 8)[None, :])
    single = rng.uniform(11, "vt", 4, 6)
    assert batch.shape == (7, 7)
    assert batch[3, 5] == single[0]


def test_keys_and_seeds_select_independent_streams():
    assert rng.uniform(1, "a", 0)[0] != rng.uniform(1, "b", 0)[0]
    assert rng.uniform(1, "a", 0)[0] != rng.uniform(2, "a", 0)[0]
    assert rng.derive_seed(5, "sample", "A") != rng.derive_seed(5, "sample", "B")
    assert rng.derive_seed(5, "sample", "A") == rng.derive_seed(5, "sample", "A")


def test_normal_stream_statistics():
    z = rng.normal(2024, "z", np.arange(200_000))
    assert abs(z.mean()) < 0.01
    assert z.std() == pytest.approx(1.0, abs=0.01)


def test_negative_keys_are_rejected():
    with pytest.raises(ValueError):
        rng.uniform(0, np.array([-1]))
