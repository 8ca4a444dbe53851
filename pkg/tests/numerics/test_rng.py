import numpy as np
import pytest

from reguide.errors import ShapeError
from reguide.numerics.rng import RngStream, derive_stream_id, sample_gaussian


def test_stream_advances_and_replays():
    stream = RngStream(1, 0)
    first = sample_gaussian([4], stream).numpy()
    second = sample_gaussian([4], stream).numpy()
    assert not np.array_equal(first, second)

    replay = RngStream(1, 0)
    np.testing.assert_array_equal(sample_gaussian([4], replay).numpy(), first)
    np.testing.assert_array_equal(sample_gaussian([4], replay).numpy(), second)


def test_streams_are_independent_of_each_other():
    a = RngStream(1, 0).normal(8)
    b = RngStream(1, 1).normal(8)
    c = RngStream(2, 0).normal(8)
    assert not np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_counter_moves_with_draws():
    stream = RngStream(5, 3)
    assert stream.counter == 0
    stream.normal(16)
    assert stream.counter > 0


def test_moments_of_a_million_draws():
    draws = sample_gaussian([1_000_000], RngStream(11, 0)).numpy()
    assert abs(draws.mean()) < 0.01
    assert abs(draws.var() - 1.0) < 0.01


def test_shape_contract():
    assert sample_gaussian([2, 3], RngStream(0, 0)).size == 6


@pytest.mark.parametrize("shape", [[], [0], [3, -1]])
def test_bad_shapes_are_rejected(shape: list[int]):
    with pytest.raises(ShapeError):
        sample_gaussian(shape, RngStream(0, 0))


def test_spawn_keeps_the_seed():
    child = RngStream(9, 0).spawn(4)
    np.testing.assert_array_equal(child.normal(3), RngStream(9, 4).normal(3))


def test_derived_stream_ids_are_stable():
    assert derive_stream_id(3, {"speed": 0.2}) == derive_stream_id(3, {"speed": 0.2})
    assert derive_stream_id(3, {"speed": 0.2}) != derive_stream_id(3, {"speed": 0.3})
