import numpy as np
import pytest

from reguide.errors import (
    MissingInputError,
    ScheduleError,
    ShapeError,
    UnknownTokenError,
    ZeroNormError,
)
from reguide.numerics.autodiff import finite_diff_grad
from reguide.numerics.rng import RngStream
from reguide.reward.model import encode_condition, encode_motion
from reguide.reward.rewards import (
    reward_grad,
    reward_motion,
    reward_text,
    reward_total,
    reward_value_and_grad,
)
from reguide.synthdata.generator import Condition


def test_cosine_reward_values():
    assert reward_text(np.array([1.0, 2.0]), np.array([1.0, 2.0])) == pytest.approx(1.0)
    assert reward_text(np.array([1.0, 0.0]), np.array([0.0, 1.0])) == pytest.approx(0.0)
    assert reward_text(np.array([1.0, 0.0]), np.array([-1.0, 0.0])) == pytest.approx(-1.0)


def test_motion_reward_is_scale_invariant():
    z, anchor = np.array([0.3, -1.2, 0.5]), np.array([1.0, 0.4, -0.2])
    assert reward_motion(z, z) == pytest.approx(1.0)
    assert reward_motion(2 * z, anchor) == reward_motion(z, anchor)


def test_zero_norm_and_shape_errors():
    with pytest.raises(ZeroNormError):
        reward_text(np.zeros(3), np.ones(3))
    with pytest.raises(ShapeError):
        reward_motion(np.ones(3), np.ones(4))


def test_text_only_total_is_the_text_reward(tiny_reward_model, tiny_dataset):
    pair = tiny_dataset.pairs[0]
    x = pair.motion.frames
    expected = reward_text(
        encode_motion(tiny_reward_model, x, 10).vector,
        encode_condition(tiny_reward_model, pair.condition).vector,
    )
    total = reward_total(tiny_reward_model, x, 10, pair.condition, None, mu=1.0, eta=0.0)
    assert total == pytest.approx(expected)


def test_zero_weights_give_zero(tiny_reward_model, tiny_dataset):
    pair = tiny_dataset.pairs[0]
    anchor = encode_motion(tiny_reward_model, tiny_dataset.pairs[1].motion.frames, 0).vector
    x = pair.motion.frames
    assert reward_total(tiny_reward_model, x, 5, pair.condition, anchor, 0.0, 0.0) == 0.0
    value, grad = reward_value_and_grad(tiny_reward_model, x, 5, pair.condition, anchor, 0.0, 0.0)
    assert value == 0.0
    np.testing.assert_array_equal(grad, np.zeros_like(x))


def test_weighted_sum(mocker, tiny_reward_model, tiny_dataset):
    mocker.patch("reguide.reward.rewards.reward_text", return_value=0.6)
    mocker.patch("reguide.reward.rewards.reward_motion", return_value=0.2)
    pair = tiny_dataset.pairs[0]
    total = reward_total(
        tiny_reward_model, pair.motion.frames, 1, pair.condition, np.ones(8), mu=0.5, eta=0.5
    )
    assert total == pytest.approx(0.4)


def test_motion_reward_needs_an_anchor(tiny_reward_model, tiny_dataset):
    pair = tiny_dataset.pairs[0]
    with pytest.raises(MissingInputError) as excinfo:
        reward_total(tiny_reward_model, pair.motion.frames, 1, pair.condition, None, 1.0, 0.5)
    assert excinfo.value.code == "missing-input"
    with pytest.raises(MissingInputError):
        reward_grad(tiny_reward_model, pair.motion.frames, 1, pair.condition, None, 1.0, 0.5)


def test_gradient_matches_finite_differences(tiny_reward_model, tiny_dataset):
    stream = RngStream(21, 0)
    anchor = encode_motion(tiny_reward_model, tiny_dataset.pairs[3].motion.frames, 0).vector
    for i in range(20):
        pair = tiny_dataset.pairs[int(stream.integers(0, len(tiny_dataset)))]
        t = int(stream.integers(0, 101))
        x_t = pair.motion.frames + stream.normal(pair.motion.frames.shape)

        def total(x: np.ndarray) -> float:
            return reward_total(tiny_reward_model, x, t, pair.condition, anchor, 1.0, 0.3)

        analytic = reward_grad(tiny_reward_model, x_t, t, pair.condition, anchor, 1.0, 0.3)
        numeric = finite_diff_grad(total, x_t, h=1e-5)
        rel = np.linalg.norm(analytic - numeric) / max(np.linalg.norm(numeric), 1e-12)
        assert rel < 1e-4, f"case {i}: relative error {rel}"


def test_gradient_ascent_increases_the_reward(tiny_reward_model, tiny_dataset):
    pair = tiny_dataset.pairs[5]
    x = pair.motion.frames + RngStream(1, 0).normal(pair.motion.frames.shape)
    value, grad = reward_value_and_grad(tiny_reward_model, x, 20, pair.condition, None, 1.0, 0.0)
    step = 1e-3 / max(np.linalg.norm(grad), 1e-12)
    stepped = reward_total(tiny_reward_model, x + step * grad, 20, pair.condition, None, 1.0, 0.0)
    assert stepped > value


def test_clean_timestep_token(tiny_reward_model, tiny_dataset):
    pair = tiny_dataset.pairs[2]
    x = pair.motion.frames
    clean = reward_total(tiny_reward_model, x, 40, pair.condition, None, 1.0, 0.0, timestep="clean")
    at_zero = reward_total(tiny_reward_model, x, 0, pair.condition, None, 1.0, 0.0)
    assert clean == pytest.approx(at_zero)


def test_input_checks(tiny_reward_model, tiny_dataset):
    pair = tiny_dataset.pairs[0]
    with pytest.raises(ScheduleError):
        reward_total(tiny_reward_model, pair.motion.frames, 101, pair.condition, None, 1.0, 0.0)
    with pytest.raises(ShapeError):
        reward_total(tiny_reward_model, np.ones((4, 2)), 1, pair.condition, None, 1.0, 0.0)
    with pytest.raises(UnknownTokenError):
        encode_condition(tiny_reward_model, (0, 1, 2, 3, 99))


def test_condition_embedding_is_deterministic(tiny_reward_model):
    cond = Condition(1, (0.2, 0.3, 0.0, 0.1))
    a, b = encode_condition(tiny_reward_model, cond), encode_condition(tiny_reward_model, cond)
    np.testing.assert_array_equal(a.vector, b.vector)
    assert a.modality == "condition" and a.dim == 8
