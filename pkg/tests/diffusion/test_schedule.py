import numpy as np
import pytest

from reguide.diffusion.schedule import (
    cfg_epsilon,
    check_timesteps,
    ddpm_mean,
    forward_noise,
    make_schedule,
    sampling_timesteps,
    schedule_from_betas,
    step_coefficients,
)
from reguide.errors import ScheduleError, ShapeError
from reguide.numerics.rng import RngStream


def test_single_step_schedule():
    sched = make_schedule(1, beta_start=0.1, beta_end=0.1)
    assert sched.alpha(1) == pytest.approx(0.9)
    assert sched.alpha_bar(1) == pytest.approx(0.9)


def test_alpha_bar_is_the_running_product():
    sched = schedule_from_betas([0.1, 0.2])
    assert sched.alpha_bar(0) == 1.0
    assert sched.alpha_bar(2) == pytest.approx(0.72)


def test_default_linear_schedule_end():
    sched = make_schedule(1000)
    expected = np.prod(1.0 - np.linspace(1e-4, 0.02, 1000))
    assert sched.alpha_bar(1000) == pytest.approx(expected)
    assert sched.alpha_bar(1000) == pytest.approx(4.04e-5, rel=0.01)


def test_quadratic_schedule_interpolates_square_roots():
    sched = make_schedule(3, beta_start=0.01, beta_end=0.09, kind="quadratic")
    np.testing.assert_allclose(sched.betas, [0.01, 0.04, 0.09])


@pytest.mark.parametrize(
    "kwargs",
    [
        {"T": 0},
        {"T": 10, "beta_start": 0.0},
        {"T": 10, "beta_start": 0.05, "beta_end": 0.01},
        {"T": 10, "beta_end": 1.0},
        {"T": 10, "kind": "cosine"},
    ],
)
def test_bad_schedules(kwargs: dict):
    with pytest.raises(ScheduleError):
        make_schedule(**kwargs)


def test_step_zero_is_rejected():
    sched = make_schedule(10)
    with pytest.raises(ScheduleError):
        sched.beta(0)
    with pytest.raises(ScheduleError):
        sched.alpha(11)


def test_forward_noise_boundaries():
    sched = make_schedule(100)
    x0 = np.arange(6.0).reshape(3, 2)
    eps = np.ones_like(x0)
    np.testing.assert_array_equal(forward_noise(x0, 0, eps, sched), x0)
    np.testing.assert_allclose(
        forward_noise(x0, 40, np.zeros_like(x0), sched), np.sqrt(sched.alpha_bar(40)) * x0
    )


def test_forward_noise_value():
    sched = schedule_from_betas([0.1, 0.2])
    value = forward_noise(np.array([1.0]), 2, np.array([0.5]), sched)
    assert value[0] == pytest.approx(np.sqrt(0.72) + 0.5 * np.sqrt(0.28))
    assert value[0] == pytest.approx(1.11312, abs=1e-5)


def test_forward_noise_per_element_timesteps():
    sched = make_schedule(100)
    x0 = np.ones((2, 3, 2))
    out = forward_noise(x0, np.array([0, 50]), np.zeros_like(x0), sched)
    np.testing.assert_array_equal(out[0], x0[0])
    np.testing.assert_allclose(out[1], np.sqrt(sched.alpha_bar(50)))


@pytest.mark.parametrize("t", [50, 300])
def test_forward_noise_marginal_moments(t: int):
    sched = make_schedule(1000)
    x0 = np.full(10**6, 2.0)
    x_t = forward_noise(x0, t, RngStream(0, 0).normal(x0.shape), sched)

    ab = sched.alpha_bar(t)
    assert x_t.mean() == pytest.approx(np.sqrt(ab) * 2.0, rel=0.01)
    assert x_t.var() == pytest.approx(1.0 - ab, rel=0.01)


def test_forward_noise_checks():
    sched = make_schedule(10)
    with pytest.raises(ShapeError):
        forward_noise(np.ones(3), 1, np.ones(2), sched)
    with pytest.raises(ScheduleError):
        forward_noise(np.ones(3), 11, np.ones(3), sched)


@pytest.mark.parametrize("s,expected", [(0.0, 0.0), (1.0, 1.0), (2.0, 2.0)])
def test_cfg_epsilon(s: float, expected: float):
    assert cfg_epsilon(np.array([1.0]), np.array([0.0]), s)[0] == pytest.approx(expected)


def test_ddpm_mean_without_noise_prediction():
    sched = make_schedule(10)
    x = np.array([0.3, -1.2])
    np.testing.assert_array_equal(ddpm_mean(x, 5, np.zeros(2), sched), x)


def test_ddpm_mean_value():
    sched = schedule_from_betas([0.2, 0.1])  # beta_2 = 0.1, alpha_bar_2 = 0.72
    value = ddpm_mean(np.array([1.0]), 2, np.array([1.0]), sched)
    assert value[0] == pytest.approx(1.0 - 0.1 / np.sqrt(0.28))
    assert value[0] == pytest.approx(0.81101, abs=1e-5)


def test_ddpm_mean_is_affine_in_the_prediction():
    sched = make_schedule(50)
    x = np.array([0.4, 0.1])
    e1, e2 = np.array([1.0, -2.0]), np.array([0.5, 3.0])
    mid = ddpm_mean(x, 20, (e1 + e2) / 2, sched)
    np.testing.assert_allclose(mid, (ddpm_mean(x, 20, e1, sched) + ddpm_mean(x, 20, e2, sched)) / 2)


def test_sampling_plans():
    assert sampling_timesteps(5) == [5, 4, 3, 2, 1]
    assert sampling_timesteps(1000, 1) == [1000]
    plan = sampling_timesteps(1000, 50)
    assert len(plan) == 50
    assert plan[0] == 1000 and plan[-1] == 1
    assert check_timesteps(plan, 1000) == plan


@pytest.mark.parametrize("plan", [[], [3, 3, 1], [1, 2], [11, 1], [5, 0]])
def test_bad_plans(plan: list[int]):
    with pytest.raises(ScheduleError):
        check_timesteps(plan, 10)


def test_strided_coefficients():
    sched = make_schedule(100)
    assert step_coefficients(sched, 10) == (sched.alpha(10), sched.beta(10))
    alpha, beta = step_coefficients(sched, 10, 5)
    assert alpha == pytest.approx(sched.alpha_bar(10) / sched.alpha_bar(5))
    assert alpha + beta == pytest.approx(1.0)
