from functools import partial

import numpy as np
import pytest

from reguide.config import GuidanceConfig
from reguide.diffusion.sampling import ddpm_sample
from reguide.diffusion.schedule import sampling_timesteps
from reguide.errors import GuidanceError, MissingInputError
from reguide.numerics.rng import RngStream
from reguide.retrieval.index import build_index
from reguide.sampling.sampler import (
    batch_sample,
    clip_gradient,
    condition_stream_id,
    guided_step,
    guided_update,
    run_chain,
    sample,
)
from reguide.synthdata.generator import Condition
from reguide.verify.analytic import GaussianSpec, analytic_denoiser

SHAPE = (8, 2)
OFF = GuidanceConfig(mode="off", steps=5)


def zero_noise(x: np.ndarray, t: int) -> np.ndarray:
    return np.zeros_like(x)


def exploding_reward(x: np.ndarray, t: int) -> tuple[float, np.ndarray]:
    raise AssertionError("reward must not be evaluated")


@pytest.fixture(scope="module")
def tiny_index(tiny_reward_model, tiny_dataset):
    return build_index(tiny_reward_model, tiny_dataset.split("train"))


@pytest.fixture(scope="module")
def conditions(tiny_dataset):
    return tiny_dataset.split("test").conditions[:4]


@pytest.fixture
def unguided(tiny_denoiser, tiny_sched):
    """Sample without any reward model or index."""

    def run(cond: Condition, gcfg: GuidanceConfig, seed: int = 0):
        return sample(cond, tiny_denoiser, None, None, tiny_sched, gcfg, RngStream(seed, 0))

    return run


@pytest.fixture
def batch(tiny_denoiser, tiny_sched):
    def run(conditions: list[Condition], seed: int, **kwargs):
        return batch_sample(conditions, tiny_denoiser, None, None, tiny_sched, OFF, seed, **kwargs)

    return run


def test_scalar_unweighted_update():
    x = guided_update(np.array([1.0]), np.zeros(1), np.array([0.2]), 0.99, 0.01, "unweighted")
    assert float(x[0]) == pytest.approx(1.0 / np.sqrt(0.99) + 0.2, abs=1e-12)
    assert float(x[0]) == pytest.approx(1.20504, abs=1e-5)


def test_theorem3_differs_only_by_gradient_weight():
    alpha, beta = 0.98, 0.02
    x_bar, noise, grad = np.array([0.3, -1.0]), np.array([0.5, 0.1]), np.array([0.2, -0.4])
    weighted = guided_update(x_bar, noise, grad, alpha, beta, "theorem3")
    plain = guided_update(x_bar, noise, grad, alpha, beta, "unweighted")
    np.testing.assert_allclose(weighted - plain, (beta / np.sqrt(alpha) - 1.0) * grad)


def test_off_ignores_gradient():
    x_bar, noise = np.array([1.0, 2.0]), np.array([0.1, -0.1])
    np.testing.assert_array_equal(
        guided_update(x_bar, noise, np.ones(2), 0.9, 0.1, "off"),
        guided_update(x_bar, noise, None, 0.9, 0.1, "unweighted"),
    )


def test_unknown_mode_is_rejected():
    with pytest.raises(ValueError):
        guided_update(np.zeros(1), np.zeros(1), np.zeros(1), 0.9, 0.1, "sideways")  # type: ignore


def test_clip_gradient():
    grad, norm = clip_gradient(np.array([3.0, 4.0]), 1.0)
    assert norm == pytest.approx(5.0)
    np.testing.assert_allclose(grad, [0.6, 0.8])

    grad, norm = clip_gradient(np.array([3.0, 4.0]), None)
    np.testing.assert_array_equal(grad, [3.0, 4.0])


@pytest.mark.parametrize("steps", [None, 7])
@pytest.mark.parametrize("seed", range(10))
def test_off_mode_matches_plain_ddpm(tiny_denoiser, tiny_sched, conditions, unguided, seed, steps):
    gcfg = GuidanceConfig(mode="off", steps=steps)
    cond = conditions[seed % len(conditions)]
    plan = sampling_timesteps(tiny_sched.T, steps)
    noise_fn = tiny_denoiser.guided_noise_fn(cond, gcfg.cfg_scale)

    expected = ddpm_sample(noise_fn, SHAPE, tiny_sched, plan, RngStream(seed, 0))
    motion, trace = unguided(cond, gcfg, seed)

    np.testing.assert_array_equal(motion.frames, expected)
    assert [r.t for r in trace.records] == plan
    assert all(r.reward is None for r in trace.records)


def test_zero_weights_match_off(conditions, unguided):
    zero = GuidanceConfig(mode="unweighted", mu=0.0, eta=0.0, steps=10)
    assert not zero.active

    a, _ = unguided(conditions[0], GuidanceConfig(mode="off", steps=10), seed=3)
    b, _ = unguided(conditions[0], zero, seed=3)
    assert a == b


def test_inactive_guidance_never_calls_the_reward(tiny_sched):
    x, records = run_chain(SHAPE, zero_noise, exploding_reward, tiny_sched, OFF, RngStream(0, 0))
    assert x.shape == SHAPE
    assert len(records) == 5


def test_last_step_draws_no_noise(tiny_sched):
    x_t = RngStream(1, 0).normal(SHAPE)
    stream = RngStream(2, 0)

    x_a, _ = guided_step(x_t, 1, zero_noise, None, tiny_sched, OFF, stream)
    assert stream.counter == 0
    x_b, _ = guided_step(x_t, 1, zero_noise, None, tiny_sched, OFF, RngStream(99, 0))
    np.testing.assert_array_equal(x_a, x_b)


def test_jump_to_zero_draws_no_noise(tiny_sched):
    x_t = RngStream(1, 0).normal(SHAPE)
    stream = RngStream(2, 0)

    guided_step(x_t, tiny_sched.T, zero_noise, None, tiny_sched, OFF, stream, t_prev=0)
    assert stream.counter == 0


def test_one_step_plan_stays_bounded(tiny_sched):
    spec = GaussianSpec(0.0, 1.0)
    noise_fn = partial(analytic_denoiser, spec=spec, sched=tiny_sched)
    gcfg = GuidanceConfig(mode="off", steps=1)

    x, records = run_chain((4000, 1), noise_fn, None, tiny_sched, gcfg, RngStream(0, 0))
    assert [r.t for r in records] == [tiny_sched.T]
    assert x.std() < 2.0


def test_single_step_plan(conditions, unguided):
    _, trace = unguided(conditions[0], GuidanceConfig(mode="off", timesteps=[1]))
    assert [r.t for r in trace.records] == [1]


def test_non_finite_gradient_raises(tiny_sched):
    gcfg = GuidanceConfig(mode="unweighted", eta=0.0)

    def nan_reward(x: np.ndarray, t: int) -> tuple[float, np.ndarray]:
        return 0.0, np.full_like(x, np.nan)

    with pytest.raises(GuidanceError):
        guided_step(np.zeros(SHAPE), 5, zero_noise, nan_reward, tiny_sched, gcfg, RngStream(0, 0))


def test_gradient_is_clipped_and_norm_recorded(tiny_sched):
    big = np.zeros(SHAPE)
    big[0, 0] = 10.0

    def reward_fn(x: np.ndarray, t: int) -> tuple[float, np.ndarray]:
        return 0.5, big

    x_t = np.zeros(SHAPE)
    guided = GuidanceConfig(mode="unweighted", eta=0.0, clip=1.0)
    x_guided, record = guided_step(x_t, 1, zero_noise, reward_fn, tiny_sched, guided, RngStream(0, 0))
    x_plain, _ = guided_step(x_t, 1, zero_noise, reward_fn, tiny_sched, OFF, RngStream(0, 0))

    assert record.reward == 0.5
    assert record.grad_norm == pytest.approx(10.0)
    assert np.linalg.norm(x_guided - x_plain) == pytest.approx(1.0)


def test_snapshots_are_kept_on_request(tiny_sched):
    keep = OFF.model_copy(update={"keep_snapshots": True})
    _, records = run_chain(SHAPE, zero_noise, None, tiny_sched, keep, RngStream(0, 0))
    assert all(r.x_t is not None and r.x_t.shape == SHAPE for r in records)

    _, records = run_chain(SHAPE, zero_noise, None, tiny_sched, OFF, RngStream(0, 0))
    assert all(r.x_t is None for r in records)


def test_guided_sample_records_rewards(
    tiny_denoiser, tiny_reward_model, tiny_index, tiny_sched, conditions
):
    gcfg = GuidanceConfig(mode="unweighted", mu=1.0, eta=0.1, steps=5)
    motion, trace = sample(
        conditions[0],
        tiny_denoiser,
        tiny_reward_model,
        tiny_index,
        tiny_sched,
        gcfg,
        RngStream(0, 0),
    )
    assert motion.frames.shape == SHAPE
    assert len(trace.records) == 5
    assert all(r.reward is not None and np.isfinite(r.reward) for r in trace.records)
    assert trace.final_reward == trace.records[-1].reward
    assert trace.condition == conditions[0]


def test_guidance_changes_the_sample(
    tiny_denoiser, tiny_reward_model, tiny_index, tiny_sched, conditions, unguided
):
    gcfg = GuidanceConfig(mode="unweighted", steps=5)
    a, _ = unguided(conditions[0], OFF)
    b, _ = sample(
        conditions[0],
        tiny_denoiser,
        tiny_reward_model,
        tiny_index,
        tiny_sched,
        gcfg,
        RngStream(0, 0),
    )
    assert a != b


def test_guided_sample_needs_its_inputs(tiny_denoiser, tiny_reward_model, tiny_sched, conditions):
    cond = conditions[0]
    with pytest.raises(MissingInputError):
        sample(cond, tiny_denoiser, None, None, tiny_sched, GuidanceConfig(), RngStream(0, 0))
    with pytest.raises(MissingInputError):
        sample(
            cond,
            tiny_denoiser,
            tiny_reward_model,
            None,
            tiny_sched,
            GuidanceConfig(eta=0.1),
            RngStream(0, 0),
        )
    # text reward alone needs no index
    gcfg = GuidanceConfig(eta=0.0, steps=3)
    sample(cond, tiny_denoiser, tiny_reward_model, None, tiny_sched, gcfg, RngStream(0, 0))


def test_batch_of_one_matches_single_sample(conditions, unguided, batch):
    [(motion, trace)] = batch([conditions[1]], seed=4)
    single, _ = unguided(conditions[1], OFF, seed=4)
    assert motion == single
    assert trace.stream_id == 0


def test_condition_keyed_streams_follow_the_condition(conditions, batch):
    forward = batch(conditions, seed=1, stream_key="condition")
    backward = batch(conditions[::-1], seed=1, stream_key="condition")
    for (m_a, t_a), (m_b, t_b) in zip(forward, reversed(backward)):
        assert m_a == m_b
        assert t_a.stream_id == t_b.stream_id == condition_stream_id(t_a.condition)


def test_workers_do_not_change_results(conditions, batch):
    serial = batch(conditions, seed=2)
    parallel = batch(conditions, seed=2, n_workers=2)
    assert [m for m, _ in serial] == [m for m, _ in parallel]


def test_empty_batch_is_rejected(batch):
    with pytest.raises(ValueError):
        batch([], seed=0)


def test_named_condition_samples_cleanly(unguided):
    motion, _ = unguided(Condition.from_name("spiral"), GuidanceConfig(mode="off", steps=3))
    assert np.all(np.isfinite(motion.frames))
