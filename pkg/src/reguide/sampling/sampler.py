"""Reward-guided reverse diffusion.

One guided step from t to t_prev:

    x_bar  = x_t - beta / sqrt(1 - alpha_bar_t) * eps(x_t, t)
    x_prev = (x_bar + sqrt(beta) * eps) / sqrt(alpha) + w * grad R(x_t)

with eps ~ N(0, I) while t_prev > 0 and eps = 0 on the step into x_0. The weight w is
beta / sqrt(alpha) in "theorem3" mode and 1 in "unweighted" mode; "off" drops
the reward term and never evaluates the reward. Strided plans use the
respaced alpha = alpha_bar_t / alpha_bar_prev and keep the reward term as is.

The normalisers of the ideal and reward distributions never enter: only
gradients of log-densities are needed.
"""

from collections.abc import Callable, Sequence
from dataclasses import dataclass, field
from functools import partial
from typing import Literal

import numpy as np
from loguru import logger

from reguide.config import GuidanceConfig
from reguide.diffusion.denoiser import Denoiser
from reguide.diffusion.schedule import (
    NoiseSchedule,
    check_timesteps,
    ddpm_mean,
    sampling_timesteps,
    step_coefficients,
)
from reguide.errors import GuidanceError, MissingInputError
from reguide.numerics.rng import RngStream, derive_stream_id
from reguide.retrieval.index import RetrievalIndex, retrieve_anchor
from reguide.reward.model import RewardModel, encode_condition
from reguide.reward.rewards import reward_value_and_grad
from reguide.synthdata.generator import Condition, MotionSequence
from reguide.utils import parallel_process_with_retries

NoiseFn = Callable[[np.ndarray, int], np.ndarray]
RewardFn = Callable[[np.ndarray, int], tuple[float, np.ndarray]]
Mode = Literal["theorem3", "unweighted", "off"]


@dataclass
class StepRecord:
    t: int
    reward: float | None
    grad_norm: float
    x_t: np.ndarray | None = None


@dataclass
class SampleTrace:
    records: list[StepRecord]
    final: MotionSequence | None
    seed: int
    stream_id: int
    condition: Condition | None = None
    extra: dict = field(default_factory=dict)

    @property
    def final_reward(self) -> float | None:
        rewards = [r.reward for r in self.records if r.reward is not None]
        return rewards[-1] if rewards else None


def guided_update(
    x_bar: np.ndarray,
    noise: np.ndarray,
    grad: np.ndarray | None,
    alpha: float,
    beta: float,
    mode: Mode,
) -> np.ndarray:
    """Combine the DDPM mean, the noise draw and the reward gradient."""
    x = (x_bar + np.sqrt(beta) * noise) / np.sqrt(alpha)
    if mode == "off" or grad is None:
        return x
    if mode == "theorem3":
        return x + (beta / np.sqrt(alpha)) * grad
    if mode == "unweighted":
        return x + grad
    raise ValueError(f"unknown guidance mode {mode!r}")


def clip_gradient(grad: np.ndarray, threshold: float | None) -> tuple[np.ndarray, float]:
    norm = float(np.linalg.norm(grad))
    if threshold is not None and norm > threshold:
        grad = grad * (threshold / norm)
    return grad, norm


def guided_step(
    x_t: np.ndarray,
    t: int,
    noise_fn: NoiseFn,
    reward_fn: RewardFn | None,
    sched: NoiseSchedule,
    gcfg: GuidanceConfig,
    stream: RngStream,
    t_prev: int | None = None,
) -> tuple[np.ndarray, StepRecord]:
    """Advance one reverse step.

    Args:
        x_t: Current sample (any shape the callables accept).
        t: Current timestep, at least 1.
        noise_fn: CFG-combined noise prediction eps(x, t).
        reward_fn: Returns (reward, grad R) at (x, t); ignored when guidance is inactive.
        sched: Noise schedule.
        gcfg: Guidance settings.
        stream: Random stream of this sample.
        t_prev: Next timestep of the plan; defaults to t - 1.

    Returns:
        tuple[np.ndarray, StepRecord]: x_{t_prev} and the step record.

    Raises:
        ScheduleError: If t < 1.
        GuidanceError: If the reward gradient is not finite.
    """
    t_prev = t - 1 if t_prev is None else t_prev
    alpha, beta = step_coefficients(sched, t, t_prev)
    x_bar = ddpm_mean(x_t, t, noise_fn(x_t, t), sched, t_prev)
    noise = stream.normal(np.shape(x_t)) if t_prev > 0 else np.zeros(np.shape(x_t))

    reward, grad, norm = None, None, 0.0
    if gcfg.active and reward_fn is not None:
        reward, grad = reward_fn(x_t, t)
        if not np.all(np.isfinite(grad)):
            raise GuidanceError(f"non-finite reward gradient at step t={t}")
        grad, norm = clip_gradient(grad, gcfg.clip)

    x_prev = guided_update(x_bar, noise, grad, alpha, beta, gcfg.mode)
    snapshot = np.array(x_t) if gcfg.keep_snapshots else None
    return x_prev, StepRecord(t=t, reward=reward, grad_norm=norm, x_t=snapshot)


def resolve_timesteps(gcfg: GuidanceConfig, T: int) -> list[int]:  # noqa: N803
    if gcfg.timesteps is not None:
        return check_timesteps(gcfg.timesteps, T)
    return sampling_timesteps(T, gcfg.steps)


def run_chain(
    shape: Sequence[int],
    noise_fn: NoiseFn,
    reward_fn: RewardFn | None,
    sched: NoiseSchedule,
    gcfg: GuidanceConfig,
    stream: RngStream,
) -> tuple[np.ndarray, list[StepRecord]]:
    """x_T ~ N(0, I), then one guided step per planned timestep."""
    plan = resolve_timesteps(gcfg, sched.T)
    x = stream.normal(tuple(shape))
    records = []
    for i, t in enumerate(plan):
        t_prev = plan[i + 1] if i + 1 < len(plan) else 0
        x, record = guided_step(x, t, noise_fn, reward_fn, sched, gcfg, stream, t_prev)
        records.append(record)
    return x, records


def make_reward_fn(
    model: RewardModel,
    cond: Condition,
    z_anchor: np.ndarray | None,
    gcfg: GuidanceConfig,
) -> RewardFn:
    z_c = encode_condition(model, cond).vector
    return partial(
        _reward_at,
        model=model,
        cond=cond,
        z_anchor=z_anchor,
        z_c=z_c,
        gcfg=gcfg,
    )


def _reward_at(
    x: np.ndarray,
    t: int,
    model: RewardModel,
    cond: Condition,
    z_anchor: np.ndarray | None,
    z_c: np.ndarray,
    gcfg: GuidanceConfig,
) -> tuple[float, np.ndarray]:
    return reward_value_and_grad(
        model, x, t, cond, z_anchor, gcfg.mu, gcfg.eta, gcfg.reward_timestep, z_c=z_c
    )


def sample(
    cond: Condition,
    denoiser: Denoiser,
    reward_model: RewardModel | None,
    index: RetrievalIndex | None,
    sched: NoiseSchedule,
    gcfg: GuidanceConfig,
    stream: RngStream,
) -> tuple[MotionSequence, SampleTrace]:
    """Generate one motion for `cond`.

    The anchor is retrieved once, before the loop, and only when the
    motion-aligned reward is in use. With guidance inactive the output equals
    the plain DDPM sampler for the same stream.
    """
    noise_fn = denoiser.guided_noise_fn(cond, gcfg.cfg_scale)
    reward_fn = None
    if gcfg.active:
        if reward_model is None:
            raise MissingInputError("guided sampling needs a reward model")
        z_anchor = None
        if gcfg.eta != 0.0:
            if index is None:
                raise MissingInputError("eta != 0 needs a retrieval index for the anchor")
            _, anchor = retrieve_anchor(index, cond, reward_model)
            z_anchor = anchor.vector
        reward_fn = make_reward_fn(reward_model, cond, z_anchor, gcfg)

    shape = (denoiser.config.n_frames, denoiser.config.dim)
    x, records = run_chain(shape, noise_fn, reward_fn, sched, gcfg, stream)
    motion = MotionSequence(x)
    trace = SampleTrace(
        records=records,
        final=motion,
        seed=stream.seed,
        stream_id=stream.stream_id,
        condition=cond,
    )
    return motion, trace


def condition_stream_id(cond: Condition) -> int:
    return derive_stream_id(cond.class_id, cond.params)


def _sample_job(
    job: tuple[int, Condition],
    denoiser: Denoiser,
    reward_model: RewardModel | None,
    index: RetrievalIndex | None,
    sched: NoiseSchedule,
    gcfg: GuidanceConfig,
    seed: int,
) -> tuple[MotionSequence, SampleTrace]:
    stream_id, cond = job
    return sample(cond, denoiser, reward_model, index, sched, gcfg, RngStream(seed, stream_id))


def batch_sample(
    conditions: Sequence[Condition],
    denoiser: Denoiser,
    reward_model: RewardModel | None,
    index: RetrievalIndex | None,
    sched: NoiseSchedule,
    gcfg: GuidanceConfig,
    seed: int,
    n_workers: int = 1,
    stream_key: Literal["position", "condition"] = "position",
) -> list[tuple[MotionSequence, SampleTrace]]:
    """Sample every condition with its own stream; output order matches input order.

    Args:
        stream_key: "position" uses the list position as stream id, "condition"
            hashes the condition so results follow the condition, not its slot.
    """
    if not conditions:
        raise ValueError("batch_sample needs at least one condition")
    if stream_key == "position":
        jobs = list(enumerate(conditions))
    else:
        jobs = [(condition_stream_id(c), c) for c in conditions]
    task = partial(
        _sample_job,
        denoiser=denoiser,
        reward_model=reward_model,
        index=index,
        sched=sched,
        gcfg=gcfg,
        seed=seed,
    )
    logger.info(
        f"Sampling {len(jobs)} motions, mode={gcfg.mode}, mu={gcfg.mu}, eta={gcfg.eta}, "
        f"cfg={gcfg.cfg_scale}, workers={n_workers}"
    )
    return parallel_process_with_retries(task, jobs, n_workers=n_workers)
