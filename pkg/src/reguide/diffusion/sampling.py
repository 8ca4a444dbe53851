"""Plain ancestral DDPM sampling, without any reward term."""

from collections.abc import Callable, Sequence

import numpy as np

from reguide.diffusion.schedule import (
    NoiseSchedule,
    check_timesteps,
    ddpm_mean,
    step_coefficients,
)
from reguide.numerics.rng import RngStream


def ddpm_sample(
    noise_fn: Callable[[np.ndarray, int], np.ndarray],
    shape: Sequence[int],
    sched: NoiseSchedule,
    timesteps: Sequence[int],
    stream: RngStream,
) -> np.ndarray:
    """Run x_T ~ N(0, I) down to x_0.

    Each step is ``x <- (x_bar + sqrt(beta) eps) / sqrt(alpha)`` with eps = 0
    on the final step down to t = 0.
    """
    plan = check_timesteps(timesteps, sched.T)
    x = stream.normal(tuple(shape))
    for i, t in enumerate(plan):
        t_prev = plan[i + 1] if i + 1 < len(plan) else 0
        alpha, beta = step_coefficients(sched, t, t_prev)
        x_bar = ddpm_mean(x, t, noise_fn(x, t), sched, t_prev)
        noise = stream.normal(x.shape) if t_prev > 0 else np.zeros(x.shape)
        x = (x_bar + np.sqrt(beta) * noise) / np.sqrt(alpha)
    return x
