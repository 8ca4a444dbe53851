"""Noise schedules, the noise-prediction network and plain DDPM sampling."""

from reguide.diffusion.denoiser import Denoiser, train_denoiser
from reguide.diffusion.sampling import ddpm_sample
from reguide.diffusion.schedule import (
    NoiseSchedule,
    cfg_epsilon,
    ddpm_mean,
    forward_noise,
    make_schedule,
    sampling_timesteps,
    step_coefficients,
)

__all__ = [
    "Denoiser",
    "NoiseSchedule",
    "cfg_epsilon",
    "ddpm_mean",
    "ddpm_sample",
    "forward_noise",
    "make_schedule",
    "sampling_timesteps",
    "step_coefficients",
    "train_denoiser",
]
