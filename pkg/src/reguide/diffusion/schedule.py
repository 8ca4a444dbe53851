"""DDPM noise schedules, forward noising and the reverse-step mean.

Timesteps are 1-based: ``betas[t - 1]`` is beta_t, while ``alpha_bars`` has
``T + 1`` entries with ``alpha_bars[0] == 1``.

With the SDE view of the same chain, f(x, t) = -beta_t x / 2 and g(t) = sqrt(beta_t).
"""

from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike

from reguide.errors import ScheduleError, ShapeError


@dataclass(frozen=True, eq=False)
class NoiseSchedule:
    betas: np.ndarray
    alphas: np.ndarray
    alpha_bars: np.ndarray
    kind: str = "custom"

    @property
    def T(self) -> int:  # noqa: N802
        return len(self.betas)

    def beta(self, t: int) -> float:
        self.check_step(t)
        return float(self.betas[t - 1])

    def alpha(self, t: int) -> float:
        self.check_step(t)
        return float(self.alphas[t - 1])

    def alpha_bar(self, t: int) -> float:
        if not 0 <= t <= self.T:
            raise ScheduleError(f"t={t} outside [0, {self.T}]")
        return float(self.alpha_bars[t])

    def check_step(self, t: int) -> None:
        if t == 0:
            raise ScheduleError("t=0 has no step below it")
        if not 1 <= t <= self.T:
            raise ScheduleError(f"t={t} outside [1, {self.T}]")


def schedule_from_betas(betas: ArrayLike, kind: str = "custom") -> NoiseSchedule:
    betas = np.asarray(betas, dtype=np.float64).reshape(-1)
    if betas.size == 0:
        raise ScheduleError("a schedule needs at least one step")
    if not np.all((betas > 0.0) & (betas < 1.0)):
        raise ScheduleError("every beta must lie strictly between 0 and 1")
    alphas = 1.0 - betas
    alpha_bars = np.concatenate([[1.0], np.cumprod(alphas)])
    if not np.all(np.diff(alpha_bars) < 0.0):
        raise ScheduleError("alpha_bar is not strictly decreasing")
    for array in (betas, alphas, alpha_bars):
        array.flags.writeable = False
    return NoiseSchedule(betas=betas, alphas=alphas, alpha_bars=alpha_bars, kind=kind)


def make_schedule(
    T: int,  # noqa: N803
    beta_start: float = 1e-4,
    beta_end: float = 0.02,
    kind: str = "linear",
) -> NoiseSchedule:
    """Build a DDPM schedule.

    Args:
        T: Number of timesteps.
        beta_start: beta_1.
        beta_end: beta_T.
        kind: "linear" interpolates beta, "quadratic" interpolates sqrt(beta).

    Raises:
        ScheduleError: On bounds violations or an unknown kind.
    """
    if T < 1:
        raise ScheduleError(f"T must be at least 1, got {T}")
    if not 0.0 < beta_start <= beta_end < 1.0:
        raise ScheduleError(
            f"need 0 < beta_start <= beta_end < 1, got {beta_start}, {beta_end}"
        )
    if kind == "linear":
        betas = np.linspace(beta_start, beta_end, T)
    elif kind == "quadratic":
        betas = np.linspace(np.sqrt(beta_start), np.sqrt(beta_end), T) ** 2
    else:
        raise ScheduleError(f"unknown schedule kind {kind!r}")
    return schedule_from_betas(betas, kind=kind)


def sampling_timesteps(T: int, steps: int | None = None) -> list[int]:  # noqa: N803
    """Descending timesteps of an evenly strided sampling plan ending at t=1."""
    if steps is None or steps >= T:
        return list(range(T, 0, -1))
    if steps < 1:
        raise ScheduleError(f"steps must be positive, got {steps}")
    if steps == 1:
        return [T]
    plan = np.round(np.linspace(T, 1, steps)).astype(int)
    return sorted({int(t) for t in plan}, reverse=True)


def check_timesteps(timesteps: Sequence[int], T: int) -> list[int]:  # noqa: N803
    plan = [int(t) for t in timesteps]
    if not plan:
        raise ScheduleError("sampling plan is empty")
    if any(a <= b for a, b in zip(plan, plan[1:])):
        raise ScheduleError(f"sampling plan must be strictly decreasing, got {plan}")
    if plan[0] > T or plan[-1] < 1:
        raise ScheduleError(f"sampling plan must lie within [1, {T}]")
    return plan


def step_coefficients(
    sched: NoiseSchedule, t: int, t_prev: int | None = None
) -> tuple[float, float]:
    """(alpha, beta) of the jump t -> t_prev.

    For a unit step these are exactly alpha_t and beta_t. Strided steps use the
    respaced ``alpha = alpha_bar_t / alpha_bar_prev``.
    """
    sched.check_step(t)
    if t_prev is None or t_prev == t - 1:
        return float(sched.alphas[t - 1]), float(sched.betas[t - 1])
    if not 0 <= t_prev < t:
        raise ScheduleError(f"t_prev={t_prev} must lie in [0, {t})")
    alpha = float(sched.alpha_bars[t] / sched.alpha_bars[t_prev])
    return alpha, 1.0 - alpha


def forward_noise(
    x0: ArrayLike, t: int | ArrayLike, eps: ArrayLike, sched: NoiseSchedule
) -> np.ndarray:
    """x_t = sqrt(alpha_bar_t) x0 + sqrt(1 - alpha_bar_t) eps.

    `t` may be a scalar or one timestep per leading batch element.
    """
    x0 = np.asarray(x0, dtype=np.float64)
    eps = np.asarray(eps, dtype=np.float64)
    if x0.shape != eps.shape:
        raise ShapeError(f"eps shape {eps.shape} does not match x0 shape {x0.shape}")
    t_arr = np.asarray(t, dtype=np.int64)
    if np.any(t_arr < 0) or np.any(t_arr > sched.T):
        raise ScheduleError(f"t outside [0, {sched.T}]")
    ab = sched.alpha_bars[t_arr].reshape(t_arr.shape + (1,) * (x0.ndim - t_arr.ndim))
    return np.sqrt(ab) * x0 + np.sqrt(1.0 - ab) * eps


def cfg_epsilon(eps_cond: ArrayLike, eps_uncond: ArrayLike, s: float) -> np.ndarray:
    """Classifier-free guidance: eps_uncond + s (eps_cond - eps_uncond)."""
    eps_cond = np.asarray(eps_cond, dtype=np.float64)
    eps_uncond = np.asarray(eps_uncond, dtype=np.float64)
    if eps_cond.shape != eps_uncond.shape:
        raise ShapeError(f"shapes differ: {eps_cond.shape} vs {eps_uncond.shape}")
    return eps_uncond + s * (eps_cond - eps_uncond)


def ddpm_mean(
    x_t: ArrayLike,
    t: int,
    eps_pred: ArrayLike,
    sched: NoiseSchedule,
    t_prev: int | None = None,
) -> np.ndarray:
    """x_bar = x_t - beta_t / sqrt(1 - alpha_bar_t) * eps_pred (before the 1/sqrt(alpha) scaling)."""
    _, beta = step_coefficients(sched, t, t_prev)
    x_t = np.asarray(x_t, dtype=np.float64)
    return x_t - (beta / np.sqrt(1.0 - sched.alpha_bars[t])) * np.asarray(eps_pred)
