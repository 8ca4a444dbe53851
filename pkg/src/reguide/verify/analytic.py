"""Closed-form checks of the guided sampler on Gaussian data and a quadratic reward.

For data x0 ~ N(m, diag(v)) the forward marginal at t is Gaussian, so the
optimal noise prediction is affine in x_t:

    eps*(x_t, t) = sqrt(1 - ab) (x_t - sqrt(ab) m) / (ab v + 1 - ab)

With R(x) = -lam |x - a|^2 the reward gradient is affine too, hence every
guided step maps a Gaussian to a Gaussian and the sampler's output moments can
be propagated exactly (`chain_moments`). `product_oracle` gives the moments of
p * exp(R) normalised, the distribution guidance aims at.
"""

import json
from dataclasses import dataclass, field
from functools import partial
from typing import Literal

import numpy as np
import pandas as pd
from loguru import logger
from numpy.typing import ArrayLike
from scipy.special import logsumexp

from reguide.config import GuidanceConfig
from reguide.diffusion.schedule import NoiseSchedule, step_coefficients
from reguide.errors import EmptyInputError, ShapeError
from reguide.numerics.rng import RngStream
from reguide.sampling.sampler import resolve_timesteps, run_chain
from reguide.utils import parallel_process_with_retries

Mode = Literal["theorem3", "unweighted", "off"]
CHUNK = 1000


@dataclass(frozen=True, eq=False)
class GaussianSpec:
    mean: np.ndarray
    var: np.ndarray

    def __init__(self, mean: ArrayLike, var: ArrayLike) -> None:
        mean = np.atleast_1d(np.asarray(mean, dtype=np.float64))
        var = np.broadcast_to(np.asarray(var, dtype=np.float64), mean.shape).copy()
        if np.any(~(var > 0.0)):
            raise ValueError("every variance must be positive")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "var", var)

    @property
    def dim(self) -> int:
        return self.mean.size


@dataclass(frozen=True, eq=False)
class QuadraticReward:
    """R(x) = -lam * |x - a|^2."""

    target: np.ndarray
    lam: float

    def __init__(self, target: ArrayLike, lam: float) -> None:
        if not np.isfinite(lam) or lam < 0.0:
            raise ValueError(f"lambda must be finite and non-negative, got {lam}")
        object.__setattr__(self, "target", np.atleast_1d(np.asarray(target, dtype=np.float64)))
        object.__setattr__(self, "lam", float(lam))

    def value(self, x: np.ndarray) -> np.ndarray:
        return -self.lam * np.sum((x - self.target) ** 2, axis=-1)

    def grad(self, x: np.ndarray) -> np.ndarray:
        return -2.0 * self.lam * (x - self.target)

    def value_and_grad(self, x: np.ndarray, t: int) -> tuple[float, np.ndarray]:
        return float(np.mean(self.value(x))), self.grad(x)


def _posterior_denominator(spec: GaussianSpec, ab: float) -> np.ndarray:
    return ab * spec.var + (1.0 - ab)


def analytic_denoiser(
    x_t: ArrayLike, t: int, spec: GaussianSpec, sched: NoiseSchedule
) -> np.ndarray:
    """Optimal noise prediction E[eps | x_t] for Gaussian data.

    Raises:
        ScheduleError: If t is 0 or beyond the schedule.
    """
    sched.check_step(t)
    ab = sched.alpha_bar(t)
    x_t = np.asarray(x_t, dtype=np.float64)
    return np.sqrt(1.0 - ab) * (x_t - np.sqrt(ab) * spec.mean) / _posterior_denominator(spec, ab)


def product_oracle(spec: GaussianSpec, r: QuadraticReward) -> GaussianSpec:
    """Moments of N(m, v) * exp(-lam |x - a|^2), normalised."""
    var = 1.0 / (1.0 / spec.var + 2.0 * r.lam)
    return GaussianSpec(var * (spec.mean / spec.var + 2.0 * r.lam * r.target), var)


def _guidance_weight(mode: Mode, alpha: float, beta: float) -> float:
    if mode == "theorem3":
        return beta / np.sqrt(alpha)
    if mode == "unweighted":
        return 1.0
    return 0.0


def chain_moments(
    spec: GaussianSpec,
    r: QuadraticReward,
    sched: NoiseSchedule,
    timesteps: list[int],
    mode: Mode,
) -> GaussianSpec:
    """Exact output moments of the guided chain with the analytic denoiser.

    Each step is x' = P x + Q + sqrt(beta / alpha) eps, so the mean maps to
    P M + Q and the variance to P^2 V + beta / alpha (no noise on the step into t=0).
    """
    mean = np.zeros(spec.dim)
    var = np.ones(spec.dim)
    for i, t in enumerate(timesteps):
        t_prev = timesteps[i + 1] if i + 1 < len(timesteps) else 0
        alpha, beta = step_coefficients(sched, t, t_prev)
        ab = sched.alpha_bar(t)
        denom = _posterior_denominator(spec, ab)
        w = _guidance_weight(mode, alpha, beta) if r.lam > 0.0 else 0.0
        p = (1.0 - beta / denom) / np.sqrt(alpha) - 2.0 * r.lam * w
        q = beta * np.sqrt(ab) * spec.mean / (denom * np.sqrt(alpha)) + 2.0 * r.lam * w * r.target
        mean = p * mean + q
        var = p**2 * var + (beta / alpha if t_prev > 0 else 0.0)
    return GaussianSpec(mean, var)


def importance_moments(
    spec: GaussianSpec, r: QuadraticReward, n_samples: int, seed: int
) -> GaussianSpec:
    """Self-normalised importance estimate of the product moments from draws of N(m, v)."""
    if n_samples < 2:
        raise EmptyInputError("importance estimate needs at least two draws")
    stream = RngStream(seed, 0)
    x = spec.mean + np.sqrt(spec.var) * stream.normal((n_samples, spec.dim))
    log_w = r.value(x)
    w = np.exp(log_w - logsumexp(log_w))
    mean = w @ x
    var = w @ (x - mean) ** 2
    return GaussianSpec(mean, var)


@dataclass
class AnalyticReport:
    mode: str
    n_samples: int
    n_steps: int
    seed: int
    lam: float
    target: list[float]
    empirical_mean: np.ndarray
    empirical_var: np.ndarray
    chain: GaussianSpec
    oracle: GaussianSpec
    mean_tolerance: float = 3.0
    var_tolerance: float = 0.1
    passed: bool = field(init=False)

    def __post_init__(self) -> None:
        mean_gap = np.abs(self.empirical_mean - self.chain.mean)
        var_gap = np.abs(self.empirical_var - self.chain.var)
        self.passed = bool(
            np.all(mean_gap <= self.mean_tolerance * self.standard_error)
            and np.all(var_gap <= self.var_tolerance * self.chain.var)
        )

    @property
    def standard_error(self) -> np.ndarray:
        return np.sqrt(self.chain.var / self.n_samples)

    def to_frame(self) -> pd.DataFrame:
        rows = []
        for i in range(len(self.empirical_mean)):
            rows.append(
                {
                    "coord": i,
                    "mean": self.empirical_mean[i],
                    "chain mean": self.chain.mean[i],
                    "oracle mean": self.oracle.mean[i],
                    "3 SE": self.mean_tolerance * self.standard_error[i],
                    "var": self.empirical_var[i],
                    "chain var": self.chain.var[i],
                    "oracle var": self.oracle.var[i],
                }
            )
        return pd.DataFrame(rows).set_index("coord")

    def to_text(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        header = (
            f"analytic check [{status}] mode={self.mode} lambda={self.lam} "
            f"n={self.n_samples} steps={self.n_steps} seed={self.seed}"
        )
        return header + "\n" + self.to_frame().to_string(float_format=lambda v: f"{v:.5f}") + "\n"

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "n_samples": self.n_samples,
            "n_steps": self.n_steps,
            "seed": self.seed,
            "lambda": self.lam,
            "target": self.target,
            "passed": self.passed,
            "empirical": {"mean": self.empirical_mean.tolist(), "var": self.empirical_var.tolist()},
            "chain": {"mean": self.chain.mean.tolist(), "var": self.chain.var.tolist()},
            "oracle": {"mean": self.oracle.mean.tolist(), "var": self.oracle.var.tolist()},
            "standard_error": self.standard_error.tolist(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def _run_chunk(
    chunk: tuple[int, int],
    spec: GaussianSpec,
    r: QuadraticReward,
    sched: NoiseSchedule,
    gcfg: GuidanceConfig,
    seed: int,
) -> np.ndarray:
    stream_id, size = chunk
    noise_fn = partial(_denoise, spec=spec, sched=sched)
    reward_fn = r.value_and_grad if r.lam > 0.0 else None
    x, _ = run_chain((size, spec.dim), noise_fn, reward_fn, sched, gcfg, RngStream(seed, stream_id))
    return x


def _denoise(x: np.ndarray, t: int, spec: GaussianSpec, sched: NoiseSchedule) -> np.ndarray:
    return analytic_denoiser(x, t, spec, sched)


def run_analytic_check(
    spec: GaussianSpec,
    r: QuadraticReward,
    sched: NoiseSchedule,
    n_samples: int,
    mode: Mode,
    seed: int,
    timesteps: list[int] | None = None,
    n_workers: int = 1,
) -> AnalyticReport:
    """Run the guided sampler with the analytic denoiser and the exact reward gradient.

    Samples are drawn in chunks of 1000, chunk k on stream (seed, k), and
    compared with the exact moments of the same chain. Clipping is disabled.

    Args:
        spec: Data distribution.
        r: Quadratic reward.
        sched: Noise schedule.
        n_samples: Number of samples, at least 1000.
        mode: Weighting of the reward gradient.
        seed: Base seed.
        timesteps: Descending plan; defaults to every step of the schedule.
        n_workers: Chunks sampled in parallel.

    Returns:
        AnalyticReport: Empirical, exact-chain and product moments plus the verdict.
    """
    if n_samples < 1000:
        raise ValueError(f"n_samples must be at least 1000, got {n_samples}")
    if r.target.shape != spec.mean.shape and r.target.size != 1:
        raise ShapeError(f"target shape {r.target.shape} does not match mean {spec.mean.shape}")
    gcfg = GuidanceConfig(
        mu=1.0, eta=0.0, mode=mode, steps=None, timesteps=timesteps, clip=None, cfg_scale=1.0
    )
    plan = resolve_timesteps(gcfg, sched.T)

    chunks = [(k, min(CHUNK, n_samples - k * CHUNK)) for k in range(-(-n_samples // CHUNK))]
    task = partial(_run_chunk, spec=spec, r=r, sched=sched, gcfg=gcfg, seed=seed)
    x = np.concatenate(parallel_process_with_retries(task, chunks, n_workers=n_workers))

    report = AnalyticReport(
        mode=mode,
        n_samples=n_samples,
        n_steps=len(plan),
        seed=seed,
        lam=r.lam,
        target=np.broadcast_to(r.target, spec.mean.shape).tolist(),
        empirical_mean=x.mean(axis=0),
        empirical_var=x.var(axis=0, ddof=1),
        chain=chain_moments(spec, r, sched, plan, mode),
        oracle=product_oracle(spec, r),
    )
    log = logger.success if report.passed else logger.warning
    log(f"Analytic check {'passed' if report.passed else 'failed'} ({mode}, {n_samples} samples)")
    return report
