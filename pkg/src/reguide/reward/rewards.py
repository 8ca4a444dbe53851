"""Cosine rewards and the gradient of the dual-alignment reward w.r.t. the noisy motion."""

from typing import Literal

import numpy as np

from reguide.errors import MissingInputError, NonFiniteError, ShapeError, ZeroNormError
from reguide.numerics import autodiff as ad
from reguide.numerics.autodiff import Tape
from reguide.reward.model import RewardModel, encode_condition, motion_latent
from reguide.synthdata.generator import Condition

RewardTimestep = Literal["current", "clean"]


def _cosine(a: np.ndarray, b: np.ndarray) -> float:
    a = np.asarray(a, dtype=np.float64).reshape(-1)
    b = np.asarray(b, dtype=np.float64).reshape(-1)
    if a.shape != b.shape:
        raise ShapeError(f"latent sizes differ: {a.size} vs {b.size}")
    norm_a, norm_b = np.linalg.norm(a), np.linalg.norm(b)
    if norm_a == 0.0 or norm_b == 0.0:
        raise ZeroNormError("cosine reward of a zero-norm vector is undefined")
    return float(np.clip(a @ b / (norm_a * norm_b), -1.0, 1.0))


def reward_text(z_x: np.ndarray, z_c: np.ndarray) -> float:
    """Text-aligned reward: cos(z_x, z_c)."""
    return _cosine(z_x, z_c)


def reward_motion(z_x: np.ndarray, z_anchor: np.ndarray) -> float:
    """Motion-aligned reward: cos(z_x, z_anchor)."""
    return _cosine(z_x, z_anchor)


def _reward_tensor(
    model: RewardModel,
    x: ad.Tensor,
    t: int,
    z_c: np.ndarray,
    z_anchor: np.ndarray | None,
    mu: float,
    eta: float,
) -> ad.Tensor:
    z_x = motion_latent(model.config, model.constants(), ad.reshape(x, (1,) + x.shape), np.array([t]))[0]
    total = mu * ad.cosine_similarity(z_x, z_c)
    if eta != 0.0:
        if z_anchor is None:
            raise MissingInputError("eta != 0 needs an anchor embedding")
        total = total + eta * ad.cosine_similarity(z_x, z_anchor)
    return total


def _checked_inputs(
    model: RewardModel, x_t: np.ndarray, t: int, timestep: RewardTimestep
) -> tuple[np.ndarray, int]:
    x_t = model.check_motion(x_t)
    model.check_timestep(t)
    return x_t, 0 if timestep == "clean" else int(t)


def reward_total(
    model: RewardModel,
    x_t: np.ndarray,
    t: int,
    c: Condition,
    z_anchor: np.ndarray | None,
    mu: float,
    eta: float,
    timestep: RewardTimestep = "current",
) -> float:
    """Dual-alignment reward mu * cos(z_x, z_c) + eta * cos(z_x, z_anchor)."""
    x_t, step = _checked_inputs(model, x_t, t, timestep)
    if not (np.isfinite(mu) and np.isfinite(eta)):
        raise NonFiniteError("reward weights must be finite")
    z_x = model.motion_embeddings(x_t[None], step)[0]
    total = mu * reward_text(z_x, encode_condition(model, c).vector)
    if eta != 0.0:
        if z_anchor is None:
            raise MissingInputError("eta != 0 needs an anchor embedding")
        total += eta * reward_motion(z_x, z_anchor)
    return float(total)


def reward_value_and_grad(
    model: RewardModel,
    x_t: np.ndarray,
    t: int,
    c: Condition,
    z_anchor: np.ndarray | None,
    mu: float,
    eta: float,
    timestep: RewardTimestep = "current",
    z_c: np.ndarray | None = None,
) -> tuple[float, np.ndarray]:
    """Reward value and its gradient w.r.t. x_t only.

    The model weights, the timestep and the anchor are held constant; only the
    motion is watched on the tape.

    Args:
        model: Trained reward model.
        x_t: Noisy motion [N, D].
        t: Current timestep.
        c: Condition.
        z_anchor: Anchor latent, needed when `eta` is non-zero.
        mu: Weight of the text-aligned reward.
        eta: Weight of the motion-aligned reward.
        timestep: "current" feeds t to the timestep token, "clean" feeds 0.
        z_c: Precomputed condition latent.

    Returns:
        tuple[float, np.ndarray]: The reward and a gradient shaped like `x_t`.
    """
    x_t, step = _checked_inputs(model, x_t, t, timestep)
    if z_c is None:
        z_c = encode_condition(model, c).vector
    for vector in (z_c, z_anchor):
        if vector is not None and np.linalg.norm(vector) == 0.0:
            raise ZeroNormError("cosine reward of a zero-norm vector is undefined")

    tape = Tape()
    x = tape.watch(x_t)
    total = _reward_tensor(model, x, step, z_c, z_anchor, mu, eta)
    return total.item(), ad.grad(total, x)


def reward_grad(
    model: RewardModel,
    x_t: np.ndarray,
    t: int,
    c: Condition,
    z_anchor: np.ndarray | None,
    mu: float,
    eta: float,
    timestep: RewardTimestep = "current",
) -> np.ndarray:
    """Gradient of `reward_total` with respect to x_t."""
    return reward_value_and_grad(model, x_t, t, c, z_anchor, mu, eta, timestep)[1]
