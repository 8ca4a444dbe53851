"""Residual-MLP noise predictor eps_theta(x_t, t, c) and its training loop.

The network sees the flattened motion, sinusoidal timestep features and the
mean of the condition's token embeddings. Rows whose condition mask is 0 use a
learned null embedding instead, which gives the unconditional branch for
classifier-free guidance.
"""

from collections.abc import Callable
from dataclasses import dataclass, field

import numpy as np
from loguru import logger
from tqdm import tqdm

from reguide.artifacts.checkpoint import Checkpoint
from reguide.config import DenoiserConfig, DenoiserTrainConfig
from reguide.diffusion.schedule import NoiseSchedule, cfg_epsilon, forward_noise
from reguide.errors import EmptyInputError, NonFiniteError, ShapeError
from reguide.numerics import autodiff as ad
from reguide.numerics.autodiff import Tape, Tensor
from reguide.numerics.layers import (
    Params,
    TensorParams,
    add_layer_norm,
    add_linear,
    as_tensors,
    count_parameters,
    layer_norm,
    linear,
    sinusoidal_embedding,
)
from reguide.numerics.optim import AdamW
from reguide.numerics.rng import RngStream
from reguide.synthdata.generator import Condition, Dataset, validate_tokens

COMPONENT = "denoiser"


def init_denoiser_params(config: DenoiserConfig, seed: int) -> Params:
    stream = RngStream(seed, 0)
    flat = config.n_frames * config.dim
    h = config.hidden
    params: Params = {}
    add_linear(params, "in", stream, flat, h)
    add_linear(params, "time", stream, config.time_dim, h)
    params["tokens"] = stream.normal((config.vocab_size, config.cond_dim)) * 0.02
    params["null"] = np.zeros(config.cond_dim)
    add_linear(params, "cond", stream, config.cond_dim, h)
    for i in range(config.n_blocks):
        add_layer_norm(params, f"block{i}.ln", h)
        add_linear(params, f"block{i}.fc1", stream, h, h)
        add_linear(params, f"block{i}.fc2", stream, h, h, gain=0.5)
    add_layer_norm(params, "out.ln", h)
    add_linear(params, "out", stream, h, flat, gain=0.5)
    return params


def denoiser_forward(
    config: DenoiserConfig,
    p: TensorParams,
    x_t: np.ndarray | Tensor,
    t: np.ndarray,
    tokens: np.ndarray,
    cond_mask: np.ndarray,
) -> Tensor:
    """Predict the noise for a batch.

    Args:
        config: Network shape.
        p: Parameters as tensors (watched for training, constants for inference).
        x_t: Noisy motions, shape [B, N, D].
        t: Timesteps, shape [B].
        tokens: Condition tokens, shape [B, L].
        cond_mask: 1 keeps the condition, 0 swaps in the null embedding; shape [B].

    Returns:
        Tensor: Predicted noise with the shape of `x_t`.
    """
    x_t = ad.as_tensor(x_t)
    batch = x_t.shape[0]
    x = ad.reshape(x_t, (batch, config.n_frames * config.dim))
    temb = Tensor(sinusoidal_embedding(t, config.time_dim))

    emb = ad.mean(ad.take(p["tokens"], tokens), axis=1)
    mask = np.asarray(cond_mask, dtype=np.float64).reshape(batch, 1)
    cemb = emb * mask + p["null"] * (1.0 - mask)

    h = linear(p, "in", x) + ad.silu(linear(p, "time", temb)) + linear(p, "cond", cemb)
    for i in range(config.n_blocks):
        inner = ad.silu(linear(p, f"block{i}.fc1", layer_norm(p, f"block{i}.ln", h)))
        h = h + linear(p, f"block{i}.fc2", inner)
    out = linear(p, "out", ad.silu(layer_norm(p, "out.ln", h)))
    return ad.reshape(out, x_t.shape)


@dataclass
class Denoiser:
    config: DenoiserConfig
    params: Params
    history: list[float] = field(default_factory=list)

    @property
    def n_params(self) -> int:
        return count_parameters(self.params)

    def predict(
        self, x_t: np.ndarray, t: np.ndarray, tokens: np.ndarray, cond_mask: np.ndarray
    ) -> np.ndarray:
        p = as_tensors(self.params)
        return denoiser_forward(self.config, p, x_t, t, tokens, cond_mask).value

    def guided_noise_fn(
        self, cond: Condition, cfg_scale: float
    ) -> Callable[[np.ndarray, int], np.ndarray]:
        """eps(x, t) for one condition, CFG-combined with the null branch."""
        tokens = validate_tokens(np.array([cond.token_seq, cond.token_seq]), self.config.vocab_size)
        mask = np.array([1.0, 0.0])

        def noise_fn(x: np.ndarray, t: int) -> np.ndarray:
            both = self.predict(np.stack([x, x]), np.array([t, t]), tokens, mask)
            return cfg_epsilon(both[0], both[1], cfg_scale)

        return noise_fn

    def to_checkpoint(self) -> Checkpoint:
        return Checkpoint(
            component=COMPONENT,
            config=self.config.model_dump(),
            params=self.params,
            extra={"n_params": self.n_params, "final_loss": self.history[-1] if self.history else None},
        )

    @classmethod
    def from_checkpoint(cls, checkpoint: Checkpoint) -> "Denoiser":
        return cls(config=DenoiserConfig(**checkpoint.config), params=checkpoint.params)


def train_denoiser(
    dataset: Dataset,
    sched: NoiseSchedule,
    config: DenoiserConfig,
    train_config: DenoiserTrainConfig,
    seed: int,
    show_progress: bool = False,
) -> Denoiser:
    """Fit eps_theta with the standard noise-prediction MSE.

    Each batch element gets a uniform timestep in [1, T], fresh Gaussian noise,
    and loses its condition with probability `p_uncond`.

    Args:
        dataset: Training pairs.
        sched: Noise schedule.
        config: Network shape.
        train_config: Optimisation settings.
        seed: Seed for initialisation and batch sampling.
        show_progress: Show a tqdm bar.

    Returns:
        Denoiser: Trained network; `history` holds the per-step loss.

    Raises:
        EmptyInputError: If the dataset holds no pairs.
        NonFiniteError: If the loss becomes NaN or infinite.
    """
    if len(dataset) == 0:
        raise EmptyInputError("cannot train a denoiser on an empty dataset")
    if (dataset.n_frames, dataset.dim) != (config.n_frames, config.dim):
        raise ShapeError(
            f"dataset frames {dataset.n_frames}x{dataset.dim} do not match "
            f"denoiser {config.n_frames}x{config.dim}"
        )

    motions, tokens = dataset.motions, dataset.tokens
    params = init_denoiser_params(config, seed)
    optimizer = AdamW(
        lr=train_config.lr,
        weight_decay=train_config.weight_decay,
        max_grad_norm=train_config.max_grad_norm,
    )
    batch_size = min(train_config.batch_size, len(dataset))
    steps_per_epoch = max(1, len(dataset) // batch_size)
    history: list[float] = []
    logger.info(
        f"Training denoiser ({count_parameters(params)} params) for {train_config.steps} steps"
    )

    for step in tqdm(range(train_config.steps), disable=not show_progress):
        stream = RngStream(seed, 1 + step)
        idx = stream.integers(0, len(dataset), batch_size)
        t = stream.integers(1, sched.T + 1, batch_size)
        eps = stream.normal((batch_size, config.n_frames, config.dim))
        keep = (stream.random(batch_size) >= train_config.p_uncond).astype(np.float64)
        x_t = forward_noise(motions[idx], t, eps, sched)

        tape = Tape()
        p = as_tensors(params, tape)
        pred = denoiser_forward(config, p, x_t, t, tokens[idx], keep)
        diff = pred - eps
        loss = ad.mean(diff * diff)
        value = loss.item()
        if not np.isfinite(value):
            raise NonFiniteError(
                f"denoiser loss is {value} at step {step} "
                f"(t range {int(t.min())}..{int(t.max())}, lr {train_config.lr})"
            )
        params = optimizer.step(params, ad.grad(loss, p))
        history.append(value)

        if (step + 1) % steps_per_epoch == 0:
            epoch = (step + 1) // steps_per_epoch
            recent = float(np.mean(history[-steps_per_epoch:]))
            logger.info(f"epoch {epoch}: mse {recent:.5f}")

    return Denoiser(config=config, params=params, history=history)
