"""Reward-model training with noise augmentation.

For every batch element the timestep starts at 0 (clean motion); with
probability ``1 - omega`` it is replaced by a discrete-uniform draw from
``[t_min, t_max]`` and the motion is forward-noised to that step. The model
minimises the weighted sum of the contrastive and representation losses.
"""

from dataclasses import dataclass

import numpy as np
from loguru import logger
from tqdm import tqdm

from reguide.config import RewardModelConfig, RewardTrainConfig
from reguide.diffusion.schedule import NoiseSchedule, forward_noise
from reguide.errors import EmptyInputError, NonFiniteError, ShapeError, TrainingDivergedError
from reguide.numerics import autodiff as ad
from reguide.numerics.autodiff import Tape
from reguide.numerics.layers import as_tensors
from reguide.numerics.optim import AdamW
from reguide.numerics.rng import RngStream
from reguide.reward.losses import contrastive_loss, representation_loss
from reguide.reward.model import RewardModel, condition_latent, init_reward_params, motion_latent
from reguide.synthdata.generator import Dataset


@dataclass
class NoiseDraw:
    t: np.ndarray
    clean: np.ndarray


def draw_timesteps(
    stream: RngStream, size: int, omega: float, t_min: int, t_max: int
) -> NoiseDraw:
    """t = 0 unless Uniform(0, 1) > omega, then t ~ discrete Uniform[t_min, t_max]."""
    u = np.asarray(stream.random(size))
    noisy_t = np.asarray(stream.integers(t_min, t_max + 1, size))
    noisy = u > omega
    return NoiseDraw(t=np.where(noisy, noisy_t, 0), clean=~noisy)


def contrastive_eval(
    model: RewardModel,
    dataset: Dataset,
    train_config: RewardTrainConfig,
    t: int = 0,
) -> float:
    """Contrastive loss of `dataset` in batches, at a fixed timestep (no noise for t=0)."""
    batch = min(train_config.batch_size, len(dataset))
    losses = []
    for start in range(0, len(dataset) - batch + 1, batch):
        chunk = dataset.subset(range(start, start + batch))
        z_m = model.motion_embeddings(chunk.motions, t)
        z_c = model.condition_embeddings(chunk.tokens)
        losses.append(
            contrastive_loss(z_m, z_c, train_config.tau, train_config.neg_threshold).item()
        )
    return float(np.mean(losses))


def train_reward_model(
    dataset: Dataset,
    sched: NoiseSchedule,
    config: RewardModelConfig,
    train_config: RewardTrainConfig,
    seed: int,
    val_dataset: Dataset | None = None,
    show_progress: bool = False,
) -> RewardModel:
    """Train the step-aware reward model.

    Args:
        dataset: Training pairs.
        sched: Noise schedule used for forward noising.
        config: Architecture.
        train_config: Loss and optimisation settings.
        seed: Seed for initialisation, shuffling and noise.
        val_dataset: Optional pairs whose clean contrastive loss is logged per epoch.
        show_progress: Show a tqdm bar over epochs.

    Returns:
        RewardModel: The trained model. `history` holds per-step losses, the
        running clean fraction and, if given, per-epoch validation losses.

    Raises:
        EmptyInputError: If the dataset is empty.
        NonFiniteError: If the loss becomes NaN or infinite.
        TrainingDivergedError: If the loss exceeds `divergence_factor` times the first loss.
    """
    if len(dataset) == 0:
        raise EmptyInputError("cannot train a reward model on an empty dataset")
    if (dataset.n_frames, dataset.dim) != (config.n_frames, config.dim):
        raise ShapeError(
            f"dataset frames {dataset.n_frames}x{dataset.dim} do not match "
            f"reward model {config.n_frames}x{config.dim}"
        )
    if config.T != sched.T:
        raise ShapeError(f"timestep table covers T={config.T}, schedule has T={sched.T}")
    t_max = train_config.t_max if train_config.t_max is not None else sched.T
    if t_max > sched.T:
        raise ShapeError(f"t_max={t_max} exceeds T={sched.T}")

    params = init_reward_params(config, seed)
    optimizer = AdamW(
        lr=train_config.lr,
        weight_decay=train_config.weight_decay,
        max_grad_norm=train_config.max_grad_norm,
    )
    motions, tokens = dataset.motions, dataset.tokens
    batch_size = min(train_config.batch_size, len(dataset))
    history: dict[str, list[float]] = {"loss": [], "clean_fraction": [], "val_contrastive": []}
    n_clean = n_seen = 0
    first_loss: float | None = None

    logger.info(
        f"Training reward model ({sum(v.size for v in params.values())} params), "
        f"omega={train_config.omega}, t in [{train_config.t_min}, {t_max}]"
    )
    if val_dataset is not None and len(val_dataset) > 0:
        initial = contrastive_eval(RewardModel(config, params), val_dataset, train_config)
        history["val_contrastive"].append(initial)
        logger.info(f"initial val contrastive {initial:.4f}")

    for epoch in tqdm(range(train_config.epochs), disable=not show_progress):
        order = RngStream(seed, 1 + epoch).permutation(len(dataset))
        epoch_losses = []
        for b, start in enumerate(range(0, len(dataset) - batch_size + 1, batch_size)):
            idx = order[start : start + batch_size]
            stream = RngStream(seed, ((1 + epoch) << 20) | (1 + b))
            draw = draw_timesteps(stream, batch_size, train_config.omega, train_config.t_min, t_max)
            eps = stream.normal((batch_size, config.n_frames, config.dim))
            x0 = motions[idx]
            x_t = forward_noise(x0, draw.t, eps, sched)

            tape = Tape()
            p = as_tensors(params, tape)
            z_m = motion_latent(config, p, x_t, draw.t)
            z_c = condition_latent(config, p, tokens[idx])
            loss = train_config.weight_contrastive * contrastive_loss(
                z_m, z_c, train_config.tau, train_config.neg_threshold
            ) + train_config.weight_representation * representation_loss(
                config, p, x_t, draw.t, x0, tokens[idx]
            )
            value = loss.item()
            if not np.isfinite(value):
                raise NonFiniteError(f"reward loss is {value} at epoch {epoch}, batch {b}")
            if first_loss is None:
                first_loss = value
            elif value > train_config.divergence_factor * first_loss:
                raise TrainingDivergedError(
                    f"loss {value:.4f} exceeds {train_config.divergence_factor}x "
                    f"the initial {first_loss:.4f} at epoch {epoch}"
                )
            params = optimizer.step(params, ad.grad(loss, p))

            n_clean += int(draw.clean.sum())
            n_seen += batch_size
            epoch_losses.append(value)
            history["loss"].append(value)
            history["clean_fraction"].append(n_clean / n_seen)

        message = f"epoch {epoch + 1}: loss {np.mean(epoch_losses):.4f}, clean {n_clean / n_seen:.3f}"
        if val_dataset is not None and len(val_dataset) > 0:
            val_loss = contrastive_eval(RewardModel(config, params), val_dataset, train_config)
            history["val_contrastive"].append(val_loss)
            message += f", val contrastive {val_loss:.4f}"
        logger.info(message)

    return RewardModel(config=config, params=params, history=history)
