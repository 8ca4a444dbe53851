"""Various pytest fixtures for running the tests."""

from typing import NamedTuple

import pytest
from loguru import logger

from reguide.config import (
    DatasetSpec,
    DenoiserConfig,
    DenoiserTrainConfig,
    RewardModelConfig,
    RewardTrainConfig,
)
from reguide.diffusion.denoiser import Denoiser, init_denoiser_params, train_denoiser
from reguide.diffusion.schedule import NoiseSchedule, make_schedule
from reguide.reward.model import RewardModel, init_reward_params
from reguide.reward.training import train_reward_model
from reguide.synthdata.generator import Dataset, build_dataset

TINY_FRAMES = 8
TINY_T = 100


class TrainedToy(NamedTuple):
    dataset: Dataset
    sched: NoiseSchedule
    reward_model: RewardModel
    denoiser: Denoiser


@pytest.fixture(autouse=True)
def capture_loguru_logs(caplog):
    # Redirect loguru logs to pytest's caplog
    handler_id = logger.add(caplog.handler, format="{message}")
    yield
    logger.remove(handler_id)


@pytest.fixture(scope="session")
def tiny_sched():
    return make_schedule(TINY_T)


@pytest.fixture(scope="session")
def tiny_dataset():
    return build_dataset(DatasetSpec.balanced(64, 16, 64, n_frames=TINY_FRAMES), seed=0)


@pytest.fixture(scope="session")
def tiny_reward_model():
    """Untrained reward model; embeddings are arbitrary but deterministic."""
    config = RewardModelConfig(
        n_frames=TINY_FRAMES,
        dim=2,
        T=TINY_T,
        d_model=16,
        d_z=8,
        n_heads=2,
        n_layers=1,
        cond_hidden=16,
        dec_hidden=16,
    )
    return RewardModel(config=config, params=init_reward_params(config, seed=0))


@pytest.fixture(scope="session")
def tiny_denoiser():
    config = DenoiserConfig(n_frames=TINY_FRAMES, dim=2, hidden=16, time_dim=8, cond_dim=8)
    return Denoiser(config=config, params=init_denoiser_params(config, seed=0))


@pytest.fixture(scope="session")
def trained_toy() -> TrainedToy:
    """Reward model and denoiser trained on a small benchmark; used by slow tests only."""
    sched = make_schedule(TINY_T)
    dataset = build_dataset(DatasetSpec.balanced(800, 100, 200, n_frames=TINY_FRAMES), seed=0)
    train = dataset.split("train")
    reward_model = train_reward_model(
        train,
        sched,
        RewardModelConfig(
            n_frames=TINY_FRAMES, dim=2, T=TINY_T, d_model=16, d_z=8, n_heads=2, n_layers=1
        ),
        RewardTrainConfig(epochs=30, batch_size=32),
        seed=0,
    )
    denoiser = train_denoiser(
        train,
        sched,
        DenoiserConfig(n_frames=TINY_FRAMES, dim=2, hidden=32, time_dim=16, cond_dim=16),
        DenoiserTrainConfig(steps=500, batch_size=64),
        seed=0,
    )
    return TrainedToy(dataset, sched, reward_model, denoiser)
