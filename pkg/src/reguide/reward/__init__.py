"""Step-aware reward model, its losses, training loop and reward functions."""

from reguide.reward.losses import contrastive_loss, representation_loss
from reguide.reward.model import (
    LatentEmbedding,
    RewardModel,
    encode_condition,
    encode_motion,
)
from reguide.reward.rewards import (
    reward_grad,
    reward_motion,
    reward_text,
    reward_total,
    reward_value_and_grad,
)
from reguide.reward.training import train_reward_model

__all__ = [
    "LatentEmbedding",
    "RewardModel",
    "contrastive_loss",
    "encode_condition",
    "encode_motion",
    "representation_loss",
    "reward_grad",
    "reward_motion",
    "reward_text",
    "reward_total",
    "reward_value_and_grad",
    "train_reward_model",
]
