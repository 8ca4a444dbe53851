"""This module contains pydantic classes holding the config options of every pipeline stage."""

from pathlib import Path
from typing import Any, Literal, TypeVar

import yaml
from pydantic import BaseModel, Field, PositiveInt, model_validator

CLASS_NAMES = (
    "line",
    "arc-left",
    "arc-right",
    "zigzag",
    "spiral",
    "stop-go",
    "sine",
    "figure-eight",
)

ModelT = TypeVar("ModelT", bound=BaseModel)


def load_yml_config(path: Path) -> dict[str, Any]:
    """Returns the parsed YAML config file."""
    try:
        return yaml.safe_load(path.read_text()) or {}

    except FileNotFoundError as error:
        message = "Error: yml config file not found."
        raise FileNotFoundError(error, message) from error


def resolve_config(
    model: type[ModelT],
    config_file: Path | None,
    section: str,
    **overrides: Any,
) -> ModelT:
    """Build a config from an optional YAML section; non-None overrides win.

    Args:
        model: The pydantic class to build.
        config_file: Optional YAML file holding one block per pipeline stage.
        section: The block of the YAML file to use.
        overrides: Explicit values, typically CLI flags. `None` means "not given".

    Returns:
        The validated config object.
    """
    values: dict[str, Any] = {}
    if config_file is not None:
        values.update(load_yml_config(config_file).get(section) or {})
    values.update({k: v for k, v in overrides.items() if v is not None})
    return model(**values)


class DatasetSpec(BaseModel):
    """Per-split, per-class pair counts of a synthetic dataset."""

    train: dict[str, PositiveInt] = Field(
        default_factory=dict, description="Number of training pairs per motion class"
    )
    val: dict[str, PositiveInt] = Field(
        default_factory=dict, description="Number of validation pairs per motion class"
    )
    test: dict[str, PositiveInt] = Field(
        default_factory=dict, description="Number of test pairs per motion class"
    )
    n_frames: int = Field(16, ge=2, description="Frames per motion sequence")
    dim: Literal[2, 4] = Field(
        2, description="Feature dimensions per frame: positions, or positions plus velocities"
    )
    jitter: float = Field(0.01, ge=0.0, description="Std of the Gaussian jitter added to frames")

    @model_validator(mode="after")
    def check_classes(self) -> "DatasetSpec":
        for split in (self.train, self.val, self.test):
            unknown = set(split) - set(CLASS_NAMES)
            if unknown:
                raise ValueError(f"unknown motion classes: {sorted(unknown)}")
        return self

    @property
    def is_empty(self) -> bool:
        return not (self.train or self.val or self.test)

    @classmethod
    def balanced(
        cls, train: int = 800, val: int = 100, test: int = 100, **kwargs: Any
    ) -> "DatasetSpec":
        """Spread split sizes as evenly as possible over all classes."""

        def spread(total: int) -> dict[str, int]:
            base, extra = divmod(total, len(CLASS_NAMES))
            counts = {
                name: base + (1 if i < extra else 0) for i, name in enumerate(CLASS_NAMES)
            }
            return {k: v for k, v in counts.items() if v > 0}

        return cls(train=spread(train), val=spread(val), test=spread(test), **kwargs)


class ScheduleConfig(BaseModel):
    """DDPM noise schedule."""

    T: int = Field(1000, ge=1, description="Number of diffusion timesteps")
    beta_start: float = Field(1e-4, gt=0.0, lt=1.0, description="First beta of the schedule")
    beta_end: float = Field(0.02, gt=0.0, lt=1.0, description="Last beta of the schedule")
    kind: Literal["linear", "quadratic"] = Field("linear", description="Beta interpolation")


class DenoiserConfig(BaseModel):
    """Residual MLP noise predictor."""

    n_frames: int = Field(16, ge=2, description="Frames per motion")
    dim: int = Field(2, ge=1, description="Feature dimensions per frame")
    hidden: int = Field(96, ge=1, description="Width of the residual blocks")
    n_blocks: int = Field(2, ge=1, description="Number of residual blocks")
    time_dim: int = Field(32, ge=2, description="Width of the sinusoidal timestep features")
    cond_dim: int = Field(32, ge=1, description="Width of the condition token embeddings")
    vocab_size: int = Field(40, ge=1, description="Condition vocabulary size")


class DenoiserTrainConfig(BaseModel):
    """Noise-prediction training."""

    steps: int = Field(3000, ge=1, description="Optimisation steps")
    batch_size: int = Field(64, ge=1, description="Pairs per optimisation step")
    lr: float = Field(1e-3, gt=0.0, description="AdamW learning rate")
    weight_decay: float = Field(0.0, ge=0.0, description="AdamW decoupled weight decay")
    max_grad_norm: float | None = Field(1.0, description="Global gradient-norm clip")
    p_uncond: float = Field(
        0.1, ge=0.0, le=1.0, description="Probability of dropping the condition per element"
    )


class RewardModelConfig(BaseModel):
    """Step-aware reward model: motion encoder, condition encoder, motion decoder."""

    n_frames: int = Field(16, ge=2, description="Frames per motion")
    dim: int = Field(2, ge=1, description="Feature dimensions per frame")
    T: int = Field(1000, ge=1, description="Largest timestep of the timestep-token table")
    d_model: int = Field(32, ge=2, description="Token width of the motion encoder")
    d_z: int = Field(32, ge=1, description="Latent dimension")
    n_heads: int = Field(2, ge=1, description="Attention heads")
    n_layers: int = Field(2, ge=1, description="Self-attention layers")
    ff_mult: int = Field(2, ge=1, description="Feed-forward expansion factor")
    cond_hidden: int = Field(64, ge=1, description="Hidden width of the condition encoder")
    dec_hidden: int = Field(64, ge=1, description="Hidden width of the motion decoder")
    vocab_size: int = Field(40, ge=1, description="Condition vocabulary size")
    n_tokens: int = Field(5, ge=1, description="Tokens per condition")

    @model_validator(mode="after")
    def check_heads(self) -> "RewardModelConfig":
        if self.d_model % self.n_heads:
            raise ValueError("d_model must be divisible by n_heads")
        return self


class RewardTrainConfig(BaseModel):
    """Reward-model training with noise augmentation."""

    omega: float = Field(0.5, ge=0.0, le=1.0, description="Probability of keeping a sample clean")
    t_min: int = Field(1, ge=0, description="Smallest noise timestep")
    t_max: int | None = Field(None, ge=0, description="Largest noise timestep, defaults to T")
    neg_threshold: float = Field(
        0.9, ge=0.0, le=1.0, description="Condition similarity above which negatives are masked"
    )
    tau: float = Field(0.1, gt=0.0, description="InfoNCE temperature")
    weight_contrastive: float = Field(1.0, ge=0.0, description="Weight of the contrastive loss")
    weight_representation: float = Field(
        1.0, ge=0.0, description="Weight of the representation loss"
    )
    epochs: int = Field(50, ge=1, description="Passes over the training split")
    batch_size: int = Field(32, ge=1, description="Pairs per batch")
    lr: float = Field(1e-3, gt=0.0, description="AdamW learning rate")
    weight_decay: float = Field(1e-4, ge=0.0, description="AdamW decoupled weight decay")
    max_grad_norm: float | None = Field(1.0, description="Global gradient-norm clip")
    divergence_factor: float = Field(
        10.0, gt=1.0, description="Abort when the loss exceeds this multiple of the first loss"
    )

    @model_validator(mode="after")
    def check_range(self) -> "RewardTrainConfig":
        if self.t_max is not None and self.t_min > self.t_max:
            raise ValueError("t_min must not exceed t_max")
        return self


class GuidanceConfig(BaseModel):
    """Reward-guided reverse process."""

    mu: float = Field(1.0, description="Weight of the text-aligned reward")
    eta: float = Field(0.1, description="Weight of the motion-aligned reward")
    cfg_scale: float = Field(2.5, ge=0.0, description="Classifier-free guidance scale")
    mode: Literal["theorem3", "unweighted", "off"] = Field(
        "unweighted",
        description="theorem3 scales the reward gradient by beta/sqrt(alpha); unweighted adds it as is",
    )
    steps: int | None = Field(
        50, ge=1, description="Evenly strided sampling steps; None runs all T steps"
    )
    timesteps: list[int] | None = Field(
        None, description="Explicit descending timesteps; overrides `steps`"
    )
    clip: float | None = Field(1.0, gt=0.0, description="L2 clip of the reward gradient")
    reward_timestep: Literal["current", "clean"] = Field(
        "current", description="Timestep token fed to the reward model"
    )
    keep_snapshots: bool = Field(False, description="Store x_t of every step in the trace")

    @model_validator(mode="after")
    def check_timesteps(self) -> "GuidanceConfig":
        if self.timesteps is not None:
            if not self.timesteps:
                raise ValueError("timesteps must not be empty")
            if any(a <= b for a, b in zip(self.timesteps, self.timesteps[1:])):
                raise ValueError("timesteps must be strictly decreasing")
        return self

    @property
    def active(self) -> bool:
        """Whether the reward gradient is evaluated at all."""
        return self.mode != "off" and (self.mu != 0.0 or self.eta != 0.0)


class RunConfig(BaseModel):
    """Resolved settings of one CLI invocation, recorded in the run manifest."""

    command: str = Field(description="Sub-command name")
    seed: int = Field(0, description="Global seed every random stream derives from")
    out_dir: Path | None = Field(None, description="Directory receiving the run's artifacts")
    log_level: str = Field("INFO", description="Log verbosity")
    options: dict[str, Any] = Field(default_factory=dict, description="All other resolved flags")


class PipelineConfig(BaseModel):
    """Config object holding one block per pipeline stage. Enables loading from yaml file."""

    dataset: DatasetSpec = Field(default_factory=DatasetSpec.balanced)
    schedule: ScheduleConfig = Field(default_factory=ScheduleConfig)
    denoiser: DenoiserConfig = Field(default_factory=DenoiserConfig)
    denoiser_train: DenoiserTrainConfig = Field(default_factory=DenoiserTrainConfig)
    reward: RewardModelConfig = Field(default_factory=RewardModelConfig)
    reward_train: RewardTrainConfig = Field(default_factory=RewardTrainConfig)
    guidance: GuidanceConfig = Field(default_factory=GuidanceConfig)
