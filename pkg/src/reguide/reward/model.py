"""Step-aware reward model: motion encoder, condition encoder and motion decoder.

The motion encoder is a small pre-norm transformer over the token sequence
``[readout, e_t, frame_1, ..., frame_N]``. ``e_t`` is a learned row of a
``(T + 1)``-row timestep table (row 0 is the clean-motion token); it is
prepended to the frame tokens, never added to them. The readout token's final
state, projected to ``d_z``, is the motion latent z_x.

The condition encoder embeds the condition tokens with per-slot positions and
maps them through an MLP to z_c. The decoder maps any latent back to a motion.
"""

from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from reguide.artifacts.checkpoint import Checkpoint, checkpoint_hash
from reguide.config import RewardModelConfig
from reguide.errors import ScheduleError, ShapeError
from reguide.numerics import autodiff as ad
from reguide.numerics.autodiff import Tensor, TensorLike
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
from reguide.numerics.rng import RngStream
from reguide.synthdata.generator import Condition, validate_tokens

COMPONENT = "reward"


@dataclass(frozen=True, eq=False)
class LatentEmbedding:
    vector: np.ndarray
    modality: Literal["motion", "condition"]

    @property
    def dim(self) -> int:
        return self.vector.shape[-1]


def init_reward_params(config: RewardModelConfig, seed: int) -> Params:
    stream = RngStream(seed, 0)
    d, n_tok = config.d_model, config.n_tokens
    params: Params = {}

    add_linear(params, "frame", stream, config.dim, d)
    params["frame_pos"] = stream.normal((config.n_frames, d)) * 0.1
    params["t_table"] = sinusoidal_embedding(np.arange(config.T + 1), d)
    params["readout"] = stream.normal(d) * 0.1
    for i in range(config.n_layers):
        add_layer_norm(params, f"layer{i}.ln1", d)
        add_linear(params, f"layer{i}.qkv", stream, d, 3 * d)
        add_linear(params, f"layer{i}.attn_out", stream, d, d, gain=0.5)
        add_layer_norm(params, f"layer{i}.ln2", d)
        add_linear(params, f"layer{i}.ff1", stream, d, config.ff_mult * d)
        add_linear(params, f"layer{i}.ff2", stream, config.ff_mult * d, d, gain=0.5)
    add_layer_norm(params, "final.ln", d)
    add_linear(params, "proj", stream, d, config.d_z)

    params["cond.tokens"] = stream.normal((config.vocab_size, d)) * 0.1
    params["cond.slot"] = stream.normal((n_tok, d)) * 0.1
    add_linear(params, "cond.fc1", stream, n_tok * d, config.cond_hidden)
    add_linear(params, "cond.fc2", stream, config.cond_hidden, config.d_z)

    add_linear(params, "dec.fc1", stream, config.d_z, config.dec_hidden)
    add_linear(params, "dec.fc2", stream, config.dec_hidden, config.n_frames * config.dim)
    return params


def _attention(config: RewardModelConfig, p: TensorParams, i: int, h: Tensor) -> Tensor:
    batch, length, d = h.shape
    heads, head_dim = config.n_heads, d // config.n_heads
    qkv = linear(p, f"layer{i}.qkv", layer_norm(p, f"layer{i}.ln1", h))

    def split(start: int) -> Tensor:
        part = qkv[:, :, start : start + d]
        return ad.transpose(ad.reshape(part, (batch, length, heads, head_dim)), (0, 2, 1, 3))

    q, k, v = split(0), split(d), split(2 * d)
    scores = ad.matmul(q, ad.transpose(k, (0, 1, 3, 2))) / np.sqrt(head_dim)
    mixed = ad.matmul(ad.softmax(scores, axis=-1), v)
    merged = ad.reshape(ad.transpose(mixed, (0, 2, 1, 3)), (batch, length, d))
    return linear(p, f"layer{i}.attn_out", merged)


def motion_latent(
    config: RewardModelConfig, p: TensorParams, x: TensorLike, t: np.ndarray
) -> Tensor:
    """z_x for a batch of motions `x` [B, N, D] at timesteps `t` [B]."""
    x = ad.as_tensor(x)
    batch = x.shape[0]
    d = config.d_model
    frames = linear(p, "frame", x) + p["frame_pos"]
    step = ad.reshape(ad.take(p["t_table"], np.asarray(t, dtype=np.int64)), (batch, 1, d))
    readout = ad.broadcast_to(ad.reshape(p["readout"], (1, 1, d)), (batch, 1, d))
    h = ad.concat([readout, step, frames], axis=1)
    for i in range(config.n_layers):
        h = h + _attention(config, p, i, h)
        inner = ad.silu(linear(p, f"layer{i}.ff1", layer_norm(p, f"layer{i}.ln2", h)))
        h = h + linear(p, f"layer{i}.ff2", inner)
    return linear(p, "proj", layer_norm(p, "final.ln", h[:, 0, :]))


def condition_latent(config: RewardModelConfig, p: TensorParams, tokens: np.ndarray) -> Tensor:
    """z_c for a batch of condition token sequences [B, L]."""
    tokens = np.asarray(tokens, dtype=np.int64)
    batch = tokens.shape[0]
    emb = ad.take(p["cond.tokens"], tokens) + p["cond.slot"]
    flat = ad.reshape(emb, (batch, config.n_tokens * config.d_model))
    return linear(p, "cond.fc2", ad.silu(linear(p, "cond.fc1", flat)))


def decode_latent(config: RewardModelConfig, p: TensorParams, z: TensorLike) -> Tensor:
    """Reconstruct motions [B, N, D] from latents [B, d_z]."""
    z = ad.as_tensor(z)
    out = linear(p, "dec.fc2", ad.silu(linear(p, "dec.fc1", z)))
    return ad.reshape(out, (z.shape[0], config.n_frames, config.dim))


@dataclass
class RewardModel:
    config: RewardModelConfig
    params: Params
    history: dict[str, list[float]] = field(default_factory=dict)
    _fingerprint: str | None = field(default=None, repr=False)

    @property
    def n_params(self) -> int:
        return count_parameters(self.params)

    @property
    def fingerprint(self) -> str:
        """Hash of the checkpoint this model serialises to."""
        if self._fingerprint is None:
            self._fingerprint = checkpoint_hash(self.to_checkpoint())
        return self._fingerprint

    def constants(self) -> TensorParams:
        return as_tensors(self.params)

    def check_motion(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        expected = (self.config.n_frames, self.config.dim)
        if x.shape[-2:] != expected:
            raise ShapeError(f"motion shape {x.shape[-2:]} does not match model {expected}")
        return x

    def check_timestep(self, t: np.ndarray | int) -> np.ndarray:
        t = np.asarray(t, dtype=np.int64)
        if np.any(t < 0) or np.any(t > self.config.T):
            raise ScheduleError(f"timestep outside the table range [0, {self.config.T}]")
        return t

    def motion_embeddings(
        self, motions: np.ndarray, t: np.ndarray | int = 0, batch_size: int = 256
    ) -> np.ndarray:
        """z_x for every motion in [M, N, D]."""
        motions = self.check_motion(motions)
        steps = np.broadcast_to(self.check_timestep(t), (motions.shape[0],))
        p = self.constants()
        chunks = [
            motion_latent(self.config, p, motions[i : i + batch_size], steps[i : i + batch_size]).value
            for i in range(0, motions.shape[0], batch_size)
        ]
        return np.concatenate(chunks) if chunks else np.zeros((0, self.config.d_z))

    def condition_embeddings(self, tokens: np.ndarray) -> np.ndarray:
        tokens = validate_tokens(tokens, self.config.vocab_size)
        if tokens.ndim != 2 or tokens.shape[1] != self.config.n_tokens:
            raise ShapeError(f"tokens must have shape [B, {self.config.n_tokens}]")
        return condition_latent(self.config, self.constants(), tokens).value

    def to_checkpoint(self) -> Checkpoint:
        return Checkpoint(
            component=COMPONENT,
            config=self.config.model_dump(),
            params=self.params,
            extra={"n_params": self.n_params},
        )

    @classmethod
    def from_checkpoint(cls, checkpoint: Checkpoint) -> "RewardModel":
        return cls(
            config=RewardModelConfig(**checkpoint.config),
            params=checkpoint.params,
        )


def encode_motion(model: RewardModel, x_t: np.ndarray, t: int) -> LatentEmbedding:
    """Embed one motion [N, D] at timestep `t`.

    Raises:
        ScheduleError: If `t` is outside [0, T].
        ShapeError: If the motion shape does not match the model.
    """
    x_t = model.check_motion(x_t)
    z = model.motion_embeddings(x_t[None], model.check_timestep(t))
    return LatentEmbedding(vector=z[0], modality="motion")


def encode_condition(model: RewardModel, c: Condition | tuple[int, ...]) -> LatentEmbedding:
    """Embed one condition (or its token sequence).

    Raises:
        UnknownTokenError: If a token is outside the model's vocabulary.
    """
    tokens = c.token_seq if isinstance(c, Condition) else tuple(c)
    z = model.condition_embeddings(np.array([tokens]))
    return LatentEmbedding(vector=z[0], modality="condition")
