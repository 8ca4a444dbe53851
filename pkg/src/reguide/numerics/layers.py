"""Parameter initialisers and small functional network blocks."""

import numpy as np

from reguide.numerics import autodiff as ad
from reguide.numerics.autodiff import Tensor, TensorLike
from reguide.numerics.rng import RngStream

Params = dict[str, np.ndarray]
TensorParams = dict[str, Tensor]


def glorot(stream: RngStream, fan_in: int, fan_out: int, gain: float = 1.0) -> np.ndarray:
    scale = gain * np.sqrt(2.0 / (fan_in + fan_out))
    return stream.normal((fan_in, fan_out)) * scale


def add_linear(
    params: Params, name: str, stream: RngStream, fan_in: int, fan_out: int, gain: float = 1.0
) -> None:
    params[f"{name}.w"] = glorot(stream, fan_in, fan_out, gain)
    params[f"{name}.b"] = np.zeros(fan_out)


def add_layer_norm(params: Params, name: str, width: int) -> None:
    params[f"{name}.g"] = np.ones(width)
    params[f"{name}.b"] = np.zeros(width)


def linear(p: TensorParams, name: str, x: TensorLike) -> Tensor:
    return ad.matmul(x, p[f"{name}.w"]) + p[f"{name}.b"]


def layer_norm(p: TensorParams, name: str, x: TensorLike) -> Tensor:
    return ad.layer_norm(x, p[f"{name}.g"], p[f"{name}.b"])


def sinusoidal_embedding(t: np.ndarray, width: int, max_period: float = 10_000.0) -> np.ndarray:
    """Transformer-style sin/cos features of integer timesteps, shape [len(t), width]."""
    t = np.asarray(t, dtype=np.float64).reshape(-1)
    half = width // 2
    freqs = np.exp(-np.log(max_period) * np.arange(half) / half)
    angles = t[:, None] * freqs[None, :]
    emb = np.concatenate([np.sin(angles), np.cos(angles)], axis=1)
    if width % 2:
        emb = np.concatenate([emb, np.zeros((len(t), 1))], axis=1)
    return emb


def as_tensors(params: Params, tape: ad.Tape | None = None) -> TensorParams:
    """Wrap arrays as tensors; watched on `tape` when given, constants otherwise."""
    if tape is None:
        return {k: Tensor(v) for k, v in params.items()}
    return {k: tape.watch(v) for k, v in params.items()}


def count_parameters(params: Params) -> int:
    return int(sum(v.size for v in params.values()))
