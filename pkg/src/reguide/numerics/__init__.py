"""Tensors with reverse-mode autodiff, counter-based random streams and optimisers."""

from reguide.numerics.autodiff import (
    Tape,
    TapeNode,
    Tensor,
    finite_diff_grad,
    grad,
    value_and_grad,
)
from reguide.numerics.optim import AdamW
from reguide.numerics.rng import RngStream, derive_stream_id, sample_gaussian

__all__ = [
    "AdamW",
    "RngStream",
    "Tape",
    "TapeNode",
    "Tensor",
    "derive_stream_id",
    "finite_diff_grad",
    "grad",
    "sample_gaussian",
    "value_and_grad",
]
