"""Counter-based random streams.

Every stream is a Philox generator keyed by ``(seed, stream_id)``; the counter
lives inside the bit generator. Two streams built from the same pair produce
bit-identical draws no matter which worker or in which order they run.
"""

import hashlib
from collections.abc import Sequence

import numpy as np

from reguide.errors import ShapeError
from reguide.numerics.autodiff import Tensor

MASK64 = (1 << 64) - 1


class RngStream:
    """Deterministic random stream identified by a seed and a stream id."""

    def __init__(self, seed: int, stream_id: int = 0) -> None:
        self.seed = int(seed) & MASK64
        self.stream_id = int(stream_id) & MASK64
        key = np.array([self.seed, self.stream_id], dtype=np.uint64)
        self._generator = np.random.Generator(np.random.Philox(key=key))

    def __repr__(self) -> str:
        return f"RngStream(seed={self.seed}, stream_id={self.stream_id})"

    @property
    def counter(self) -> int:
        """Number of Philox blocks consumed so far."""
        state = self._generator.bit_generator.state["state"]
        counter = state["counter"]
        return int(counter[0]) | (int(counter[1]) << 64)

    def normal(self, shape: Sequence[int] | int) -> np.ndarray:
        return self._generator.standard_normal(shape)

    def uniform(
        self, low: float = 0.0, high: float = 1.0, size: Sequence[int] | int | None = None
    ) -> np.ndarray | float:
        return self._generator.uniform(low, high, size)

    def random(self, size: Sequence[int] | int | None = None) -> np.ndarray | float:
        return self._generator.random(size)

    def integers(
        self, low: int, high: int, size: Sequence[int] | int | None = None
    ) -> np.ndarray | int:
        """Integers drawn uniformly from the half-open range [low, high)."""
        return self._generator.integers(low, high, size)

    def permutation(self, n: int) -> np.ndarray:
        return self._generator.permutation(n)

    def spawn(self, stream_id: int) -> "RngStream":
        """A sibling stream sharing this stream's seed."""
        return RngStream(self.seed, stream_id)


def sample_gaussian(shape: Sequence[int], stream: RngStream) -> Tensor:
    """Draw a tensor of i.i.d. standard normal values from `stream`."""
    shape = tuple(int(s) for s in shape)
    if len(shape) == 0 or any(s <= 0 for s in shape):
        raise ShapeError(f"shape must be non-empty with positive sizes, got {shape}")
    return Tensor(stream.normal(shape))


def derive_stream_id(*parts: object) -> int:
    """Stable 64-bit stream id derived from arbitrary printable parts."""
    digest = hashlib.blake2b(digest_size=8)
    for part in parts:
        digest.update(repr(part).encode("utf-8"))
        digest.update(b"\x1f")
    return int.from_bytes(digest.digest(), "little", signed=False)
