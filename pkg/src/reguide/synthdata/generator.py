"""Procedural (condition, motion) pairs.

Each motion class has a closed-form 2-D trajectory sampled at ``t_k = k * dt``
with ``dt = 1``, expressed in a local frame and rotated by the condition's
heading. Conditions carry four parameters ``(speed, curvature, amplitude,
heading)``; classes ignore the ones they do not use. Frames may carry the
analytic velocity as two extra channels (``dim=4``).

Pair seeds encode ``(split, generator seed, index)`` so splits are disjoint by
seed range and every pair can be regenerated from its seed alone.
"""

import math
from collections.abc import Iterator, Sequence
from dataclasses import dataclass, field

import numpy as np
from loguru import logger

from reguide.config import CLASS_NAMES, DatasetSpec
from reguide.errors import (
    ConditionError,
    EmptyInputError,
    NonFiniteError,
    SeedError,
    ShapeError,
    UnknownTokenError,
)
from reguide.numerics.rng import RngStream
from reguide.utils import parallel_process_with_retries

PARAM_NAMES = ("speed", "curvature", "amplitude", "heading")
N_BINS = 8
N_CLASSES = len(CLASS_NAMES)
VOCAB_SIZE = N_CLASSES + len(PARAM_NAMES) * N_BINS
TOKENS_PER_CONDITION = 1 + len(PARAM_NAMES)

PERIOD = 8.0  # frames per zigzag / stop-go cycle
DT = 1.0

PARAM_STREAM = 0
JITTER_STREAM = 1

SPLITS = ("train", "val", "test")
SPLIT_CODES = {"train": 1, "val": 2, "test": 3, "generated": 4}
# Generator seeds occupy bits 32..59 of a pair seed.
SEED_BITS = 28

# (low, high) sampling range per parameter, in PARAM_NAMES order
CLASS_RANGES: dict[str, tuple[tuple[float, float], ...]] = {
    "line": ((0.1, 0.3), (0.0, 0.0), (0.0, 0.0), (-0.3, 0.3)),
    "arc-left": ((0.1, 0.3), (0.2, 0.5), (0.0, 0.0), (-0.3, 0.3)),
    "arc-right": ((0.1, 0.3), (0.2, 0.5), (0.0, 0.0), (-0.3, 0.3)),
    "zigzag": ((0.1, 0.3), (0.0, 0.0), (0.2, 0.5), (-0.3, 0.3)),
    "spiral": ((0.02, 0.06), (0.4, 0.8), (0.3, 0.6), (-0.3, 0.3)),
    "stop-go": ((0.1, 0.3), (0.0, 0.0), (0.0, 0.0), (-0.3, 0.3)),
    "sine": ((0.1, 0.3), (0.4, 0.8), (0.2, 0.5), (-0.3, 0.3)),
    "figure-eight": ((0.0, 0.0), (0.2, 0.4), (0.5, 1.0), (-0.3, 0.3)),
}


@dataclass(frozen=True)
class Condition:
    """Symbolic motion description: a class plus continuous parameters."""

    class_id: int
    params: tuple[float, float, float, float]

    def __post_init__(self) -> None:
        if not 0 <= self.class_id < N_CLASSES:
            raise ConditionError(f"unknown class_id {self.class_id}")
        params = tuple(float(p) for p in self.params)
        if len(params) != len(PARAM_NAMES):
            raise ConditionError(f"expected {len(PARAM_NAMES)} params, got {len(params)}")
        if not all(math.isfinite(p) for p in params):
            raise ConditionError(f"params must be finite, got {params}")
        object.__setattr__(self, "params", params)

    @property
    def name(self) -> str:
        return CLASS_NAMES[self.class_id]

    @property
    def token_seq(self) -> tuple[int, ...]:
        return tokenize(self)

    @property
    def in_range(self) -> bool:
        ranges = CLASS_RANGES[self.name]
        return all(lo <= p <= hi for p, (lo, hi) in zip(self.params, ranges))

    def describe(self) -> str:
        values = ",".join(f"{k}={v:g}" for k, v in zip(PARAM_NAMES, self.params))
        return f"{self.name}:{values}"

    @classmethod
    def from_name(cls, name: str, **params: float) -> "Condition":
        """Build a condition by class name; missing parameters take their range midpoint."""
        if name not in CLASS_NAMES:
            raise ConditionError(f"unknown motion class {name!r}")
        unknown = set(params) - set(PARAM_NAMES)
        if unknown:
            raise ConditionError(f"unknown parameters {sorted(unknown)}")
        ranges = CLASS_RANGES[name]
        values = tuple(
            float(params.get(key, (lo + hi) / 2))
            for key, (lo, hi) in zip(PARAM_NAMES, ranges)
        )
        return cls(CLASS_NAMES.index(name), values)  # type: ignore[arg-type]


def parse_condition(spec: str) -> Condition:
    """Parse ``"class:key=value,..."``, e.g. ``"arc-left:speed=0.2,curvature=0.3"``."""
    name, _, rest = spec.strip().partition(":")
    params: dict[str, float] = {}
    for item in filter(None, (part.strip() for part in rest.split(","))):
        key, sep, value = item.partition("=")
        if not sep:
            raise ConditionError(f"expected key=value, got {item!r}")
        try:
            params[key.strip()] = float(value)
        except ValueError as error:
            raise ConditionError(f"parameter {key!r} is not a number: {value!r}") from error
    return Condition.from_name(name.strip(), **params)


def quantize(value: float, low: float, high: float) -> int:
    if high <= low:
        return 0
    position = (value - low) / (high - low)
    return int(np.clip(math.floor(position * N_BINS), 0, N_BINS - 1))


def tokenize(cond: Condition) -> tuple[int, ...]:
    """Token rendering: the class token followed by one quantized-bin token per parameter."""
    ranges = CLASS_RANGES[cond.name]
    tokens = [cond.class_id]
    for slot, (value, (low, high)) in enumerate(zip(cond.params, ranges)):
        tokens.append(N_CLASSES + slot * N_BINS + quantize(value, low, high))
    return tuple(tokens)


def validate_tokens(tokens: np.ndarray, vocab_size: int = VOCAB_SIZE) -> np.ndarray:
    tokens = np.asarray(tokens, dtype=np.int64)
    if tokens.size and (tokens.min() < 0 or tokens.max() >= vocab_size):
        bad = tokens[(tokens < 0) | (tokens >= vocab_size)]
        raise UnknownTokenError(f"tokens {sorted(set(bad.tolist()))} outside vocabulary")
    return tokens


@dataclass(frozen=True, eq=False)
class MotionSequence:
    """An N-frame, D-dimensional trajectory."""

    frames: np.ndarray

    def __post_init__(self) -> None:
        frames = np.array(self.frames, dtype=np.float64)
        if frames.ndim != 2 or frames.shape[0] < 2:
            raise ShapeError(f"frames must have shape [N>=2, D], got {frames.shape}")
        if not np.all(np.isfinite(frames)):
            raise NonFiniteError("motion frames contain non-finite values")
        frames.flags.writeable = False
        object.__setattr__(self, "frames", frames)

    @property
    def n_frames(self) -> int:
        return self.frames.shape[0]

    @property
    def dim(self) -> int:
        return self.frames.shape[1]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, MotionSequence):
            return NotImplemented
        return np.array_equal(self.frames, other.frames)

    __hash__ = None  # type: ignore[assignment]


def _rotate(xy: np.ndarray, heading: float) -> np.ndarray:
    c, s = math.cos(heading), math.sin(heading)
    return xy @ np.array([[c, s], [-s, c]])


def trajectory(cond: Condition, n_frames: int) -> tuple[np.ndarray, np.ndarray]:
    """Closed-form positions and velocities, each of shape [n_frames, 2]."""
    speed, curvature, amplitude, heading = cond.params
    t = np.arange(n_frames, dtype=np.float64) * DT
    zeros = np.zeros_like(t)
    name = cond.name

    if name == "line" or (name in ("arc-left", "arc-right") and curvature == 0.0):
        pos = np.stack([speed * t, zeros], axis=1)
        vel = np.stack([np.full_like(t, speed), zeros], axis=1)
    elif name in ("arc-left", "arc-right"):
        turn = 1.0 if name == "arc-left" else -1.0
        theta = curvature * speed * t
        pos = np.stack(
            [np.sin(theta) / curvature, turn * (1.0 - np.cos(theta)) / curvature], axis=1
        )
        vel = speed * np.stack([np.cos(theta), turn * np.sin(theta)], axis=1)
    elif name == "zigzag":
        phase = 2.0 * np.pi * t / PERIOD
        pos = np.stack([speed * t, amplitude * (2.0 / np.pi) * np.arcsin(np.sin(phase))], axis=1)
        vel = np.stack(
            [np.full_like(t, speed), amplitude * (4.0 / PERIOD) * np.sign(np.cos(phase))],
            axis=1,
        )
    elif name == "spiral":
        theta = curvature * t
        radius = amplitude + speed * t
        pos = np.stack(
            [radius * np.cos(theta) - amplitude, radius * np.sin(theta)], axis=1
        )
        vel = np.stack(
            [
                speed * np.cos(theta) - radius * curvature * np.sin(theta),
                speed * np.sin(theta) + radius * curvature * np.cos(theta),
            ],
            axis=1,
        )
    elif name == "stop-go":
        phase = 2.0 * np.pi * t / PERIOD
        pos = np.stack([speed * (t - PERIOD / (2.0 * np.pi) * np.sin(phase)), zeros], axis=1)
        vel = np.stack([speed * (1.0 - np.cos(phase)), zeros], axis=1)
    elif name == "sine":
        pos = np.stack([speed * t, amplitude * np.sin(curvature * t)], axis=1)
        vel = np.stack(
            [np.full_like(t, speed), amplitude * curvature * np.cos(curvature * t)], axis=1
        )
    else:  # figure-eight
        omega = curvature
        pos = np.stack(
            [amplitude * np.sin(omega * t), 0.5 * amplitude * np.sin(2.0 * omega * t)], axis=1
        )
        vel = np.stack(
            [amplitude * omega * np.cos(omega * t), amplitude * omega * np.cos(2.0 * omega * t)],
            axis=1,
        )
    return _rotate(pos, heading), _rotate(vel, heading)


def generate_motion(
    cond: Condition,
    n_frames: int,
    seed: int,
    jitter: float = 0.01,
    dim: int = 2,
) -> MotionSequence:
    """Generate the trajectory of `cond` plus seeded Gaussian jitter.

    Args:
        cond: The condition to render.
        n_frames: Number of frames, at least 2.
        seed: Pair seed; the jitter stream is derived from it.
        jitter: Std of the i.i.d. jitter added to every value. 0 disables it.
        dim: 2 for positions only, 4 to append velocity channels.

    Returns:
        MotionSequence: The generated motion.
    """
    if n_frames < 2:
        raise ShapeError(f"n_frames must be at least 2, got {n_frames}")
    if dim not in (2, 4):
        raise ShapeError(f"dim must be 2 or 4, got {dim}")
    pos, vel = trajectory(cond, n_frames)
    frames = pos if dim == 2 else np.concatenate([pos, vel], axis=1)
    if jitter > 0:
        frames = frames + jitter * RngStream(seed, JITTER_STREAM).normal(frames.shape)
    return MotionSequence(frames)


def pair_seed(split: str, generator_seed: int, index: int) -> int:
    """Seed of the `index`-th pair of `split`; the split lives in the top bits."""
    check_generator_seed(generator_seed)
    return (SPLIT_CODES[split] << 60) | (generator_seed << 32) | (index & 0xFFFF_FFFF)


def check_generator_seed(seed: int) -> None:
    if not 0 <= seed < 1 << SEED_BITS:
        raise SeedError(f"seed must lie in [0, 2**{SEED_BITS}), got {seed}")


def split_of_seed(seed: int) -> str:
    code = seed >> 60
    for split, value in SPLIT_CODES.items():
        if value == code:
            return split
    raise ValueError(f"seed {seed} does not encode a split")


def sample_condition(class_id: int, seed: int) -> Condition:
    stream = RngStream(seed, PARAM_STREAM)
    ranges = CLASS_RANGES[CLASS_NAMES[class_id]]
    return Condition(class_id, tuple(float(stream.uniform(lo, hi)) for lo, hi in ranges))  # type: ignore[arg-type]


@dataclass(frozen=True)
class Pair:
    condition: Condition
    motion: MotionSequence
    seed: int
    split: str


@dataclass
class Dataset:
    """Pairs sharing frame count and dimension."""

    pairs: list[Pair]
    generator_seed: int
    n_frames: int
    dim: int
    jitter: float = 0.01
    split_tag: str | None = None
    _motions: np.ndarray | None = field(default=None, repr=False, compare=False)

    def __len__(self) -> int:
        return len(self.pairs)

    def __iter__(self) -> Iterator[Pair]:
        return iter(self.pairs)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            self.generator_seed == other.generator_seed
            and self.n_frames == other.n_frames
            and self.dim == other.dim
            and self.jitter == other.jitter
            and self.pairs == other.pairs
        )

    def split(self, tag: str) -> "Dataset":
        return Dataset(
            pairs=[p for p in self.pairs if p.split == tag],
            generator_seed=self.generator_seed,
            n_frames=self.n_frames,
            dim=self.dim,
            jitter=self.jitter,
            split_tag=tag,
        )

    def subset(self, indices: Sequence[int]) -> "Dataset":
        return Dataset(
            pairs=[self.pairs[i] for i in indices],
            generator_seed=self.generator_seed,
            n_frames=self.n_frames,
            dim=self.dim,
            jitter=self.jitter,
            split_tag=self.split_tag,
        )

    @property
    def motions(self) -> np.ndarray:
        """All frames stacked into shape [M, N, D]."""
        if self._motions is None:
            self._motions = (
                np.stack([p.motion.frames for p in self.pairs])
                if self.pairs
                else np.zeros((0, self.n_frames, self.dim))
            )
        return self._motions

    @property
    def conditions(self) -> list[Condition]:
        return [p.condition for p in self.pairs]

    @property
    def tokens(self) -> np.ndarray:
        return np.array([p.condition.token_seq for p in self.pairs], dtype=np.int64).reshape(
            len(self.pairs), TOKENS_PER_CONDITION
        )

    @property
    def class_ids(self) -> np.ndarray:
        return np.array([p.condition.class_id for p in self.pairs], dtype=np.int64)


def _make_pair(job: tuple[str, int, int, int, int, float, int]) -> Pair:
    split, class_id, index, generator_seed, n_frames, jitter, dim = job
    seed = pair_seed(split, generator_seed, index)
    cond = sample_condition(class_id, seed)
    motion = generate_motion(cond, n_frames, seed, jitter=jitter, dim=dim)
    return Pair(condition=cond, motion=motion, seed=seed, split=split)


def build_dataset(spec: DatasetSpec, seed: int, n_workers: int = 1) -> Dataset:
    """Sample a dataset with exactly the per-split, per-class counts of `spec`.

    Args:
        spec: Counts per split and class plus frame settings.
        seed: Generator seed.
        n_workers: Number of parallel workers.

    Returns:
        Dataset: Pairs ordered by split, then class, then index.

    Raises:
        EmptyInputError: If `spec` requests no pairs at all.
        SeedError: If `seed` does not fit into a pair seed.
    """
    if spec.is_empty:
        raise EmptyInputError("dataset spec requests no pairs")
    check_generator_seed(seed)

    jobs = []
    for split in SPLITS:
        counts: dict[str, int] = getattr(spec, split)
        index = 0
        for class_id, name in enumerate(CLASS_NAMES):
            for _ in range(counts.get(name, 0)):
                jobs.append((split, class_id, index, seed, spec.n_frames, spec.jitter, spec.dim))
                index += 1

    pairs = parallel_process_with_retries(_make_pair, jobs, n_workers=n_workers)
    dataset = Dataset(
        pairs=pairs,
        generator_seed=seed,
        n_frames=spec.n_frames,
        dim=spec.dim,
        jitter=spec.jitter,
    )
    sizes = {split: sum(1 for p in pairs if p.split == split) for split in SPLITS}
    logger.info(f"Generated {len(pairs)} pairs {sizes} with seed {seed}")
    return dataset
