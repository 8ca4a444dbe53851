"""RGDS dataset files.

Payload: header ``D u32, N u32, count u32, generator seed u64, jitter f8``,
followed by one fixed-size record per pair.
"""

import struct
from pathlib import Path

import numpy as np

from reguide.artifacts.container import (
    PayloadReader,
    read_container,
    write_container,
)
from reguide.synthdata.generator import (
    SPLIT_CODES,
    Condition,
    Dataset,
    MotionSequence,
    Pair,
)

MAGIC = b"RGDS"
VERSION = 1
HEADER = struct.Struct("<IIIQd")
SPLIT_NAMES = {code: name for name, code in SPLIT_CODES.items()}


def record_dtype(n_frames: int, dim: int) -> np.dtype:
    return np.dtype(
        [
            ("class_id", "<u4"),
            ("split", "<u4"),
            ("params", "<f8", (4,)),
            ("seed", "<u8"),
            ("frames", "<f8", (n_frames, dim)),
        ]
    )


def encode_dataset(dataset: Dataset) -> bytes:
    records = np.zeros(len(dataset), dtype=record_dtype(dataset.n_frames, dataset.dim))
    for i, pair in enumerate(dataset.pairs):
        records[i] = (
            pair.condition.class_id,
            SPLIT_CODES[pair.split],
            pair.condition.params,
            pair.seed,
            pair.motion.frames,
        )
    header = HEADER.pack(
        dataset.dim, dataset.n_frames, len(dataset), dataset.generator_seed, dataset.jitter
    )
    return header + records.tobytes()


def decode_dataset(payload: bytes) -> Dataset:
    reader = PayloadReader(payload)
    dim, n_frames, count, generator_seed, jitter = reader.unpack(HEADER.format)
    records = reader.array(record_dtype(n_frames, dim), count)
    reader.done()
    pairs = [
        Pair(
            condition=Condition(int(r["class_id"]), tuple(float(p) for p in r["params"])),  # type: ignore[arg-type]
            motion=MotionSequence(np.array(r["frames"], dtype=np.float64)),
            seed=int(r["seed"]),
            split=SPLIT_NAMES[int(r["split"])],
        )
        for r in records
    ]
    return Dataset(
        pairs=pairs,
        generator_seed=int(generator_seed),
        n_frames=int(n_frames),
        dim=int(dim),
        jitter=float(jitter),
    )


def save_dataset(dataset: Dataset, path: Path) -> str:
    """Write `dataset` to `path`; returns the file's SHA-256."""
    return write_container(path, MAGIC, VERSION, encode_dataset(dataset))


def load_dataset(path: Path) -> Dataset:
    """Read a dataset written by `save_dataset`.

    Raises:
        TruncatedFileError: Empty, short or cut-off payload.
        ChecksumError: Contents do not match the stored CRC32.
        BadMagicError: The file is not a dataset.
        VersionMismatchError: Unsupported format version.
    """
    payload, _ = read_container(path, MAGIC, VERSION)
    return decode_dataset(payload)
