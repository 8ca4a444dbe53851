"""Exhaustive embedding index over training pairs and anchor retrieval."""

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from loguru import logger

from reguide.artifacts.container import PayloadReader, read_container, write_container
from reguide.errors import EmptyInputError, IndexMismatchError, ShapeError
from reguide.reward.losses import cosine_matrix
from reguide.reward.model import LatentEmbedding, RewardModel, encode_condition
from reguide.synthdata.generator import Condition, Dataset, MotionSequence

MAGIC = b"RGIX"
VERSION = 1
HEADER = struct.Struct("<64sIIII")


@dataclass(eq=False)
class RetrievalIndex:
    motions: np.ndarray  # [M, N, D]
    motion_z: np.ndarray  # [M, d_z], clean-motion embeddings (t = 0)
    conditions: list[Condition]
    cond_z: np.ndarray  # [M, d_z]
    checkpoint_hash: str

    def __len__(self) -> int:
        return len(self.conditions)

    def check(self, model: RewardModel) -> None:
        if model.fingerprint != self.checkpoint_hash:
            raise IndexMismatchError(
                f"index was built with reward checkpoint {self.checkpoint_hash[:12]}, "
                f"queried with {model.fingerprint[:12]}"
            )


def build_index(model: RewardModel, dataset: Dataset, batch_size: int = 256) -> RetrievalIndex:
    """Embed every pair of `dataset` with `model` at t=0.

    Raises:
        ShapeError: If the dataset's motion shape does not match the model.
    """
    if (dataset.n_frames, dataset.dim) != (model.config.n_frames, model.config.dim):
        raise ShapeError(
            f"dataset frames {dataset.n_frames}x{dataset.dim} do not match "
            f"reward model {model.config.n_frames}x{model.config.dim}"
        )
    index = RetrievalIndex(
        motions=dataset.motions.copy(),
        motion_z=model.motion_embeddings(dataset.motions, 0, batch_size=batch_size),
        conditions=dataset.conditions,
        cond_z=(
            model.condition_embeddings(dataset.tokens)
            if len(dataset)
            else np.zeros((0, model.config.d_z))
        ),
        checkpoint_hash=model.fingerprint,
    )
    logger.info(f"Indexed {len(index)} motions")
    return index


def anchor_scores(index: RetrievalIndex, z_c: np.ndarray) -> np.ndarray:
    return cosine_matrix(index.motion_z, np.asarray(z_c).reshape(1, -1))[:, 0]


def retrieve_anchor(
    index: RetrievalIndex, c: Condition, model: RewardModel
) -> tuple[MotionSequence, LatentEmbedding]:
    """Entry whose clean-motion embedding best matches the condition; lowest ordinal wins ties.

    Raises:
        EmptyInputError: If the index holds no entries.
        IndexMismatchError: If `model` is not the checkpoint the index was built with.
    """
    if len(index) == 0:
        raise EmptyInputError("cannot retrieve from an empty index")
    index.check(model)
    scores = anchor_scores(index, encode_condition(model, c).vector)
    best = int(np.argmax(scores))
    return (
        MotionSequence(index.motions[best]),
        LatentEmbedding(vector=index.motion_z[best].copy(), modality="motion"),
    )


def _record_dtype(n_frames: int, dim: int, d_z: int) -> np.dtype:
    return np.dtype(
        [
            ("class_id", "<u4"),
            ("params", "<f8", (4,)),
            ("motion", "<f8", (n_frames, dim)),
            ("motion_z", "<f8", (d_z,)),
            ("cond_z", "<f8", (d_z,)),
        ]
    )


def save_index(index: RetrievalIndex, path: Path) -> str:
    count, n_frames, dim = index.motions.shape if len(index) else (0, 0, 0)
    d_z = index.motion_z.shape[1] if len(index) else 0
    records = np.zeros(count, dtype=_record_dtype(n_frames, dim, d_z))
    for i, cond in enumerate(index.conditions):
        records[i] = (cond.class_id, cond.params, index.motions[i], index.motion_z[i], index.cond_z[i])
    header = HEADER.pack(index.checkpoint_hash.encode("ascii"), count, n_frames, dim, d_z)
    return write_container(path, MAGIC, VERSION, header + records.tobytes())


def load_index(path: Path) -> RetrievalIndex:
    payload, _ = read_container(path, MAGIC, VERSION)
    reader = PayloadReader(payload)
    digest, count, n_frames, dim, d_z = reader.unpack(HEADER.format)
    records = reader.array(_record_dtype(n_frames, dim, d_z), count)
    reader.done()
    return RetrievalIndex(
        motions=np.array(records["motion"], dtype=np.float64).reshape(count, n_frames, dim),
        motion_z=np.array(records["motion_z"], dtype=np.float64).reshape(count, d_z),
        conditions=[
            Condition(int(r["class_id"]), tuple(float(p) for p in r["params"]))  # type: ignore[arg-type]
            for r in records
        ],
        cond_z=np.array(records["cond_z"], dtype=np.float64).reshape(count, d_z),
        checkpoint_hash=digest.decode("ascii"),
    )
