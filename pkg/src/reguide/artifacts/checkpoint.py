"""RGCK checkpoints: component tag, JSON hyper-parameter block and flat float64 weights."""

import hashlib
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from reguide.artifacts.container import (
    PayloadReader,
    pack_container,
    pack_text,
    unpack_container,
)
from reguide.errors import ComponentMismatchError, ShapeError

MAGIC = b"RGCK"
VERSION = 1
COMPONENTS = ("denoiser", "reward")


@dataclass
class Checkpoint:
    component: str
    config: dict[str, Any]
    params: dict[str, np.ndarray]
    extra: dict[str, Any] = field(default_factory=dict)
    sha256: str | None = None

    @property
    def n_params(self) -> int:
        return int(sum(v.size for v in self.params.values()))


def encode_checkpoint(checkpoint: Checkpoint) -> bytes:
    """Serialise a checkpoint to container bytes. Identical inputs give identical bytes."""
    if checkpoint.component not in COMPONENTS:
        raise ComponentMismatchError(f"unknown component tag {checkpoint.component!r}")
    names = list(checkpoint.params)
    header = {
        "config": checkpoint.config,
        "extra": checkpoint.extra,
        "layout": [[name, list(checkpoint.params[name].shape)] for name in names],
        "n_params": checkpoint.n_params,
    }
    flat = (
        np.concatenate([np.ravel(checkpoint.params[n]) for n in names])
        if names
        else np.zeros(0)
    )
    payload = (
        pack_text(checkpoint.component)
        + pack_text(json.dumps(header, sort_keys=True))
        + struct.pack("<Q", flat.size)
        + flat.astype("<f8").tobytes()
    )
    return pack_container(MAGIC, VERSION, payload)


def decode_checkpoint(blob: bytes, component: str | None = None) -> Checkpoint:
    reader = PayloadReader(unpack_container(blob, MAGIC, VERSION))
    tag = reader.text()
    if component is not None and tag != component:
        raise ComponentMismatchError(
            f"checkpoint holds a {tag!r} component, expected {component!r}"
        )
    header = json.loads(reader.text())
    (count,) = reader.unpack("<Q")
    flat = reader.array(np.dtype("<f8"), count).astype(np.float64)
    reader.done()

    params: dict[str, np.ndarray] = {}
    offset = 0
    for name, shape in header["layout"]:
        size = int(np.prod(shape, dtype=np.int64))
        params[name] = flat[offset : offset + size].reshape(shape).copy()
        offset += size
    if offset != count:
        raise ShapeError(f"weight layout covers {offset} values, file holds {count}")
    return Checkpoint(
        component=tag,
        config=header["config"],
        params=params,
        extra=header.get("extra", {}),
        sha256=hashlib.sha256(blob).hexdigest(),
    )


def checkpoint_hash(checkpoint: Checkpoint) -> str:
    return hashlib.sha256(encode_checkpoint(checkpoint)).hexdigest()


def save_checkpoint(path: Path, checkpoint: Checkpoint) -> str:
    """Write `checkpoint` to `path` and return its hash."""
    blob = encode_checkpoint(checkpoint)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(blob)
    checkpoint.sha256 = hashlib.sha256(blob).hexdigest()
    return checkpoint.sha256


def load_checkpoint(path: Path, component: str | None = None) -> Checkpoint:
    """Load a checkpoint, checking the component tag when `component` is given."""
    return decode_checkpoint(path.read_bytes(), component)
