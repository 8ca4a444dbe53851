"""Checksummed little-endian binary container shared by all reguide artifacts.

Layout: 4-byte magic, u32 format version, payload, u32 CRC32 of everything
before the checksum.
"""

import hashlib
import struct
import zlib
from pathlib import Path

import numpy as np

from reguide.errors import (
    BadMagicError,
    ChecksumError,
    TruncatedFileError,
    VersionMismatchError,
)

HEADER = struct.Struct("<4sI")
TRAILER = struct.Struct("<I")


def pack_container(magic: bytes, version: int, payload: bytes) -> bytes:
    body = HEADER.pack(magic, version) + payload
    return body + TRAILER.pack(zlib.crc32(body))


def unpack_container(blob: bytes, magic: bytes, version: int) -> bytes:
    """Validate a container and return its payload.

    Raises:
        TruncatedFileError: Fewer bytes than header and trailer need.
        ChecksumError: Stored CRC32 does not match the contents.
        BadMagicError: The file holds another artifact type.
        VersionMismatchError: Unsupported format version.
    """
    if len(blob) < HEADER.size + TRAILER.size:
        raise TruncatedFileError(
            f"{len(blob)} bytes is too short for a {magic.decode()} container"
        )
    body, (stored,) = blob[: -TRAILER.size], TRAILER.unpack(blob[-TRAILER.size :])
    if zlib.crc32(body) != stored:
        raise ChecksumError(f"CRC32 mismatch in {magic.decode()} container")
    found_magic, found_version = HEADER.unpack(body[: HEADER.size])
    if found_magic != magic:
        raise BadMagicError(f"expected magic {magic!r}, found {found_magic!r}")
    if found_version != version:
        raise VersionMismatchError(
            f"{magic.decode()} version {found_version} is not supported (expected {version})"
        )
    return body[HEADER.size :]


def write_container(path: Path, magic: bytes, version: int, payload: bytes) -> str:
    """Write a container to `path` and return the SHA-256 of the written bytes."""
    blob = pack_container(magic, version, payload)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(blob)
    return hashlib.sha256(blob).hexdigest()


def read_container(path: Path, magic: bytes, version: int) -> tuple[bytes, str]:
    """Read a container, returning its payload and the SHA-256 of the file."""
    blob = path.read_bytes()
    return unpack_container(blob, magic, version), hashlib.sha256(blob).hexdigest()


class PayloadReader:
    """Sequential reader over a payload; running past the end is a truncation."""

    def __init__(self, payload: bytes) -> None:
        self.payload = payload
        self.offset = 0

    def take(self, n: int) -> bytes:
        if self.offset + n > len(self.payload):
            raise TruncatedFileError(
                f"payload ends at byte {len(self.payload)}, needed {self.offset + n}"
            )
        chunk = self.payload[self.offset : self.offset + n]
        self.offset += n
        return chunk

    def unpack(self, fmt: str) -> tuple:
        layout = struct.Struct(fmt)
        return layout.unpack(self.take(layout.size))

    def array(self, dtype: np.dtype, count: int) -> np.ndarray:
        dtype = np.dtype(dtype)
        return np.frombuffer(self.take(dtype.itemsize * count), dtype=dtype, count=count)

    def text(self) -> str:
        (length,) = self.unpack("<I")
        return self.take(length).decode("utf-8")

    def done(self) -> None:
        if self.offset != len(self.payload):
            raise TruncatedFileError(
                f"{len(self.payload) - self.offset} unexpected trailing payload bytes"
            )


def pack_text(text: str) -> bytes:
    raw = text.encode("utf-8")
    return struct.pack("<I", len(raw)) + raw
