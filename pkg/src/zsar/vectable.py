"""Binary embedding-table file format.

Layout (all integers little-endian):

    header:  magic "EMBT" | uint32 version | uint32 dim | uint64 count
    record:  uint64 key-hash | uint32 key-length | key bytes | dim float32

The key hash is the first 8 bytes of SHA-256 of the key and is verified on
read, so silent corruption of a record is detected. Records are written in
sorted key order, which makes the file a deterministic function of its
contents.
"""

from __future__ import annotations

import hashlib
import struct
from pathlib import Path

import numpy as np

from .errors import BackendError

MAGIC = b"EMBT"
VERSION = 1

_HEADER = struct.Struct("<4sIIQ")
_RECORD_HEAD = struct.Struct("<QI")


def key_hash(key: bytes) -> int:
    return int.from_bytes(hashlib.sha256(key).digest()[:8], "little")


def write_table(path: str | Path, table: dict[bytes, np.ndarray], dim: int) -> None:
    """Write a key -> vector table; every vector must be 1-D float32 of length dim."""
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, dim, len(table)))
        for key in sorted(table):
            vec = np.ascontiguousarray(table[key], dtype="<f4")
            if vec.shape != (dim,):
                raise ValueError(f"vector for key {key!r} has shape {vec.shape}, want ({dim},)")
            fh.write(_RECORD_HEAD.pack(key_hash(key), len(key)))
            fh.write(key)
            fh.write(vec.tobytes())


def read_table(path: str | Path) -> tuple[int, dict[bytes, np.ndarray]]:
    """Read a table file back into (dim, {key: float32 vector})."""
    path = Path(path)
    data = path.read_bytes()
    if len(data) < _HEADER.size:
        raise BackendError(f"{path}: truncated embedding table header")
    magic, version, dim, count = _HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise BackendError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise BackendError(f"{path}: unsupported version {version}")
    table: dict[bytes, np.ndarray] = {}
    offset = _HEADER.size
    vec_bytes = 4 * dim
    for _ in range(count):
        if offset + _RECORD_HEAD.size > len(data):
            raise BackendError(f"{path}: truncated record header")
        stored_hash, key_len = _RECORD_HEAD.unpack_from(data, offset)
        offset += _RECORD_HEAD.size
        if offset + key_len + vec_bytes > len(data):
            raise BackendError(f"{path}: truncated record body")
        key = data[offset : offset + key_len]
        offset += key_len
        if key_hash(key) != stored_hash:
            raise BackendError(f"{path}: key hash mismatch for {key!r}")
        vec = np.frombuffer(data, dtype="<f4", count=dim, offset=offset).copy()
        offset += vec_bytes
        table[key] = vec
    return dim, table
