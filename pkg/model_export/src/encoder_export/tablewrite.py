"""Write-only embedding-table serializer.

Independent implementation of the inference package's binary table format:
"EMBT" magic, version 1, dim, count, then per record a 64-bit SHA-256
key-hash prefix, key length, key bytes, and dim little-endian float32.
Records are sorted by key so identical tables are byte-identical files.
"""

from __future__ import annotations

import hashlib
import struct
from pathlib import Path

import numpy as np

HEADER = struct.Struct("<4sIIQ")
RECORD = struct.Struct("<QI")


def write_table(path: str | Path, table: dict[bytes, np.ndarray], dim: int) -> None:
    with open(path, "wb") as fh:
        fh.write(HEADER.pack(b"EMBT", 1, dim, len(table)))
        for key in sorted(table):
            vec = np.ascontiguousarray(table[key], dtype="<f4")
            if vec.shape != (dim,):
                raise ValueError(f"vector for {key!r} has shape {vec.shape}")
            prefix = int.from_bytes(hashlib.sha256(key).digest()[:8], "little")
            fh.write(RECORD.pack(prefix, len(key)))
            fh.write(key)
            fh.write(vec.tobytes())


def frame_hash_key(frame: np.ndarray) -> bytes:
    """Content-hash key for a preprocessed float32 HWC frame."""
    digest = hashlib.sha256(np.ascontiguousarray(frame, dtype="<f4").tobytes())
    return b"sha256:" + digest.hexdigest().encode("ascii")
