"""Versioned binary serialization of named float64 tensors.

Layout (all integers little-endian):

    magic   4 bytes  b"BEVT"
    version u32      currently 1
    count   u32      number of tensors
    then per tensor, in sorted name order:
        name_len u32, name utf-8 bytes
        ndim     u32, dims u64 each
        data     raw '<f8' values, C order

Sorted names make byte-identical checkpoints from identical parameter
values, regardless of dict insertion order.
"""
from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

MAGIC = b"BEVT"
VERSION = 1


class CheckpointError(Exception):
    pass


def save_checkpoint(path, tensors: dict[str, np.ndarray]) -> None:
    names = sorted(tensors)
    chunks = [MAGIC, struct.pack("<II", VERSION, len(names))]
    for name in names:
        # asarray, not ascontiguousarray: the latter promotes 0-d to 1-d.
        array = np.asarray(tensors[name], dtype=np.float64)
        encoded = name.encode("utf-8")
        chunks.append(struct.pack("<I", len(encoded)))
        chunks.append(encoded)
        chunks.append(struct.pack("<I", array.ndim))
        chunks.append(struct.pack(f"<{array.ndim}Q", *array.shape))
        chunks.append(array.astype("<f8").tobytes(order="C"))
    Path(path).write_bytes(b"".join(chunks))


def load_checkpoint(path) -> dict[str, np.ndarray]:
    blob = Path(path).read_bytes()
    view = memoryview(blob)

    def need(offset: int, n_bytes: int) -> None:
        if offset + n_bytes > len(blob):
            raise CheckpointError(f"{path}: truncated checkpoint")

    need(0, 12)
    if bytes(view[:4]) != MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint file (bad magic)")
    version, count = struct.unpack_from("<II", view, 4)
    if version != VERSION:
        raise CheckpointError(f"{path}: unsupported checkpoint version {version}")
    offset = 12
    tensors: dict[str, np.ndarray] = {}
    for _ in range(count):
        need(offset, 4)
        (name_len,) = struct.unpack_from("<I", view, offset)
        offset += 4
        need(offset, name_len)
        name = bytes(view[offset : offset + name_len]).decode("utf-8")
        offset += name_len
        need(offset, 4)
        (ndim,) = struct.unpack_from("<I", view, offset)
        offset += 4
        need(offset, 8 * ndim)
        dims = struct.unpack_from(f"<{ndim}Q", view, offset)
        offset += 8 * ndim
        size = int(np.prod(dims, dtype=np.int64)) if ndim else 1
        need(offset, 8 * size)
        data = np.frombuffer(view, dtype="<f8", count=size, offset=offset).astype(np.float64)
        offset += 8 * size
        tensors[name] = data.reshape(dims)
    if offset != len(blob):
        raise CheckpointError(f"{path}: {len(blob) - offset} trailing bytes")
    return tensors
