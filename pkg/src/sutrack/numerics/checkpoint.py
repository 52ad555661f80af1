"""Binary parameter checkpoints.

Layout (little-endian)::

    b"SUTK"  u32 version  u32 count
    repeated count times:
        u16 name_len  name (UTF-8)  u8 rank  u32 dims[rank]  f64 values (row-major)
"""
from __future__ import annotations

import os
import struct

import numpy as np

MAGIC = b"SUTK"
VERSION = 1


class CheckpointError(ValueError):
    pass


def save_checkpoint(path: str | os.PathLike, params: dict[str, np.ndarray]) -> None:
    chunks = [MAGIC, struct.pack("<II", VERSION, len(params))]
    for name, value in params.items():
        raw = name.encode("utf-8")
        if len(raw) > 0xFFFF:
            raise CheckpointError(f"parameter name too long: {name[:40]}...")
        arr = np.asarray(value, dtype="<f8")  # keeps rank 0, unlike ascontiguousarray
        chunks.append(struct.pack("<H", len(raw)) + raw)
        chunks.append(struct.pack("<B", arr.ndim) + struct.pack(f"<{arr.ndim}I", *arr.shape))
        chunks.append(arr.tobytes())
    with open(path, "wb") as fh:
        fh.write(b"".join(chunks))


def load_checkpoint(path: str | os.PathLike) -> dict[str, np.ndarray]:
    with open(path, "rb") as fh:
        buf = fh.read()
    pos = 0

    def read(n: int, what: str) -> bytes:
        nonlocal pos
        if pos + n > len(buf):
            raise CheckpointError(f"{path}: truncated while reading {what} at offset {pos}")
        out = buf[pos : pos + n]
        pos += n
        return out

    if read(4, "magic") != MAGIC:
        raise CheckpointError(f"{path}: bad magic at offset 0")
    version, count = struct.unpack("<II", read(8, "header"))
    if version != VERSION:
        raise CheckpointError(f"{path}: unsupported version {version}")
    params: dict[str, np.ndarray] = {}
    for _ in range(count):
        (name_len,) = struct.unpack("<H", read(2, "name length"))
        name = read(name_len, "name").decode("utf-8")
        (rank,) = struct.unpack("<B", read(1, "rank"))
        dims = struct.unpack(f"<{rank}I", read(4 * rank, "dims"))
        n = int(np.prod(dims)) if rank else 1
        values = np.frombuffer(read(8 * n, f"values of {name}"), dtype="<f8")
        params[name] = values.reshape(dims).astype(np.float64)
    if pos != len(buf):
        raise CheckpointError(f"{path}: {len(buf) - pos} trailing bytes at offset {pos}")
    return params
