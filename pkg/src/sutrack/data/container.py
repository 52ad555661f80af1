"""Sequence directories: ``meta.json`` plus raw per-frame image files.

Each image file is ``b"SUTF"``, then u32 H, u32 W, u32 C, then H*W*C
little-endian float32 values in row-major order.  Frames are named
``f00000.rgb`` / ``f00000.aux``; tasks without an auxiliary image have no
``.aux`` files.
"""
from __future__ import annotations

import json
import os
import struct
from pathlib import Path

import numpy as np

from ..embedding import ModalFrame, Task
from .synthetic import Descriptor, SyntheticSequence

MAGIC = b"SUTF"
HEADER = struct.Struct("<4sIII")


class ContainerError(ValueError):
    pass


def write_image(path: str | os.PathLike, img: np.ndarray) -> None:
    h, w, c = img.shape
    with open(path, "wb") as fh:
        fh.write(HEADER.pack(MAGIC, h, w, c))
        fh.write(np.ascontiguousarray(img, dtype="<f4").tobytes())


def read_image(path: str | os.PathLike) -> np.ndarray:
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < HEADER.size:
        raise ContainerError(
            f"{path}: expected at least {HEADER.size} header bytes, got {len(raw)} (offset 0)"
        )
    magic, h, w, c = HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise ContainerError(f"{path}: bad magic {magic!r} at offset 0")
    expected = HEADER.size + 4 * h * w * c
    if len(raw) != expected:
        raise ContainerError(
            f"{path}: expected {expected} bytes for a {h}x{w}x{c} frame, got {len(raw)} "
            f"(data starts at offset {HEADER.size})"
        )
    values = np.frombuffer(raw, dtype="<f4", offset=HEADER.size)
    return values.reshape(h, w, c).astype(np.float64)


def write_sequence(path: str | os.PathLike, seq: SyntheticSequence) -> None:
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    frames = seq.frames
    first = frames[0]
    meta = {
        "task": seq.task.name,
        "length": len(seq),
        "H": int(first.rgb.shape[0]),
        "W": int(first.rgb.shape[1]),
        "language": seq.language,
        "boxes": [[int(v) for v in b] for b in seq.boxes],
        "descriptor": seq.descriptor.to_dict(),
        "seed": int(seq.seed),
    }
    for k in range(len(seq)):
        frame = frames[k]
        write_image(root / f"f{k:05d}.rgb", frame.rgb)
        if frame.aux is not None:
            write_image(root / f"f{k:05d}.aux", frame.aux)
    with open(root / "meta.json", "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=1)


def read_sequence(path: str | os.PathLike) -> SyntheticSequence:
    root = Path(path)
    with open(root / "meta.json", encoding="utf-8") as fh:
        meta = json.load(fh)
    task = Task[meta["task"]]
    frames = []
    for k in range(int(meta["length"])):
        rgb = read_image(root / f"f{k:05d}.rgb")
        if rgb.shape[:2] != (meta["H"], meta["W"]):
            raise ContainerError(
                f"{root / f'f{k:05d}.rgb'}: frame is {rgb.shape[:2]}, meta says "
                f"{(meta['H'], meta['W'])}"
            )
        aux_path = root / f"f{k:05d}.aux"
        aux = read_image(aux_path) if aux_path.exists() else None
        frames.append(ModalFrame(rgb, aux, meta.get("language"), task))
    desc = Descriptor.from_dict(meta["descriptor"]) if "descriptor" in meta else Descriptor(
        task=task, height=meta["H"], width=meta["W"]
    )
    boxes = np.array(meta["boxes"], dtype=np.int64).reshape(-1, 4)
    return SyntheticSequence(
        desc, int(meta.get("seed", 0)), boxes, background=np.zeros(0), stored_frames=frames
    )


def write_dataset(path: str | os.PathLike, pool: list[SyntheticSequence]) -> list[str]:
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    names = []
    for i, seq in enumerate(pool):
        name = f"seq_{i:05d}"
        write_sequence(root / name, seq)
        names.append(name)
    return names


def list_sequences(path: str | os.PathLike) -> list[str]:
    root = Path(path)
    if not root.is_dir():
        raise ContainerError(f"{root}: not a directory")
    return sorted(p.name for p in root.iterdir() if (p / "meta.json").is_file())


def read_dataset(path: str | os.PathLike) -> dict[str, SyntheticSequence]:
    return {name: read_sequence(Path(path) / name) for name in list_sequences(path)}
