"""Flat binary checkpoint format for named parameter arrays.

Layout: the magic bytes ``ADIFF1``, one byte giving the float width (4 or
8), then one entry per parameter until end of file. Each entry is a u32
name length, the name in utf-8, a u32 rank, ``rank`` u32 dims, and the
values as little-endian floats. Round trips are bit-exact.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

__all__ = ["save_arrays", "load_arrays", "CheckpointError"]

MAGIC = b"ADIFF1"


class CheckpointError(ValueError):
    """Raised on malformed or truncated checkpoint files."""


def save_arrays(arrays: dict[str, np.ndarray], path) -> None:
    arrays = {k: np.asarray(v) for k, v in arrays.items()}
    widths = {a.dtype.itemsize for a in arrays.values()}
    for arr in arrays.values():
        if arr.dtype not in (np.float32, np.float64):
            raise CheckpointError(f"only float32/float64 arrays are supported, got {arr.dtype}")
    if len(widths) > 1:
        raise CheckpointError("all arrays in one checkpoint must share a precision")
    width = widths.pop() if widths else 4
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<B", width))
        for name, arr in arrays.items():
            encoded = name.encode("utf-8")
            f.write(struct.pack("<I", len(encoded)))
            f.write(encoded)
            f.write(struct.pack("<I", arr.ndim))
            for dim in arr.shape:
                f.write(struct.pack("<I", dim))
            f.write(arr.astype(f"<f{width}", copy=False).tobytes())


def load_arrays(path) -> dict[str, np.ndarray]:
    blob = Path(path).read_bytes()
    if len(blob) < len(MAGIC) + 1 or blob[: len(MAGIC)] != MAGIC:
        raise CheckpointError(f"{path}: not a parameter checkpoint (bad magic)")
    width = blob[len(MAGIC)]
    if width not in (4, 8):
        raise CheckpointError(f"{path}: unknown precision flag {width}")
    dtype = np.dtype(f"<f{width}")
    out: dict[str, np.ndarray] = {}
    pos = len(MAGIC) + 1

    def take(n: int) -> bytes:
        nonlocal pos
        if pos + n > len(blob):
            raise CheckpointError(f"{path}: truncated checkpoint")
        chunk = blob[pos : pos + n]
        pos += n
        return chunk

    while pos < len(blob):
        (name_len,) = struct.unpack("<I", take(4))
        name = take(name_len).decode("utf-8")
        (rank,) = struct.unpack("<I", take(4))
        dims = struct.unpack(f"<{rank}I", take(4 * rank)) if rank else ()
        count = int(np.prod(dims)) if dims else 1
        arr = np.frombuffer(take(count * width), dtype=dtype).reshape(dims)
        out[name] = arr.copy()  # writable, owns its memory
    return out
