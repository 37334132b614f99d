"""Flat little-endian binary checkpoints.

Layout: magic ``b"MLNCCKPT"``, u32 version, u32 count, then per entry
u32 id length, utf-8 id, u32 rows, u32 cols, rows*cols float64 (row-major).
"""
from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

MAGIC = b"MLNCCKPT"
VERSION = 1


def save_arrays(arrays: dict[str, np.ndarray], path) -> None:
    chunks = [MAGIC, struct.pack("<II", VERSION, len(arrays))]
    for name, arr in arrays.items():
        arr = np.asarray(arr, dtype="<f8")
        if arr.ndim == 1:
            arr = arr.reshape(1, -1)
        key = name.encode("utf-8")
        chunks.append(struct.pack("<I", len(key)) + key)
        chunks.append(struct.pack("<II", *arr.shape))
        chunks.append(np.ascontiguousarray(arr).tobytes())
    Path(path).write_bytes(b"".join(chunks))


def load_arrays(path) -> dict[str, np.ndarray]:
    buf = Path(path).read_bytes()
    if buf[:8] != MAGIC:
        raise ValueError(f"{path}: not a checkpoint (bad magic)")
    version, count = struct.unpack_from("<II", buf, 8)
    if version != VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {version}")
    pos = 16
    out = {}
    for _ in range(count):
        (klen,) = struct.unpack_from("<I", buf, pos)
        pos += 4
        name = buf[pos:pos + klen].decode("utf-8")
        pos += klen
        rows, cols = struct.unpack_from("<II", buf, pos)
        pos += 8
        nbytes = rows * cols * 8
        out[name] = np.frombuffer(buf[pos:pos + nbytes], dtype="<f8").reshape(rows, cols).copy()
        pos += nbytes
    if pos != len(buf):
        raise ValueError(f"{path}: trailing bytes after {count} entries")
    return out
