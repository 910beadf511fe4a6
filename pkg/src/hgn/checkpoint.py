"""Binary tensor container: magic "HGN1", then count, then named f64 tensors.

Layout, all integers little-endian u32:
  magic "HGN1" | count | per tensor: name_len, utf-8 name, rank, dims...,
  float64 little-endian row-major values.
Bit-exact round trip is part of the contract; loading preserves file order.
"""

from __future__ import annotations

import struct
from collections import OrderedDict
from typing import Mapping

import numpy as np

from .errors import DataError

MAGIC = b"HGN1"


def save_tensors(path: str, tensors: Mapping[str, np.ndarray]) -> None:
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(tensors)))
        for name, values in tensors.items():
            arr = np.asarray(values, dtype="<f8")
            encoded = name.encode("utf-8")
            fh.write(struct.pack("<I", len(encoded)))
            fh.write(encoded)
            fh.write(struct.pack("<I", arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            fh.write(arr.tobytes(order="C"))


def load_tensors(path: str) -> OrderedDict[str, np.ndarray]:
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != MAGIC:
        raise DataError(f"{path}: bad magic {blob[:4]!r}, expected {MAGIC!r}")
    off = 4

    def take(n: int) -> bytes:
        nonlocal off
        if off + n > len(blob):
            raise DataError(f"{path}: truncated container at byte {off}")
        piece = blob[off:off + n]
        off += n
        return piece

    (count,) = struct.unpack("<I", take(4))
    out: OrderedDict[str, np.ndarray] = OrderedDict()
    for _ in range(count):
        (name_len,) = struct.unpack("<I", take(4))
        name = take(name_len).decode("utf-8")
        (rank,) = struct.unpack("<I", take(4))
        dims = struct.unpack(f"<{rank}I", take(4 * rank)) if rank else ()
        n_vals = int(np.prod(dims)) if rank else 1
        values = np.frombuffer(take(8 * n_vals), dtype="<f8").reshape(dims)
        if name in out:
            raise DataError(f"{path}: duplicate tensor name {name!r}")
        out[name] = values.astype(np.float64).copy()
    if off != len(blob):
        raise DataError(f"{path}: {len(blob) - off} trailing bytes after tensor data")
    return out
