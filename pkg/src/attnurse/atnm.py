"""Binary attention-stack files (ATNM v1).

Layout: magic ``b"ATNM"``, then little-endian u32 version, H, W, N, then
``H*W*N`` little-endian float64 values in row-major (i, j, n) order.
"""
from __future__ import annotations

import os
import struct

import numpy as np

from .attention import GridDims
from .errors import FormatError

MAGIC = b"ATNM"
VERSION = 1
_HEADER = struct.Struct("<4sIIII")


def encode(stack) -> bytes:
    stack = np.asarray(stack)
    if stack.ndim != 3:
        raise FormatError(f"expected an (H, W, N) stack, got shape {stack.shape}")
    h, w, n = stack.shape
    body = np.ascontiguousarray(stack, dtype="<f8").tobytes(order="C")
    return _HEADER.pack(MAGIC, VERSION, h, w, n) + body


def decode(data: bytes) -> np.ndarray:
    if len(data) < _HEADER.size:
        raise FormatError("truncated ATNM header")
    magic, version, h, w, n = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}")
    if version != VERSION:
        raise FormatError(f"unsupported ATNM version {version}")
    expected = _HEADER.size + 8 * h * w * n
    if len(data) != expected:
        raise FormatError(f"ATNM payload is {len(data)} bytes, expected {expected}")
    body = np.frombuffer(data, dtype="<f8", offset=_HEADER.size)
    return body.reshape(h, w, n).astype(np.float64)


def read_dims(data: bytes) -> GridDims:
    _, _, h, w, n = _HEADER.unpack_from(data)
    return GridDims(h, w, n)


def save(path: str | os.PathLike, stack) -> None:
    with open(path, "wb") as fh:
        fh.write(encode(stack))


def load(path: str | os.PathLike) -> np.ndarray:
    with open(path, "rb") as fh:
        return decode(fh.read())
