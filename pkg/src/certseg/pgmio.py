"""Binary PGM (P5) reading and writing, 8- and 16-bit.

The format is bit-exact and trivially parseable, which keeps run outputs
reproducible byte for byte.  Color (P6) and ASCII variants are rejected.
"""
from __future__ import annotations

import numpy as np

from .errors import InputError


def read_pgm(path) -> tuple[np.ndarray, int]:
    """Read a binary PGM; returns (values in [0,1], maxval)."""
    with open(path, "rb") as fh:
        data = fh.read()

    tokens = []
    pos = 0
    while len(tokens) < 4:
        if pos >= len(data):
            raise InputError("truncated PGM header")
        ch = data[pos : pos + 1]
        if ch.isspace():
            pos += 1
        elif ch == b"#":
            while pos < len(data) and data[pos : pos + 1] != b"\n":
                pos += 1
        else:
            start = pos
            while pos < len(data) and not data[pos : pos + 1].isspace():
                pos += 1
            tokens.append(data[start:pos])
    pos += 1  # single whitespace after maxval

    magic, width, height, maxval = tokens[0], *(int(t) for t in tokens[1:])
    if magic == b"P6":
        raise InputError("color images are not supported; convert to grayscale PGM")
    if magic != b"P5":
        raise InputError(f"not a binary PGM (magic {magic!r})")
    if not (0 < maxval < 65536):
        raise InputError(f"invalid maxval {maxval}")
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
    count = width * height
    raw = np.frombuffer(data, dtype=dtype, count=count, offset=pos)
    if raw.size != count:
        raise InputError("truncated PGM pixel data")
    values = raw.reshape(height, width).astype(float) / maxval
    return values, maxval


def write_pgm(path, values, maxval: int = 255) -> None:
    """Write values in [0,1] as a binary PGM, rounding to maxval levels."""
    values = np.asarray(values, dtype=float)
    if values.ndim != 2:
        raise InputError("PGM output requires a 2-D array")
    if not (0 < maxval < 65536):
        raise InputError(f"invalid maxval {maxval}")
    quant = np.round(np.clip(values, 0.0, 1.0) * maxval)
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
    header = f"P5\n{values.shape[1]} {values.shape[0]}\n{maxval}\n".encode()
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(quant.astype(dtype).tobytes())
