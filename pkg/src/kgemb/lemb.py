"""LEMB binary matrix files.

Layout (little-endian, bit-exact):

    magic   4 bytes   b"LEMB"
    version u32       1
    rows    u64
    cols    u64
    data    rows*cols IEEE-754 f32, row-major

A companion labels file is plain UTF-8 with one label per line; line i
corresponds to row i of the matrix.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import FormatError

MAGIC = b"LEMB"
VERSION = 1
_HEADER = struct.Struct("<4sIQQ")


def write_matrix(path, matrix) -> None:
    """Write a 2-D float matrix to `path` in LEMB format."""
    m = np.ascontiguousarray(matrix, dtype=np.float32)
    if m.ndim != 2:
        raise FormatError(f"expected a 2-D matrix, got shape {m.shape}")
    if not np.isfinite(m).all():
        raise FormatError("refusing to write non-finite values")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, m.shape[0], m.shape[1]))
        fh.write(m.tobytes())


def matrix_bytes(matrix) -> bytes:
    """Serialize a matrix to LEMB bytes without touching the filesystem."""
    m = np.ascontiguousarray(matrix, dtype=np.float32)
    return _HEADER.pack(MAGIC, VERSION, m.shape[0], m.shape[1]) + m.tobytes()


def read_matrix(path) -> np.ndarray:
    """Read a LEMB file, returning a float32 array of shape (rows, cols)."""
    with open(path, "rb") as fh:
        mat = read_matrix_from(fh, name=str(path))
    return mat


def read_matrix_from(fh, name="<stream>") -> np.ndarray:
    """Read one LEMB blob from an open binary stream.

    The stream is left positioned just past the payload, so several blobs
    may be concatenated in one file.
    """
    header = fh.read(_HEADER.size)
    if len(header) != _HEADER.size:
        raise FormatError(f"{name}: truncated header")
    magic, version, rows, cols = _HEADER.unpack(header)
    if magic != MAGIC:
        raise FormatError(f"{name}: bad magic {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        raise FormatError(f"{name}: unsupported version {version}")
    payload = fh.read(rows * cols * 4)
    if len(payload) != rows * cols * 4:
        raise FormatError(f"{name}: truncated payload, expected {rows}x{cols} f32")
    mat = np.frombuffer(payload, dtype="<f4").reshape(rows, cols)
    if not np.isfinite(mat).all():
        raise FormatError(f"{name}: matrix contains non-finite values")
    return mat.copy()


def read_labels(path) -> list[str]:
    """Read the companion labels file: one label per line, UTF-8."""
    text = Path(path).read_text(encoding="utf-8")
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    return lines


def write_labels(path, labels) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for label in labels:
            fh.write(label)
            fh.write("\n")
