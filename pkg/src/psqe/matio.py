"""Binary dense-matrix container.

Layout: 16-byte header (4-byte magic "PSQE", uint32 version, uint32 rows,
uint32 cols, all little-endian) followed by row-major little-endian
float32 values. Matrices are widened to float64 in memory.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import DataError

MAGIC = b"PSQE"
VERSION = 1
_HEADER = struct.Struct("<4sIII")


def write_matrix(path: str | Path, matrix: np.ndarray) -> None:
    """Write a 2-D array to the binary container (values stored as float32)."""
    mat = np.asarray(matrix)
    if mat.ndim != 2:
        raise DataError(f"matrix for {path} must be 2-D, got shape {mat.shape}")
    rows, cols = mat.shape
    data = np.ascontiguousarray(mat, dtype="<f4")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, rows, cols))
        fh.write(data.tobytes())


def read_matrix(path: str | Path) -> np.ndarray:
    """Read a matrix written by write_matrix, returned as float64."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"matrix file not found: {path}")
    raw = path.read_bytes()
    if len(raw) < _HEADER.size:
        raise DataError(f"truncated matrix file (no header): {path}")
    magic, version, rows, cols = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise DataError(f"bad magic {magic!r} in {path}")
    if version != VERSION:
        raise DataError(f"unsupported container version {version} in {path}")
    expected = _HEADER.size + 4 * rows * cols
    if len(raw) != expected:
        raise DataError(
            f"matrix file {path} has {len(raw)} bytes, expected {expected} "
            f"for {rows}x{cols}"
        )
    flat = np.frombuffer(raw, dtype="<f4", offset=_HEADER.size)
    return flat.reshape(rows, cols).astype(np.float64)
