"""Portable Float Map reader/writer (grayscale "Pf" only) and a PGM preview writer.

PFM stores rows bottom-to-top as IEEE-754 32-bit floats; a negative scale on
the third header line means little-endian payload. The writer always emits
scale -1.0.
"""

from __future__ import annotations

import os

import numpy as np

from ..core import IngestionError, ParameterError, UnsupportedFormatError


def _read_header_line(f, path: str) -> bytes:
    line = b""
    while True:
        c = f.read(1)
        if not c:
            raise IngestionError(f"{path}: truncated PFM header")
        if c == b"\n":
            break
        line += c
    if line.startswith(b"#"):
        raise IngestionError(
            f"{path}: comment lines are not part of the PFM header format"
        )
    return line.strip()


def read_pfm(path: str | os.PathLike) -> np.ndarray:
    """Read a grayscale PFM file into a float32 array (top row first)."""
    path = os.fspath(path)
    with open(path, "rb") as f:
        magic = _read_header_line(f, path)
        if magic == b"PF":
            raise UnsupportedFormatError(
                f"{path}: colour PFM ('PF') is not supported, expected grayscale 'Pf'"
            )
        if magic != b"Pf":
            raise IngestionError(f"{path}: not a PFM file (magic {magic!r})")
        dims = _read_header_line(f, path).split()
        if len(dims) != 2:
            raise IngestionError(f"{path}: malformed PFM dimensions line")
        try:
            width, height = int(dims[0]), int(dims[1])
        except ValueError as e:
            raise IngestionError(f"{path}: malformed PFM dimensions line") from e
        if width <= 0 or height <= 0:
            raise IngestionError(f"{path}: non-positive PFM dimensions")
        try:
            scale = float(_read_header_line(f, path))
        except ValueError as e:
            raise IngestionError(f"{path}: malformed PFM scale line") from e
        if scale == 0.0:
            raise IngestionError(f"{path}: PFM scale must be nonzero")
        count = width * height
        payload = f.read(4 * count)
        if len(payload) != 4 * count:
            raise IngestionError(
                f"{path}: truncated PFM payload ({len(payload)} of {4 * count} bytes)"
            )
    dtype = "<f4" if scale < 0 else ">f4"
    data = np.frombuffer(payload, dtype=dtype).reshape(height, width)
    return np.flipud(data).astype(np.float32)


def write_pfm(path: str | os.PathLike, field: np.ndarray) -> None:
    """Write a 2-D array as grayscale little-endian PFM (scale -1.0)."""
    field = np.asarray(field)
    if field.ndim != 2:
        raise ParameterError(f"PFM writer needs a 2-D field, got shape {field.shape}")
    h, w = field.shape
    with open(os.fspath(path), "wb") as f:
        f.write(b"Pf\n")
        f.write(f"{w} {h}\n".encode("ascii"))
        f.write(b"-1.0\n")
        f.write(np.flipud(field).astype("<f4").tobytes())


def write_pgm(path: str | os.PathLike, field: np.ndarray) -> None:
    """16-bit binary PGM preview, min-max normalized (range noted in a comment)."""
    field = np.asarray(field, dtype=np.float64)
    if field.ndim != 2:
        raise ParameterError(f"PGM writer needs a 2-D field, got shape {field.shape}")
    lo, hi = float(field.min()), float(field.max())
    span = hi - lo
    norm = np.zeros_like(field) if span == 0 else (field - lo) / span
    data = np.round(norm * 65535.0).astype(">u2")
    h, w = field.shape
    with open(os.fspath(path), "wb") as f:
        f.write(b"P5\n")
        f.write(f"# min-max normalized from [{lo:.6g}, {hi:.6g}]\n".encode("ascii"))
        f.write(f"{w} {h}\n65535\n".encode("ascii"))
        f.write(data.tobytes())
