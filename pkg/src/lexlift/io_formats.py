"""Binary matrix and vocab file formats shared by every pipeline stage.

Matrix files ("GLEX"): 4-byte magic, little-endian u32 version=1, u64 rows,
u64 cols, then rows*cols little-endian IEEE-754 float32 values, row-major,
no padding. Header integers are little-endian as well. The layout is
memory-mappable and trivially parseable from any language.

Vocab files: UTF-8 plain text, one token per line, line index = id
(byte-compatible with standard BERT vocab files).
"""

from __future__ import annotations

import hashlib
import os
import struct

import numpy as np

from .errors import ConfigError, FormatError

GLEX_MAGIC = b"GLEX"
GLEX_VERSION = 1
_HEADER = struct.Struct("<4sIQQ")


def write_matrix(path: str, matrix: np.ndarray) -> None:
    """Write a 2-D array as a GLEX file (values stored as float32)."""
    mat = np.ascontiguousarray(matrix, dtype=np.float32)
    if mat.ndim != 2:
        raise FormatError(f"GLEX stores 2-D matrices, got shape {matrix.shape}")
    tmp = f"{path}.tmp.{os.getpid()}"
    try:
        with open(tmp, "wb") as fh:
            fh.write(_HEADER.pack(GLEX_MAGIC, GLEX_VERSION, mat.shape[0], mat.shape[1]))
            if mat.dtype.byteorder not in ("<", "="):
                mat = mat.astype("<f4")
            fh.write(mat.tobytes())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_matrix_shape(path: str) -> tuple[int, int]:
    """Read and validate only the GLEX header, returning (rows, cols)."""
    if not os.path.exists(path):
        raise ConfigError(f"matrix file does not exist: {path}")
    with open(path, "rb") as fh:
        head = fh.read(_HEADER.size)
    if len(head) < _HEADER.size:
        raise FormatError(f"{path}: truncated GLEX header")
    magic, version, rows, cols = _HEADER.unpack(head)
    if magic != GLEX_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}, expected {GLEX_MAGIC!r}")
    if version != GLEX_VERSION:
        raise FormatError(f"{path}: unsupported GLEX version {version}")
    return int(rows), int(cols)


def read_matrix(path: str) -> np.ndarray:
    """Read a GLEX file into a float32 array."""
    rows, cols = read_matrix_shape(path)
    with open(path, "rb") as fh:
        fh.seek(_HEADER.size)
        data = np.fromfile(fh, dtype="<f4", count=rows * cols)
    if data.size != rows * cols:
        raise FormatError(f"{path}: expected {rows * cols} float32 values, got {data.size}")
    return data.reshape(rows, cols)


def write_vocab_file(path: str, tokens: list[str]) -> None:
    for tok in tokens:
        if "\n" in tok or "\r" in tok:
            raise FormatError(f"token contains a newline and cannot be serialized: {tok!r}")
    tmp = f"{path}.tmp.{os.getpid()}"
    try:
        with open(tmp, "w", encoding="utf-8") as fh:
            for tok in tokens:
                fh.write(tok)
                fh.write("\n")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_vocab_file(path: str) -> list[str]:
    if not os.path.exists(path):
        raise ConfigError(f"vocab file does not exist: {path}")
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    return lines


def sha256_file(path: str) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            digest.update(block)
    return digest.hexdigest()
