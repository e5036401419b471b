"""Abstract encoder contract plus offline implementations.

The toolkit never runs a transformer itself; inference math is defined over
any callable mapping token ids to per-position logit vectors. MockEncoder
serves precomputed logits from an .npz file keyed by a content hash of the
ids, which is also the interchange format for external model runners.
HashEncoder derives deterministic pseudo-random logits for self-contained
tests.
"""

from __future__ import annotations

import hashlib
from typing import Protocol, runtime_checkable

import numpy as np

from .errors import DataError, FormatError

MAX_INPUT_LEN = 512


@runtime_checkable
class EncoderInterface(Protocol):
    out_dim: int

    def __call__(self, ids) -> np.ndarray:  # (len(ids), out_dim)
        ...


def logits_key(ids) -> str:
    """Stable content key for an id sequence: sha256 of little-endian int32."""
    arr = np.asarray(ids, dtype="<i4")
    return hashlib.sha256(arr.tobytes()).hexdigest()[:32]


def _check_input(ids) -> np.ndarray:
    arr = np.asarray(ids)
    if arr.ndim != 1:
        raise DataError(f"encoder input must be 1-D, got shape {arr.shape}")
    if arr.size > MAX_INPUT_LEN:
        raise DataError(f"encoder input length {arr.size} exceeds {MAX_INPUT_LEN}")
    return arr


class MockEncoder:
    """Replays logits stored in an .npz archive, keyed by logits_key(ids)."""

    def __init__(self, path: str, out_dim: int = 2):
        self.path = path
        self.out_dim = out_dim
        try:
            self._store = np.load(path)
        except Exception as e:
            raise FormatError(f"cannot open logits archive {path}: {e}")

    def __call__(self, ids) -> np.ndarray:
        arr = _check_input(ids)
        key = logits_key(arr)
        if key not in self._store:
            raise DataError(
                f"logits archive {self.path} has no entry for input key {key}"
            )
        logits = np.asarray(self._store[key], dtype=np.float64)
        if logits.shape != (arr.size, self.out_dim):
            raise DataError(
                f"stored logits for key {key} have shape {logits.shape}, "
                f"expected {(arr.size, self.out_dim)}"
            )
        return logits


class HashEncoder:
    """Deterministic pseudo-random logits seeded by the input ids."""

    def __init__(self, out_dim: int = 2, scale: float = 1.0, salt: str = ""):
        self.out_dim = out_dim
        self.scale = scale
        self.salt = salt

    def __call__(self, ids) -> np.ndarray:
        arr = _check_input(ids)
        digest = hashlib.sha256(
            self.salt.encode() + np.asarray(arr, dtype="<i4").tobytes()
        ).digest()
        rng = np.random.default_rng(int.from_bytes(digest[:8], "little"))
        return self.scale * rng.standard_normal((arr.size, self.out_dim))


def write_logits_npz(path: str, entries: dict[str, np.ndarray]) -> None:
    """Persist a {logits_key: array} mapping for MockEncoder."""
    np.savez(path, **{k: np.asarray(v, dtype=np.float32) for k, v in entries.items()})
