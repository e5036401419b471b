"""Word-level output pooling shared by the NER and QA paths."""

from __future__ import annotations

import numpy as np

from .errors import DataError


def gather_word_initial(logits: np.ndarray, word_initial) -> np.ndarray:
    """Keep only positions whose word_initial flag is true, order preserved."""
    logits = np.asarray(logits)
    mask = np.asarray(word_initial, dtype=bool)
    if logits.shape[0] != mask.shape[0]:
        raise DataError(
            f"logits cover {logits.shape[0]} positions but mask has {mask.shape[0]}"
        )
    return logits[mask]


def pool_dual(o_std: np.ndarray, o_ext: np.ndarray) -> np.ndarray:
    """Elementwise mean of the two tokenizers' aligned word-level outputs."""
    o_std = np.asarray(o_std, dtype=np.float64)
    o_ext = np.asarray(o_ext, dtype=np.float64)
    if o_std.shape != o_ext.shape:
        raise DataError(
            f"cannot pool outputs of shapes {o_std.shape} and {o_ext.shape}"
        )
    return (o_std + o_ext) / 2.0
