"""Least-squares alignment of the word-vector space into the LM embedding space.

Fits W (d_LM x d_W2V) minimizing sum ||W a_x - b_x||^2 over the tokens shared
by both vocabularies, where a_x are word vectors and b_x are LM embedding
rows. Solved as A W^T ~= B via QR when A is well conditioned, otherwise via
the pseudoinverse (minimum-norm solution). Also provides the identity/random
ablation maps and a nearest-neighbor diagnostic report.
"""

from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataError, FormatError
from .io_formats import read_matrix, write_matrix

log = logging.getLogger(__name__)

COND_THRESHOLD = 1e12
MAP_KINDS = ("least_squares", "identity", "random")


@dataclass
class TrainingPairs:
    """Row-aligned anchor matrices for the shared vocabulary."""

    tokens: list[str]
    a: np.ndarray  # (n, d_w2v) word vectors
    b: np.ndarray  # (n, d_lm) LM rows

    def __post_init__(self):
        self.a = np.ascontiguousarray(self.a, dtype=np.float64)
        self.b = np.ascontiguousarray(self.b, dtype=np.float64)
        if self.a.ndim != 2 or self.b.ndim != 2:
            raise DataError("pair matrices must be 2-D")
        if not (len(self.tokens) == self.a.shape[0] == self.b.shape[0]):
            raise DataError("pair tokens and matrices disagree on row count")

    def __len__(self) -> int:
        return len(self.tokens)


@dataclass
class LinearMap:
    """The map W plus fit metadata; kind is least_squares, identity, or random."""

    matrix: np.ndarray  # (d_lm, d_w2v) float64
    kind: str = "least_squares"
    n_pairs: int = 0
    residual_rms: float = 0.0

    def __post_init__(self):
        self.matrix = np.ascontiguousarray(self.matrix, dtype=np.float64)
        if self.matrix.ndim != 2:
            raise DataError(f"map must be 2-D, got shape {self.matrix.shape}")
        if self.kind not in MAP_KINDS:
            raise ConfigError(f"unknown map kind {self.kind!r}")
        if not np.all(np.isfinite(self.matrix)):
            raise DataError("map contains non-finite values")

    @property
    def d_lm(self) -> int:
        return self.matrix.shape[0]

    @property
    def d_w2v(self) -> int:
        return self.matrix.shape[1]

    def save(self, path: str) -> None:
        write_matrix(path, self.matrix)
        sidecar = {
            "kind": self.kind,
            "d_lm": self.d_lm,
            "d_w2v": self.d_w2v,
            "n_pairs": self.n_pairs,
            "residual_rms": self.residual_rms,
        }
        with open(path + ".json", "w", encoding="utf-8") as f:
            json.dump(sidecar, f, indent=2)
            f.write("\n")

    @classmethod
    def load(cls, path: str) -> "LinearMap":
        matrix = read_matrix(path).astype(np.float64)
        kind = "least_squares"
        n_pairs = 0
        residual = 0.0
        sidecar = path + ".json"
        if os.path.exists(sidecar):
            with open(sidecar, encoding="utf-8") as f:
                try:
                    meta = json.load(f)
                except json.JSONDecodeError as e:
                    raise FormatError(f"bad map sidecar {sidecar}: {e}")
            kind = meta.get("kind", kind)
            n_pairs = int(meta.get("n_pairs", 0))
            residual = float(meta.get("residual_rms", 0.0))
            if meta.get("d_lm") != matrix.shape[0] or meta.get("d_w2v") != matrix.shape[1]:
                raise FormatError(
                    f"map sidecar dims {meta.get('d_lm')}x{meta.get('d_w2v')} "
                    f"disagree with matrix {matrix.shape[0]}x{matrix.shape[1]}"
                )
        return cls(matrix=matrix, kind=kind, n_pairs=n_pairs, residual_rms=residual)


def intersect_vocab(lm_vocab, w2v_vocab, lm_table, w2v_table) -> TrainingPairs:
    """Pairs for exactly the tokens in both vocabs (case-sensitive exact match).

    Rows follow word-vocab order. No filtering of short or noisy tokens.
    """
    lm_ids = lm_vocab.id_of
    lm_matrix = lm_table.matrix
    w2v_matrix = w2v_table.matrix
    tokens: list[str] = []
    a_rows: list[np.ndarray] = []
    b_rows: list[np.ndarray] = []
    for i, tok in enumerate(w2v_vocab.tokens):
        j = lm_ids.get(tok)
        if j is not None:
            tokens.append(tok)
            a_rows.append(w2v_matrix[i])
            b_rows.append(lm_matrix[j])
    if not tokens:
        raise DataError("vocabulary intersection is empty; alignment impossible")
    return TrainingPairs(tokens, np.stack(a_rows), np.stack(b_rows))


def fit_linear_map(pairs: TrainingPairs) -> LinearMap:
    """W minimizing sum_x ||W a_x - b_x||^2 (W^T = min-norm solution of A W^T ~= B)."""
    a, b = pairs.a, pairs.b
    n, d_w2v = a.shape
    if n == 0:
        raise DataError("no training pairs")
    if n < d_w2v:
        log.warning("underdetermined alignment: %d pairs for %d dimensions", n, d_w2v)

    wt = None
    if n >= d_w2v:
        q, r = np.linalg.qr(a)
        diag = np.abs(np.diag(r))
        if diag.min() > 0 and diag.max() / diag.min() < COND_THRESHOLD:
            wt = np.linalg.solve(r, q.T @ b)
    if wt is None:
        log.warning("anchor matrix is rank-deficient; using pseudoinverse solution")
        wt = np.linalg.pinv(a) @ b
    resid = a @ wt - b
    rms = float(np.sqrt(np.mean(np.sum(resid * resid, axis=1))))
    return LinearMap(matrix=wt.T, kind="least_squares", n_pairs=n, residual_rms=rms)


def apply_map(linear_map: LinearMap, vec: np.ndarray) -> np.ndarray:
    """W @ vec for one vector, or row-wise for an (n, d_w2v) matrix."""
    v = np.asarray(vec, dtype=np.float64)
    if v.shape[-1] != linear_map.d_w2v:
        raise DataError(
            f"vector has dim {v.shape[-1]}, map expects {linear_map.d_w2v}"
        )
    return v @ linear_map.matrix.T


def make_ablation_map(kind: str, d_lm: int, d_w2v: int, seed: int = 0) -> LinearMap:
    """identity: W = I (requires d_lm == d_w2v). random: marker map telling the
    extension step to draw fresh random rows instead of using word vectors."""
    if kind == "identity":
        if d_lm != d_w2v:
            raise ConfigError(
                f"identity ablation requires d_W2V == d_LM, got {d_w2v} vs {d_lm}"
            )
        return LinearMap(matrix=np.eye(d_lm, dtype=np.float64), kind="identity")
    if kind == "random":
        rng = np.random.default_rng(seed)
        matrix = rng.normal(0.0, 0.02, size=(d_lm, d_w2v))
        return LinearMap(matrix=matrix, kind="random")
    raise ConfigError(f"unknown ablation kind {kind!r} (expected identity or random)")


def _cosine_top_k(query: np.ndarray, matrix: np.ndarray, tokens: list[str], k: int,
                  exclude: int | None = None) -> list[str]:
    if k <= 0:
        return []
    denom = np.linalg.norm(matrix, axis=1) * (np.linalg.norm(query) or 1.0)
    denom[denom == 0] = 1.0
    sims = (matrix @ query) / denom
    if exclude is not None:
        sims[exclude] = -np.inf
    order = np.argsort(-sims, kind="stable")[: min(k, len(tokens))]
    return [tokens[i] for i in order]


def alignment_report(linear_map: LinearMap, pairs: TrainingPairs, w2v_vocab,
                     lm_vocab, queries: list[str], k: int) -> dict:
    """Within- and cross-space cosine neighbors over the paired tokens.

    Per query: neighbors among the LM rows and among the mapped word vectors.
    Within-space lists exclude the query itself; cross-space lists keep it, so
    a zero-residual pair surfaces its own LM entry as the top cross neighbor.
    Queries absent from both vocabularies get a "not found" entry.
    """
    idx = {t: i for i, t in enumerate(pairs.tokens)}
    mapped = apply_map(linear_map, pairs.a)
    entries = {}
    for q in queries:
        if q not in w2v_vocab.id_of and q not in lm_vocab.id_of:
            entries[q] = {"status": "not found"}
            continue
        i = idx.get(q)
        if i is None:
            entries[q] = {"status": "no paired vector"}
            continue
        entries[q] = {
            "status": "ok",
            "lm_within": _cosine_top_k(pairs.b[i], pairs.b, pairs.tokens, k, exclude=i),
            "w2v_within": _cosine_top_k(mapped[i], mapped, pairs.tokens, k, exclude=i),
            "lm_cross": _cosine_top_k(mapped[i], pairs.b, pairs.tokens, k),
            "w2v_cross": _cosine_top_k(pairs.b[i], mapped, pairs.tokens, k),
        }
    return {"k": k, "queries": entries}
