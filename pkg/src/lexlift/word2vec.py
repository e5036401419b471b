"""CBOW word-vector training with negative sampling, from scratch.

Matches the classic C tool's semantics: a per-example logistic loss over one
positive and `negatives` sampled outputs, context means over a uniformly
shrunk window, frequency subsampling, a power-smoothed unigram sampling
table, and a linear learning-rate decay with a small floor. Multi-worker
training updates the shared tables lock-free (benign races); a single worker
is bit-deterministic for a fixed seed.
"""

from __future__ import annotations

import os
import threading
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

import numpy as np
from numba import njit

from .errors import ConfigError, DataError, LexliftError
from .io_formats import read_vocab_file, write_vocab_file

LCG_MULT = np.uint64(25214903917)
LCG_INC = np.uint64(11)
_MASK64 = (1 << 64) - 1

# Beyond this magnitude the logistic saturates and the gradient is zero,
# mirroring the reference tool's clipped sigmoid table.
EXP_CLAMP = 6.0

MAX_SENTENCE_TOKENS = 10_000
LR_UPDATE_INTERVAL = 10_000


@dataclass(frozen=True)
class W2VConfig:
    dim: int
    window: int = 5
    negatives: int = 5
    subsample_threshold: float = 1e-3
    min_count: int = 5
    epochs: int = 5
    initial_lr: float = 0.05
    unigram_power: float = 0.75
    table_size: int = 100_000_000
    seed: int = 1
    workers: int = 1

    def validate(self, vocab_size: int | None = None) -> None:
        if self.dim < 1:
            raise ConfigError(f"dim must be >= 1, got {self.dim}")
        if self.window < 1:
            raise ConfigError(f"window must be >= 1, got {self.window}")
        if self.negatives < 1:
            raise ConfigError(f"negatives must be >= 1, got {self.negatives}")
        if self.initial_lr <= 0:
            raise ConfigError(f"initial_lr must be positive, got {self.initial_lr}")
        if self.epochs < 0:
            raise ConfigError(f"epochs must be >= 0, got {self.epochs}")
        if self.workers < 1:
            raise ConfigError(f"workers must be >= 1, got {self.workers}")
        if vocab_size is not None and self.table_size < vocab_size:
            raise ConfigError(
                f"table_size ({self.table_size}) must be >= vocabulary size ({vocab_size})"
            )


@dataclass
class Vocab:
    """Ordered token inventory with contiguous ids from 0."""

    tokens: list[str]
    counts: np.ndarray | None
    id_of: dict[str, int] = field(repr=False)

    def __init__(self, tokens: Sequence[str], counts: np.ndarray | None = None):
        self.tokens = list(tokens)
        self.counts = None if counts is None else np.asarray(counts, dtype=np.int64)
        self.id_of = {}
        for i, tok in enumerate(self.tokens):
            if tok in self.id_of:
                raise DataError(f"duplicate vocab token {tok!r}")
            self.id_of[tok] = i
        if self.counts is not None and len(self.counts) != len(self.tokens):
            raise DataError("counts length does not match token count")

    def __len__(self) -> int:
        return len(self.tokens)

    def __contains__(self, token: str) -> bool:
        return token in self.id_of

    @classmethod
    def load(cls, path: str) -> "Vocab":
        return cls(read_vocab_file(path))

    def save(self, path: str) -> None:
        write_vocab_file(path, self.tokens)


@dataclass
class EmbeddingTable:
    """Dense row-major float32 matrix keyed by token id."""

    matrix: np.ndarray

    def __post_init__(self):
        self.matrix = np.ascontiguousarray(self.matrix, dtype=np.float32)
        if self.matrix.ndim != 2:
            raise DataError(f"embedding matrix must be 2-D, got shape {self.matrix.shape}")

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]

    def __len__(self) -> int:
        return self.matrix.shape[0]


def build_vocab(corpus: Iterable[Sequence[str]], min_count: int) -> Vocab:
    """Count tokens and keep those with frequency >= min_count, most frequent first."""
    counter: Counter[str] = Counter()
    for words in corpus:
        counter.update(words)
    kept = [(tok, n) for tok, n in counter.items() if n >= min_count]
    if not kept:
        raise ConfigError(
            f"no token reaches min_count={min_count}; vocabulary would be empty"
        )
    kept.sort(key=lambda item: (-item[1], item[0]))
    return Vocab([t for t, _ in kept], np.array([n for _, n in kept], dtype=np.int64))


def keep_probability(counts: np.ndarray, threshold: float) -> np.ndarray:
    """Closed-form subsampling keep probability per token, clipped to 1."""
    counts = np.asarray(counts, dtype=np.float64)
    total = counts.sum()
    if threshold <= 0 or total == 0:
        return np.ones_like(counts)
    rel = counts / total
    return np.minimum(1.0, np.sqrt(threshold / rel) + threshold / rel)


def build_unigram_table(counts: np.ndarray, power: float, size: int) -> np.ndarray:
    """Quantize the count^power distribution into an id table for O(1) sampling."""
    counts = np.asarray(counts, dtype=np.float64)
    if size < counts.size:
        raise ConfigError(f"table_size ({size}) must be >= vocabulary size ({counts.size})")
    weights = counts ** power
    cum = np.cumsum(weights)
    cum /= cum[-1]
    positions = np.arange(size, dtype=np.float64) / size
    table = np.searchsorted(cum, positions, side="right")
    return np.minimum(table, counts.size - 1).astype(np.int32)


def lcg_next(state: int) -> int:
    """One step of the 48-bit-style linear congruential generator."""
    return (state * 25214903917 + 11) & _MASK64


def negative_sample(table: np.ndarray, state: int) -> tuple[int, int]:
    """Draw one token id from the unigram table; returns (id, new rng state)."""
    state = lcg_next(state)
    return int(table[(state >> 16) % len(table)]), state


def encode_corpus(corpus: Iterable[Sequence[str]], vocab: Vocab) -> tuple[np.ndarray, np.ndarray]:
    """Map a token stream to (ids, sentence offsets), dropping out-of-vocab tokens."""
    ids: list[int] = []
    offsets: list[int] = [0]
    id_of = vocab.id_of
    for words in corpus:
        n_before = len(ids)
        for w in words:
            i = id_of.get(w)
            if i is not None:
                ids.append(i)
                if len(ids) - n_before >= MAX_SENTENCE_TOKENS:
                    offsets.append(len(ids))
                    n_before = len(ids)
        if len(ids) > n_before:
            offsets.append(len(ids))
    return np.array(ids, dtype=np.int32), np.array(offsets, dtype=np.int64)


@njit(cache=True, nogil=True)
def _train_shard(ids, offsets, syn0, syn1, table, window, negatives,
                 initial_lr, lr_floor, keep_probs, use_subsample,
                 total_words, progress, seed, loss_buf, track_loss):
    dim = syn0.shape[1]
    tsize = np.uint64(table.shape[0])
    neu1 = np.zeros(dim, dtype=np.float32)
    neu1e = np.zeros(dim, dtype=np.float32)
    sent = np.empty(MAX_SENTENCE_TOKENS, dtype=np.int32)
    rng = np.uint64(seed)
    lr = np.float32(initial_lr)
    local_seen = 0
    last_push = 0
    centers = 0
    for s in range(offsets.shape[0] - 1):
        n = 0
        for i in range(offsets[s], offsets[s + 1]):
            w = ids[i]
            local_seen += 1
            if use_subsample:
                rng = rng * LCG_MULT + LCG_INC
                r = np.float64(rng & np.uint64(0xFFFF)) / 65536.0
                if keep_probs[w] < r:
                    continue
            sent[n] = w
            n += 1
        if local_seen - last_push >= LR_UPDATE_INTERVAL:
            progress[0] += local_seen - last_push
            last_push = local_seen
            frac = np.float64(progress[0]) / np.float64(total_words + 1)
            lr = np.float32(initial_lr * (1.0 - frac))
            if lr < lr_floor:
                lr = np.float32(lr_floor)
        for pos in range(n):
            rng = rng * LCG_MULT + LCG_INC
            b = np.int64(rng % np.uint64(window))
            cw = 0
            for k in range(dim):
                neu1[k] = np.float32(0.0)
                neu1e[k] = np.float32(0.0)
            for j in range(pos - window + b, pos + window - b + 1):
                if j == pos or j < 0 or j >= n:
                    continue
                c = sent[j]
                for k in range(dim):
                    neu1[k] += syn0[c, k]
                cw += 1
            if cw == 0:
                continue
            inv = np.float32(1.0) / np.float32(cw)
            for k in range(dim):
                neu1[k] *= inv
            target = sent[pos]
            loss = 0.0
            for d in range(negatives + 1):
                if d == 0:
                    t = target
                    label = np.float32(1.0)
                else:
                    rng = rng * LCG_MULT + LCG_INC
                    t = table[np.int64((rng >> np.uint64(16)) % tsize)]
                    if t == target:
                        continue
                    label = np.float32(0.0)
                f = np.float32(0.0)
                for k in range(dim):
                    f += neu1[k] * syn1[t, k]
                if f > EXP_CLAMP:
                    sig = np.float32(1.0)
                elif f < -EXP_CLAMP:
                    sig = np.float32(0.0)
                else:
                    sig = np.float32(1.0) / (np.float32(1.0) + np.exp(-f))
                g = (label - sig) * lr
                if track_loss:
                    p = np.float64(sig) if label > 0.5 else 1.0 - np.float64(sig)
                    if p < 1e-10:
                        p = 1e-10
                    loss -= np.log(p)
                for k in range(dim):
                    neu1e[k] += g * syn1[t, k]
                for k in range(dim):
                    syn1[t, k] += g * neu1[k]
            for j in range(pos - window + b, pos + window - b + 1):
                if j == pos or j < 0 or j >= n:
                    continue
                c = sent[j]
                for k in range(dim):
                    syn0[c, k] += neu1e[k]
            if track_loss:
                loss_buf[centers] = loss
            centers += 1
    progress[0] += local_seen - last_push
    return centers


def init_embeddings(vocab_size: int, dim: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Input vectors uniform in [-0.5/dim, 0.5/dim]; output vectors zero."""
    rng = np.random.default_rng(seed)
    syn0 = ((rng.random((vocab_size, dim), dtype=np.float32) - 0.5) / dim).astype(np.float32)
    syn1 = np.zeros((vocab_size, dim), dtype=np.float32)
    return syn0, syn1


def _worker_count(config: W2VConfig) -> int:
    workers = config.workers
    cap = os.environ.get("LEXLIFT_THREADS")
    if cap:
        try:
            workers = min(workers, max(1, int(cap)))
        except ValueError:
            raise ConfigError(f"LEXLIFT_THREADS is not an integer: {cap!r}")
    return workers


def shard_seed(seed: int, epoch: int, worker: int) -> int:
    return ((seed + 1) * 1_000_003 + epoch * 8191 + worker) & _MASK64


def train(corpus: Iterable[Sequence[str]], vocab: Vocab, config: W2VConfig,
          track_loss: bool = False):
    """Train CBOW vectors and return the input-side EmbeddingTable.

    `corpus` must be re-iterable (a list or a fresh-iterator factory is fine
    because it is encoded once up front). With track_loss=True (single worker
    only) also returns the per-example loss array of epoch-concatenated
    losses: (table, losses).
    """
    config.validate(vocab_size=len(vocab))
    if vocab.counts is None:
        raise ConfigError("training requires a vocab with corpus counts (use build_vocab)")
    syn0, syn1 = init_embeddings(len(vocab), config.dim, config.seed)
    if config.epochs == 0:
        table = EmbeddingTable(syn0)
        return (table, np.empty(0, dtype=np.float32)) if track_loss else table

    ids, offsets = encode_corpus(corpus, vocab)
    if ids.size == 0:
        raise DataError("corpus has no in-vocabulary tokens")
    workers = _worker_count(config)
    if track_loss and workers != 1:
        raise ConfigError("loss tracking requires a single worker")

    unigram = build_unigram_table(vocab.counts, config.unigram_power, config.table_size)
    keep = keep_probability(vocab.counts, config.subsample_threshold)
    use_subsample = config.subsample_threshold > 0
    train_words = int(vocab.counts.sum())
    total_words = config.epochs * train_words
    lr_floor = config.initial_lr * 1e-4
    progress = np.zeros(1, dtype=np.int64)
    losses: list[np.ndarray] = []

    n_sent = offsets.shape[0] - 1
    for epoch in range(config.epochs):
        if workers == 1:
            loss_buf = np.empty(ids.size if track_loss else 1, dtype=np.float32)
            centers = _train_shard(
                ids, offsets, syn0, syn1, unigram, config.window, config.negatives,
                config.initial_lr, lr_floor, keep, use_subsample,
                total_words, progress, shard_seed(config.seed, epoch, 0),
                loss_buf, track_loss,
            )
            if track_loss:
                losses.append(loss_buf[:centers].copy())
        else:
            bounds = np.linspace(0, n_sent, workers + 1).astype(np.int64)
            threads = []
            for w in range(workers):
                lo, hi = bounds[w], bounds[w + 1]
                if hi <= lo:
                    continue
                shard_offsets = offsets[lo:hi + 1]
                threads.append(threading.Thread(
                    target=_train_shard,
                    args=(ids, shard_offsets, syn0, syn1, unigram, config.window,
                          config.negatives, config.initial_lr, lr_floor, keep,
                          use_subsample, total_words, progress,
                          shard_seed(config.seed, epoch, w),
                          np.empty(1, dtype=np.float32), False),
                ))
            for t in threads:
                t.start()
            for t in threads:
                t.join()

    if not np.all(np.isfinite(syn0)) or not np.all(np.isfinite(syn1)):
        raise LexliftError("training produced non-finite embedding values")
    table = EmbeddingTable(syn0)
    if track_loss:
        return table, np.concatenate(losses) if losses else np.empty(0, dtype=np.float32)
    return table


def train_token_file(path: str, config: W2VConfig, min_count: int | None = None,
                     track_loss: bool = False):
    """Build a vocab from a tokenized file and train on it; returns (vocab, table)."""
    from .corpus import stream_token_lines

    mc = config.min_count if min_count is None else min_count
    vocab = build_vocab(stream_token_lines(path), mc)

    class _Lines:
        def __iter__(self) -> Iterator[list[str]]:
            return stream_token_lines(path)

    result = train(_Lines(), vocab, config, track_loss=track_loss)
    if track_loss:
        return vocab, result[0], result[1]
    return vocab, result
