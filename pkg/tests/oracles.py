"""Independent reference implementations used to check the real code.

These deliberately avoid the package's own compute paths: the trainer mirror
is plain float64 Python/numpy following the published CBOW update rule, the
span oracle is an O(n^2) double loop, matmuls are explicit loops.
"""

from __future__ import annotations

import math

import numpy as np

LCG_MULT = 25214903917
LCG_INC = 11
MASK64 = (1 << 64) - 1
EXP_CLAMP = 6.0
LR_UPDATE_INTERVAL = 10_000


def sigmoid(x: float) -> float:
    if x > EXP_CLAMP:
        return 1.0
    if x < -EXP_CLAMP:
        return 0.0
    return 1.0 / (1.0 + math.exp(-x))


def cbow_example_loss(vbar: np.ndarray, outputs: np.ndarray, labels: np.ndarray) -> float:
    """L = -sum_j [ l_j log sig(f_j) + (1-l_j) log sig(-f_j) ], f_j = u_j . vbar."""
    loss = 0.0
    for u, label in zip(outputs, labels):
        f = float(np.dot(u, vbar))
        p = sigmoid(f) if label > 0.5 else 1.0 - sigmoid(f)
        loss -= math.log(max(p, 1e-10))
    return loss


def cbow_example_grad(vbar: np.ndarray, outputs: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """Analytic dL/dvbar = sum_j (sig(f_j) - l_j) u_j."""
    grad = np.zeros_like(vbar)
    for u, label in zip(outputs, labels):
        f = float(np.dot(u, vbar))
        grad += (sigmoid(f) - label) * u
    return grad


def reference_train_epoch(ids, offsets, syn0, syn1, table, *, window, negatives,
                          initial_lr, lr_floor, keep_probs, use_subsample,
                          total_words, seed, progress=None, losses=None):
    """Float64 mirror of one training pass, replicating the kernel's RNG draws.

    Mutates syn0/syn1 (float64 arrays) in place; `progress` is a 1-element
    list shared across epochs. Appends per-center losses when `losses` is a
    list.
    """
    if progress is None:
        progress = [0]
    tsize = len(table)
    rng = seed & MASK64
    lr = initial_lr
    local_seen = 0
    last_push = 0
    for s in range(len(offsets) - 1):
        sent = []
        for i in range(offsets[s], offsets[s + 1]):
            w = int(ids[i])
            local_seen += 1
            if use_subsample:
                rng = (rng * LCG_MULT + LCG_INC) & MASK64
                r = (rng & 0xFFFF) / 65536.0
                if keep_probs[w] < r:
                    continue
            sent.append(w)
        if local_seen - last_push >= LR_UPDATE_INTERVAL:
            progress[0] += local_seen - last_push
            last_push = local_seen
            lr = initial_lr * (1.0 - progress[0] / (total_words + 1))
            if lr < lr_floor:
                lr = lr_floor
        n = len(sent)
        for pos in range(n):
            rng = (rng * LCG_MULT + LCG_INC) & MASK64
            b = rng % window
            ctx = [sent[j] for j in range(pos - window + b, pos + window - b + 1)
                   if j != pos and 0 <= j < n]
            if not ctx:
                continue
            vbar = np.mean([syn0[c] for c in ctx], axis=0)
            target = sent[pos]
            neu1e = np.zeros_like(vbar)
            loss = 0.0
            for d in range(negatives + 1):
                if d == 0:
                    t, label = target, 1.0
                else:
                    rng = (rng * LCG_MULT + LCG_INC) & MASK64
                    t = int(table[(rng >> 16) % tsize])
                    if t == target:
                        continue
                    label = 0.0
                f = float(np.dot(vbar, syn1[t]))
                sig = sigmoid(f)
                g = (label - sig) * lr
                p = sig if label > 0.5 else 1.0 - sig
                loss -= math.log(max(p, 1e-10))
                neu1e += g * syn1[t]
                syn1[t] += g * vbar
            for c in ctx:
                syn0[c] += neu1e
            if losses is not None:
                losses.append(loss)
    progress[0] += local_seen - last_push
    return syn0, syn1


def naive_matvec(w: np.ndarray, v: np.ndarray) -> np.ndarray:
    out = np.zeros(w.shape[0], dtype=np.float64)
    for i in range(w.shape[0]):
        acc = 0.0
        for j in range(w.shape[1]):
            acc += w[i, j] * v[j]
        out[i] = acc
    return out


def brute_force_span(o_start, o_end, words, max_chars=500):
    """O(n^2) span search: best (score, k, k') over all feasible pairs."""
    n = len(words)
    best = None
    for k in range(n):
        for j in range(k, n):
            cost = sum(len(w) for w in words[k:j + 1]) + (j - k)
            if cost > max_chars:
                break
            score = o_start[k] + o_end[j]
            if best is None or score > best[0]:
                best = (score, k, j)
    return best


def brute_force_word_max(h, spans):
    out = []
    for lo, hi in spans:
        best = None
        for i in range(lo, hi):
            row = np.asarray(h[i], dtype=float)
            best = row.copy() if best is None else np.maximum(best, row)
        out.append(best)
    return np.asarray(out)
