"""Extractive QA over long contexts: sliding windows, pooling, span decoding.

Window step indices are 1-based (WindowPlan and SpanPrediction expose them
that way); everything else is 0-based with conversion at the boundary.
The model input is [CLS] T(Q) [SEP] context-slice [SEP], capped at 512
positions, with the active window centered by padding context on both sides
whenever the document allows it.
"""

from __future__ import annotations

import json
import re
import string
from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .corpus import BasicTokenizerConfig, basic_tokenize
from .errors import DataError, FormatError
from .pooling import pool_dual
from .wordpiece import WordpieceVocab, tokenize_extended, tokenize_standard

MAX_INPUT_LEN = 512
CONTEXT_BUDGET = MAX_INPUT_LEN - 3  # [CLS], two [SEP]s
MAX_ANSWER_CHARS = 500


@dataclass(frozen=True)
class WindowStep:
    """One sliding-window step; all positions 1-based over T(C)."""

    a_l: int
    a_r: int
    p_l: int
    p_r: int

    @property
    def slice_l(self) -> int:
        return self.a_l - self.p_l

    @property
    def slice_r(self) -> int:
        return self.a_r + self.p_r

    def input_len(self, q_len: int) -> int:
        return 3 + q_len + (self.slice_r - self.slice_l + 1)


@dataclass(frozen=True)
class WindowPlan:
    q_len: int
    c_len: int
    stride: int
    steps: tuple[WindowStep, ...]

    @property
    def n_steps(self) -> int:
        return len(self.steps)


def plan_windows(q_len: int, c_len: int) -> WindowPlan:
    """Width/stride N = floor((509 - q_len)/2); active ranges tile [1, c_len]."""
    if q_len < 1 or c_len < 1:
        raise DataError(f"q_len and c_len must be >= 1, got {q_len}, {c_len}")
    n_stride = (CONTEXT_BUDGET - q_len) // 2
    if n_stride <= 0:
        raise DataError(
            f"question exceeds window capacity: |T(Q)|={q_len} leaves no room "
            f"for context in a {MAX_INPUT_LEN}-token input"
        )
    budget = CONTEXT_BUDGET - q_len
    steps = []
    n = 1
    while (n - 1) * n_stride + 1 <= c_len:
        a_l = (n - 1) * n_stride + 1
        a_r = min(c_len, n * n_stride)
        width = a_r - a_l + 1
        pad = budget - width
        p_l = min(pad // 2, a_l - 1)
        p_r = min(pad - p_l, c_len - a_r)
        p_l = min(pad - p_r, a_l - 1)
        steps.append(WindowStep(a_l, a_r, p_l, p_r))
        n += 1
    return WindowPlan(q_len=q_len, c_len=c_len, stride=n_stride, steps=tuple(steps))


def assemble_window_input(q_ids: Sequence[int], c_ids: Sequence[int],
                          plan: WindowPlan, step: int,
                          cls_id: int, sep_id: int) -> list[int]:
    """X^(n) = [CLS] T(Q) [SEP] C[a_l-p_l .. a_r+p_r] [SEP]; step is 1-based."""
    if len(q_ids) != plan.q_len or len(c_ids) != plan.c_len:
        raise DataError(
            f"plan was made for lengths ({plan.q_len}, {plan.c_len}), "
            f"got ({len(q_ids)}, {len(c_ids)})"
        )
    if not 1 <= step <= plan.n_steps:
        raise DataError(f"step {step} out of range 1..{plan.n_steps}")
    s = plan.steps[step - 1]
    window = list(c_ids[s.slice_l - 1 : s.slice_r])
    ids = [cls_id, *q_ids, sep_id, *window, sep_id]
    if len(ids) > MAX_INPUT_LEN:
        raise DataError(f"assembled input length {len(ids)} exceeds {MAX_INPUT_LEN}")
    return ids


def concat_active(per_step_logits: Sequence[np.ndarray], plan: WindowPlan) -> np.ndarray:
    """Stitch active slices into h over the full tokenized context."""
    if len(per_step_logits) != plan.n_steps:
        raise DataError(
            f"got logits for {len(per_step_logits)} steps, plan has {plan.n_steps}"
        )
    first = np.asarray(per_step_logits[0])
    h = np.empty((plan.c_len,) + first.shape[1:], dtype=np.float64)
    for i, s in enumerate(plan.steps):
        logits = np.asarray(per_step_logits[i], dtype=np.float64)
        expected = s.input_len(plan.q_len)
        if logits.shape[0] != expected:
            raise DataError(
                f"step {i + 1} logits cover {logits.shape[0]} positions, "
                f"input has {expected}"
            )
        # Context slice starts after [CLS] + question + [SEP]; the active
        # window sits p_l positions into the slice.
        offset = 2 + plan.q_len + s.p_l
        width = s.a_r - s.a_l + 1
        h[s.a_l - 1 : s.a_r] = logits[offset : offset + width]
    return h


def word_level_logits(h: np.ndarray, word_spans: Sequence[tuple[int, int]]) -> np.ndarray:
    """Per-word max over that word's pieces, each stream independently."""
    h = np.asarray(h, dtype=np.float64)
    pos = 0
    out = np.empty((len(word_spans),) + h.shape[1:], dtype=np.float64)
    for i, (lo, hi) in enumerate(word_spans):
        if lo != pos or hi <= lo:
            raise DataError(
                f"word spans do not partition the piece range: span {i} is "
                f"[{lo}, {hi}) after position {pos}"
            )
        out[i] = h[lo:hi].max(axis=0)
        pos = hi
    if pos != h.shape[0]:
        raise DataError(f"word spans cover {pos} pieces, logits have {h.shape[0]}")
    return out


@dataclass
class SpanPrediction:
    """Selected answer span; k and k_end are 1-based word indices, k <= k_end."""

    k: int
    k_end: int
    text: str
    score: float


def decode_span(o_start: np.ndarray, o_end: np.ndarray, words: Sequence[str],
                char_lengths: Sequence[int] | None = None) -> SpanPrediction:
    """Maximize o_start[k] + o_end[k'] over k <= k' with the rendered answer
    at most 500 characters; ties go to smaller k, then smaller k'."""
    o_start = np.asarray(o_start, dtype=np.float64)
    o_end = np.asarray(o_end, dtype=np.float64)
    n = len(words)
    if o_start.shape != (n,) or o_end.shape != (n,):
        raise DataError(
            f"logit lengths {o_start.shape}, {o_end.shape} do not match "
            f"{n} words"
        )
    if n == 0:
        raise DataError("cannot decode a span over zero words")
    lengths = np.asarray(
        [len(w) for w in words] if char_lengths is None else char_lengths,
        dtype=np.int64,
    )
    # Rendered cost of words[k..k'] = total chars + one space between words.
    prefix = np.concatenate([[0], np.cumsum(lengths + 1)])  # cost(k,k') = prefix[k'+1]-prefix[k]-1
    best: tuple[float, int, int] | None = None
    for k in range(n):
        limit = int(np.searchsorted(prefix, prefix[k] + MAX_ANSWER_CHARS + 1, side="right")) - 1
        if limit <= k:
            continue  # even the single word overflows
        j = k + int(np.argmax(o_end[k:limit]))
        score = float(o_start[k] + o_end[j])
        if best is None or score > best[0]:
            best = (score, k, j)
    if best is None:
        raise DataError("no feasible span: every single word exceeds 500 characters")
    score, k, j = best
    return SpanPrediction(k=k + 1, k_end=j + 1, text=" ".join(words[k : j + 1]), score=score)


# ---------------------------------------------------------------------------
# SQuAD-style scoring


def normalize_answer(s: str) -> str:
    """Lowercase, drop punctuation, drop articles, collapse whitespace."""
    s = s.lower()
    s = "".join(ch for ch in s if ch not in set(string.punctuation))
    s = re.sub(r"\b(a|an|the)\b", " ", s)
    return " ".join(s.split())


def _f1(prediction: str, gold: str) -> float:
    pred_tokens = normalize_answer(prediction).split()
    gold_tokens = normalize_answer(gold).split()
    if not pred_tokens or not gold_tokens:
        return float(pred_tokens == gold_tokens)
    common = Counter(pred_tokens) & Counter(gold_tokens)
    overlap = sum(common.values())
    if overlap == 0:
        return 0.0
    precision = overlap / len(pred_tokens)
    recall = overlap / len(gold_tokens)
    return 2 * precision * recall / (precision + recall)


def qa_score(prediction: str, golds: Sequence[str]) -> dict[str, float]:
    """SQuAD-scorer em/f1 plus the substring relaxation, maxed over golds."""
    if not golds:
        raise DataError("qa_score requires at least one gold answer")
    pred_norm = normalize_answer(prediction)
    em = max(float(pred_norm == normalize_answer(g)) for g in golds)
    f1 = max(_f1(prediction, g) for g in golds)
    substr = max(float(pred_norm in normalize_answer(g)) for g in golds)
    return {"em": em, "f1": f1, "substr": substr}


def score_predictions(predictions: dict[str, str],
                      golds: dict[str, list[str]]) -> dict[str, float]:
    """Mean metrics over all gold question ids; missing predictions score 0."""
    if not golds:
        raise DataError("no gold answers to score against")
    totals = {"em": 0.0, "f1": 0.0, "substr": 0.0}
    for qid, answers in golds.items():
        if qid in predictions:
            metrics = qa_score(predictions[qid], answers)
            for key in totals:
                totals[key] += metrics[key]
    n = len(golds)
    result = {key: value / n for key, value in totals.items()}
    result["n"] = float(n)
    return result


# ---------------------------------------------------------------------------
# Dataset I/O and the inference driver


@dataclass
class QAExample:
    qid: str
    question: str
    context: str
    golds: list[str] = field(default_factory=list)


def read_squad(path: str) -> list[QAExample]:
    """SQuAD-format JSON (the Covid-QA release uses the same layout)."""
    with open(path, encoding="utf-8") as f:
        try:
            payload = json.load(f)
        except json.JSONDecodeError as e:
            raise FormatError(f"{path} is not valid JSON: {e}")
    if "data" not in payload:
        raise FormatError(f"{path} has no top-level 'data' field")
    examples = []
    for article in payload["data"]:
        for para in article.get("paragraphs", []):
            context = para.get("context", "")
            for qa in para.get("qas", []):
                examples.append(QAExample(
                    qid=str(qa.get("id")),
                    question=qa.get("question", ""),
                    context=context,
                    golds=[a.get("text", "") for a in qa.get("answers", [])],
                ))
    if not examples:
        raise FormatError(f"{path} contains no questions")
    return examples


QA_MODES = ("standard", "extended", "pooled")


def _tokenize_for(mode: str, words: list[str], vocab: WordpieceVocab,
                  added: dict[str, int]):
    if mode == "standard":
        return tokenize_standard(words, vocab)
    return tokenize_extended(words, vocab, added)


def infer_example(example: QAExample, encoder: Callable, vocab: WordpieceVocab,
                  added: dict[str, int], mode: str,
                  basic_config: BasicTokenizerConfig | None = None) -> SpanPrediction:
    """Full QA pass for one question: window, encode, stitch, pool, decode."""
    if mode not in QA_MODES:
        raise DataError(f"unknown QA mode {mode!r} (expected one of {QA_MODES})")
    basic_config = basic_config or BasicTokenizerConfig()
    q_words = basic_tokenize(example.question, basic_config)
    c_words = basic_tokenize(example.context, basic_config)
    if not q_words:
        raise DataError(f"question {example.qid} is empty after tokenization")
    if not c_words:
        raise DataError(f"context for {example.qid} is empty after tokenization")

    variants = ["standard", "extended"] if mode == "pooled" else [mode]
    word_outputs = []
    for variant in variants:
        q_tok = _tokenize_for(variant, q_words, vocab, added)
        c_tok = _tokenize_for(variant, c_words, vocab, added)
        plan = plan_windows(len(q_tok.ids), len(c_tok.ids))
        per_step = [
            np.asarray(encoder(assemble_window_input(
                q_tok.ids, c_tok.ids, plan, n, vocab.cls_id, vocab.sep_id)))
            for n in range(1, plan.n_steps + 1)
        ]
        h = concat_active(per_step, plan)
        word_outputs.append(word_level_logits(h, c_tok.word_spans))
    o = word_outputs[0] if len(word_outputs) == 1 else pool_dual(*word_outputs)
    return decode_span(o[:, 0], o[:, 1], c_words)


def emit_window_inputs(examples: Sequence[QAExample], vocab: WordpieceVocab,
                       added: dict[str, int], mode: str,
                       basic_config: BasicTokenizerConfig | None = None) -> list[dict]:
    """Materialize every encoder call as {qid, tokenizer, step, ids, key}.

    External model runners compute logits for each record and store them in an
    .npz keyed by `key`; MockEncoder then replays them for `infer_example`.
    """
    from .encoders import logits_key

    if mode not in QA_MODES:
        raise DataError(f"unknown QA mode {mode!r} (expected one of {QA_MODES})")
    basic_config = basic_config or BasicTokenizerConfig()
    records = []
    variants = ["standard", "extended"] if mode == "pooled" else [mode]
    for example in examples:
        q_words = basic_tokenize(example.question, basic_config)
        c_words = basic_tokenize(example.context, basic_config)
        if not q_words or not c_words:
            raise DataError(f"question or context empty for {example.qid}")
        for variant in variants:
            q_tok = _tokenize_for(variant, q_words, vocab, added)
            c_tok = _tokenize_for(variant, c_words, vocab, added)
            plan = plan_windows(len(q_tok.ids), len(c_tok.ids))
            for n in range(1, plan.n_steps + 1):
                ids = assemble_window_input(
                    q_tok.ids, c_tok.ids, plan, n, vocab.cls_id, vocab.sep_id)
                records.append({
                    "qid": example.qid,
                    "tokenizer": variant,
                    "step": n,
                    "ids": ids,
                    "key": logits_key(ids),
                })
    return records


def infer_dataset(examples: Sequence[QAExample], encoder: Callable,
                  vocab: WordpieceVocab, added: dict[str, int], mode: str,
                  basic_config: BasicTokenizerConfig | None = None) -> dict[str, str]:
    """Predictions mapping question id -> answer text."""
    return {
        ex.qid: infer_example(ex, encoder, vocab, added, mode, basic_config).text
        for ex in examples
    }
