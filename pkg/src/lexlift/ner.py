"""NER preprocessing: CoNLL reading, BIO validation, chunking, and encoding.

Sentences are split into chunks of at most 30 whitespace words without
splitting inside labeled spans, then rendered as [CLS] pieces [SEP] with the
word's B/I/O label on its word-initial piece and the ignore label everywhere
else.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterator, Sequence

from .errors import DataError
from .wordpiece import TokenizationResult, WordpieceVocab, tokenize_extended, tokenize_standard

IGNORE_LABEL_ID = -100
MAX_CHUNK_WORDS = 30
OUTSIDE = "O"


@dataclass
class LabeledSentence:
    words: list[str]
    labels: list[str]

    def __post_init__(self):
        if len(self.words) != len(self.labels):
            raise DataError(
                f"{len(self.words)} words but {len(self.labels)} labels"
            )
        validate_bio(self.labels)

    def __len__(self) -> int:
        return len(self.words)


def _split_label(label: str) -> tuple[str, str]:
    if label == OUTSIDE:
        return OUTSIDE, ""
    if len(label) > 2 and label[1] == "-" and label[0] in ("B", "I"):
        return label[0], label[2:]
    raise DataError(f"malformed BIO label {label!r}")


def validate_bio(labels: Sequence[str]) -> None:
    """I-X may only continue a preceding B-X or I-X."""
    prev_tag, prev_type = OUTSIDE, ""
    for i, label in enumerate(labels):
        tag, etype = _split_label(label)
        if tag == "I" and not (prev_tag in ("B", "I") and prev_type == etype):
            raise DataError(
                f"invalid BIO sequence: {label!r} at position {i} follows "
                f"{labels[i - 1] if i else 'sentence start'!r}"
            )
        prev_tag, prev_type = tag, etype


def _span_units(sentence: LabeledSentence) -> list[tuple[int, int]]:
    """Indivisible word ranges: each O word alone, each labeled span whole."""
    units: list[tuple[int, int]] = []
    i = 0
    n = len(sentence)
    while i < n:
        tag, _ = _split_label(sentence.labels[i])
        if tag == "B":
            j = i + 1
            while j < n and _split_label(sentence.labels[j])[0] == "I":
                j += 1
            units.append((i, j))
            i = j
        else:
            units.append((i, i + 1))
            i += 1
    return units


def chunk_sentence(sentence: LabeledSentence, max_words: int = MAX_CHUNK_WORDS) -> list[LabeledSentence]:
    """Greedy left-to-right packing; labeled spans never straddle a boundary."""
    chunks: list[LabeledSentence] = []
    start = end = 0
    for lo, hi in _span_units(sentence):
        if hi - lo > max_words:
            span = " ".join(sentence.words[lo:hi])
            raise DataError(
                f"labeled span of {hi - lo} words exceeds the {max_words}-word "
                f"chunk limit: {span!r}"
            )
        if hi - start > max_words:
            chunks.append(LabeledSentence(sentence.words[start:end], sentence.labels[start:end]))
            start = lo
        end = hi
    if end > start:
        chunks.append(LabeledSentence(sentence.words[start:end], sentence.labels[start:end]))
    return chunks


def build_label_map(sentences: Sequence[LabeledSentence]) -> dict[str, int]:
    """Deterministic label ids: O first, remaining labels sorted."""
    seen = {label for s in sentences for label in s.labels}
    seen.discard(OUTSIDE)
    return {label: i for i, label in enumerate([OUTSIDE] + sorted(seen))}


def encode_ner(chunk: LabeledSentence, tok_result: TokenizationResult,
               vocab: WordpieceVocab, label_map: dict[str, int]) -> tuple[list[int], list[int]]:
    """[CLS] pieces [SEP] with per-piece label ids (ignore off word-initial)."""
    ids = [vocab.cls_id] + list(tok_result.ids) + [vocab.sep_id]
    labels = [IGNORE_LABEL_ID]
    word_idx = -1
    for initial in tok_result.word_initial:
        if initial:
            word_idx += 1
            label = chunk.labels[word_idx]
            if label not in label_map:
                raise DataError(f"label {label!r} missing from the label map")
            labels.append(label_map[label])
        else:
            labels.append(IGNORE_LABEL_ID)
    labels.append(IGNORE_LABEL_ID)
    if word_idx + 1 != len(chunk):
        raise DataError(
            f"tokenization covers {word_idx + 1} words but chunk has {len(chunk)}"
        )
    return ids, labels


def read_conll(path: str) -> list[LabeledSentence]:
    """Two-column (token, tag) file; blank lines separate sentences."""
    sentences: list[LabeledSentence] = []
    words: list[str] = []
    labels: list[str] = []
    with open(path, encoding="utf-8") as f:
        for lineno, raw in enumerate(f, 1):
            line = raw.strip()
            if not line:
                if words:
                    sentences.append(LabeledSentence(words, labels))
                    words, labels = [], []
                continue
            cols = line.split()
            if len(cols) < 2:
                raise DataError(f"{path}:{lineno}: expected 'token tag', got {line!r}")
            words.append(cols[0])
            labels.append(cols[-1])
    if words:
        sentences.append(LabeledSentence(words, labels))
    if not sentences:
        raise DataError(f"{path}: no labeled sentences found")
    return sentences


ENCODE_MODES = ("standard", "extended", "mixture", "both")


def encode_dataset(sentences: Sequence[LabeledSentence], vocab: WordpieceVocab,
                   added: dict[str, int], mode: str,
                   label_map: dict[str, int] | None = None,
                   max_words: int = MAX_CHUNK_WORDS) -> Iterator[dict]:
    """Yield encoded examples as dicts {ids, labels, word_initial, tokenizer}.

    mode: standard | extended | mixture (alternating by example index parity:
    even indices standard, odd extended) | both (two records per chunk).
    """
    if mode not in ENCODE_MODES:
        raise DataError(f"unknown encode mode {mode!r} (expected one of {ENCODE_MODES})")
    if label_map is None:
        label_map = build_label_map(sentences)
    index = 0
    for sentence in sentences:
        for chunk in chunk_sentence(sentence, max_words):
            if mode == "both":
                variants = ["standard", "extended"]
            elif mode == "mixture":
                variants = ["standard" if index % 2 == 0 else "extended"]
            else:
                variants = [mode]
            for variant in variants:
                if variant == "standard":
                    tok = tokenize_standard(chunk.words, vocab)
                else:
                    tok = tokenize_extended(chunk.words, vocab, added)
                ids, labels = encode_ner(chunk, tok, vocab, label_map)
                word_initial = [False] + list(tok.word_initial) + [False]
                yield {
                    "ids": ids,
                    "labels": labels,
                    "word_initial": word_initial,
                    "tokenizer": variant,
                }
            index += 1


def write_jsonl(records: Iterator[dict], path: str) -> int:
    n = 0
    with open(path, "w", encoding="utf-8") as f:
        for rec in records:
            f.write(json.dumps(rec, ensure_ascii=False))
            f.write("\n")
            n += 1
    return n


def write_label_map(label_map: dict[str, int], path: str) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(label_map, f, indent=2, ensure_ascii=False)
        f.write("\n")
