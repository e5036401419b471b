"""Greedy wordpiece tokenization and its vocabulary-extended variant.

The standard tokenizer repeatedly takes the longest vocabulary entry matching
a prefix of the remaining word (continuations carry the "##" prefix). The
extended tokenizer additionally treats every admitted corpus word as a single
piece, leaving all other words untouched.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .errors import DataError, FormatError
from .io_formats import read_vocab_file, write_vocab_file

CONTINUATION_PREFIX = "##"
UNK_TOKEN = "[UNK]"
SPECIAL_TOKENS = ("[CLS]", "[SEP]", "[PAD]", "[MASK]")
MAX_WORD_CHARS = 100


@dataclass
class WordpieceVocab:
    """Ordered wordpiece inventory; line index in the vocab file = id."""

    tokens: list[str]
    id_of: dict[str, int] = field(repr=False)

    def __init__(self, tokens: Sequence[str]):
        self.tokens = list(tokens)
        self.id_of = {}
        for i, tok in enumerate(self.tokens):
            if tok in self.id_of:
                raise FormatError(f"duplicate vocab entry {tok!r} at ids {self.id_of[tok]} and {i}")
            self.id_of[tok] = i
        missing = [t for t in (UNK_TOKEN, *SPECIAL_TOKENS) if t not in self.id_of]
        if missing:
            raise FormatError(f"vocab is missing required specials: {missing}")

    def __len__(self) -> int:
        return len(self.tokens)

    def __contains__(self, token: str) -> bool:
        return token in self.id_of

    @property
    def unk_id(self) -> int:
        return self.id_of[UNK_TOKEN]

    @property
    def cls_id(self) -> int:
        return self.id_of["[CLS]"]

    @property
    def sep_id(self) -> int:
        return self.id_of["[SEP]"]

    @property
    def pad_id(self) -> int:
        return self.id_of["[PAD]"]

    @classmethod
    def load(cls, path: str) -> "WordpieceVocab":
        return cls(read_vocab_file(path))

    def save(self, path: str) -> None:
        write_vocab_file(path, self.tokens)


@dataclass
class TokenizationResult:
    """Wordpieces for one word sequence, with the word/piece correspondence."""

    pieces: list[str]
    ids: list[int]
    word_initial: list[bool]
    word_spans: list[tuple[int, int]]  # half-open piece ranges, one per word

    def __post_init__(self):
        if not (len(self.pieces) == len(self.ids) == len(self.word_initial)):
            raise DataError("pieces, ids and word_initial must have equal length")


def wordpiece_tokenize(word: str, vocab: WordpieceVocab, max_chars: int = MAX_WORD_CHARS) -> list[str]:
    """Greedy longest-match-first split of one word; [UNK] when no cover exists."""
    if not word:
        return []
    if len(word) > max_chars:
        return [UNK_TOKEN]
    pieces: list[str] = []
    start = 0
    while start < len(word):
        end = len(word)
        match = None
        while start < end:
            sub = word[start:end]
            if start > 0:
                sub = CONTINUATION_PREFIX + sub
            if sub in vocab:
                match = sub
                break
            end -= 1
        if match is None:
            return [UNK_TOKEN]
        pieces.append(match)
        start = end
    return pieces


def _assemble(per_word: list[list[str]], vocab: WordpieceVocab,
              single_ids: Mapping[int, int] | None = None) -> TokenizationResult:
    pieces: list[str] = []
    ids: list[int] = []
    word_initial: list[bool] = []
    word_spans: list[tuple[int, int]] = []
    for w, wp in enumerate(per_word):
        begin = len(pieces)
        for j, piece in enumerate(wp):
            pieces.append(piece)
            if single_ids is not None and w in single_ids:
                ids.append(single_ids[w])
            else:
                ids.append(vocab.id_of.get(piece, vocab.unk_id))
            word_initial.append(j == 0)
        word_spans.append((begin, len(pieces)))
    return TokenizationResult(pieces=pieces, ids=ids, word_initial=word_initial, word_spans=word_spans)


def tokenize_standard(words: Sequence[str], vocab: WordpieceVocab) -> TokenizationResult:
    """Concatenate per-word greedy tokenizations."""
    return _assemble([wordpiece_tokenize(w, vocab) for w in words], vocab)


def tokenize_extended(words: Sequence[str], vocab: WordpieceVocab,
                      added: Mapping[str, int]) -> TokenizationResult:
    """Like tokenize_standard, but admitted words become single pieces.

    `added` maps admitted corpus words to their extended ids (continuing after
    the base vocab). Words already in the base vocab keep their base id; added
    tokens are matched at whole-word granularity only.
    """
    per_word: list[list[str]] = []
    single_ids: dict[int, int] = {}
    for w, word in enumerate(words):
        if word in vocab.id_of:
            per_word.append([word])
            single_ids[w] = vocab.id_of[word]
        elif word in added:
            per_word.append([word])
            single_ids[w] = added[word]
        else:
            per_word.append(wordpiece_tokenize(word, vocab))
    return _assemble(per_word, vocab, single_ids)


def detokenize(pieces: Sequence[str]) -> str:
    """Recover the original word from one word's pieces ("##" stripped)."""
    if UNK_TOKEN in pieces:
        raise DataError("cannot detokenize a sequence containing [UNK]")
    out = []
    for piece in pieces:
        if piece.startswith(CONTINUATION_PREFIX):
            out.append(piece[len(CONTINUATION_PREFIX):])
        else:
            out.append(piece)
    return "".join(out)
