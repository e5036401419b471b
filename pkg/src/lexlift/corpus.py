"""Corpus streaming and the rule-based word tokenizer applied before wordpieces.

The tokenizer mirrors the standard BERT "basic" tokenizer: control characters
are removed, CJK ideographs are isolated, text is split on whitespace, every
punctuation character becomes its own token, and lowercasing optionally
strips accents.
"""

from __future__ import annotations

import glob
import gzip
import os
import unicodedata
from dataclasses import dataclass, field
from typing import Iterable, Iterator

from .errors import ConfigError


@dataclass(frozen=True)
class BasicTokenizerConfig:
    lower_case: bool = False
    # None follows lower_case, mirroring the reference tokenizer.
    strip_accents: bool | None = None
    isolate_cjk: bool = True

    @property
    def strips_accents(self) -> bool:
        if self.strip_accents is None:
            return self.lower_case
        return self.strip_accents or self.lower_case


@dataclass(frozen=True)
class CorpusSource:
    """Pre-extracted plain text, one document or sentence per line."""

    paths: tuple[str, ...]
    format: str = "auto"  # auto | plain-lines | gzip-lines

    def __post_init__(self):
        if self.format not in ("auto", "plain-lines", "gzip-lines"):
            raise ConfigError(f"unknown corpus format: {self.format}")
        if not self.paths:
            raise ConfigError("corpus source has no input paths")
        for path in self.paths:
            if not os.path.isfile(path):
                raise ConfigError(f"corpus file does not exist: {path}")
            if not os.access(path, os.R_OK):
                raise ConfigError(f"corpus file is not readable: {path}")

    @classmethod
    def from_patterns(cls, patterns: Iterable[str], format: str = "auto") -> "CorpusSource":
        paths: list[str] = []
        for pat in patterns:
            hits = sorted(glob.glob(pat))
            if not hits:
                raise ConfigError(f"corpus input matched no files: {pat}")
            paths.extend(hits)
        return cls(paths=tuple(paths), format=format)

    def _opener(self, path: str):
        fmt = self.format
        if fmt == "auto":
            fmt = "gzip-lines" if path.endswith(".gz") else "plain-lines"
        if fmt == "gzip-lines":
            return gzip.open(path, "rt", encoding="utf-8")
        return open(path, encoding="utf-8")


def stream_sentences(source: CorpusSource) -> Iterator[str]:
    """Yield non-empty lines of every source file, in file order."""
    for path in source.paths:
        with source._opener(path) as fh:
            for line in fh:
                line = line.rstrip("\n").rstrip("\r")
                if line.strip():
                    yield line


def _is_whitespace(ch: str) -> bool:
    if ch in (" ", "\t", "\n", "\r"):
        return True
    return unicodedata.category(ch) == "Zs"


def _is_control(ch: str) -> bool:
    if ch in ("\t", "\n", "\r"):
        return False
    return unicodedata.category(ch).startswith("C")


def _is_punctuation(ch: str) -> bool:
    cp = ord(ch)
    # ASCII symbol ranges count as punctuation even when Unicode disagrees
    # ($, +, ~, ...), matching the reference splitting rules.
    if 33 <= cp <= 47 or 58 <= cp <= 64 or 91 <= cp <= 96 or 123 <= cp <= 126:
        return True
    return unicodedata.category(ch).startswith("P")


def _is_cjk(cp: int) -> bool:
    return (
        0x4E00 <= cp <= 0x9FFF
        or 0x3400 <= cp <= 0x4DBF
        or 0x20000 <= cp <= 0x2A6DF
        or 0x2A700 <= cp <= 0x2B73F
        or 0x2B740 <= cp <= 0x2B81F
        or 0x2B820 <= cp <= 0x2CEAF
        or 0xF900 <= cp <= 0xFAFF
        or 0x2F800 <= cp <= 0x2FA1F
    )


def _clean_text(text: str) -> str:
    out = []
    for ch in text:
        cp = ord(ch)
        if cp == 0 or cp == 0xFFFD or _is_control(ch):
            continue
        out.append(" " if _is_whitespace(ch) else ch)
    return "".join(out)


def _strip_accents(token: str) -> str:
    return "".join(
        ch for ch in unicodedata.normalize("NFD", token)
        if unicodedata.category(ch) != "Mn"
    )


def _split_punctuation(token: str) -> list[str]:
    pieces: list[str] = []
    current: list[str] = []
    for ch in token:
        if _is_punctuation(ch):
            if current:
                pieces.append("".join(current))
                current = []
            pieces.append(ch)
        else:
            current.append(ch)
    if current:
        pieces.append("".join(current))
    return pieces


def basic_tokenize(text: str, config: BasicTokenizerConfig | None = None) -> list[str]:
    """Split text into words, isolating punctuation characters."""
    config = config or BasicTokenizerConfig()
    text = _clean_text(text)
    if config.isolate_cjk:
        padded = []
        for ch in text:
            if _is_cjk(ord(ch)):
                padded.append(f" {ch} ")
            else:
                padded.append(ch)
        text = "".join(padded)
    words: list[str] = []
    for token in text.split():
        if config.lower_case:
            token = token.lower()
        if config.strips_accents:
            token = _strip_accents(token)
        words.extend(_split_punctuation(token))
    return words


@dataclass
class IngestStats:
    lines_read: int = 0
    lines_written: int = 0
    tokens: int = 0
    out_path: str = ""
    files: list[str] = field(default_factory=list)


def run_ingest(source: CorpusSource, config: BasicTokenizerConfig, out_path: str) -> IngestStats:
    """Tokenize every corpus line and write one space-joined line per input line."""
    stats = IngestStats(out_path=out_path, files=list(source.paths))
    tmp = f"{out_path}.tmp.{os.getpid()}"
    try:
        with open(tmp, "w", encoding="utf-8") as out:
            for line in stream_sentences(source):
                stats.lines_read += 1
                words = basic_tokenize(line, config)
                if not words:
                    continue
                out.write(" ".join(words))
                out.write("\n")
                stats.lines_written += 1
                stats.tokens += len(words)
        os.replace(tmp, out_path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return stats


def stream_token_lines(path: str) -> Iterator[list[str]]:
    """Yield token lists from a whitespace-tokenized file (one line per context)."""
    if not os.path.isfile(path):
        raise ConfigError(f"token file does not exist: {path}")
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            words = line.split()
            if words:
                yield words
