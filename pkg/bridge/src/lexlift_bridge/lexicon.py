"""Reader for exported lexicon directories (vocab.txt, embeddings.bin, manifest.json).

These parsers are deliberately reimplemented against the documented file
formats rather than imported from the producing package: the files are the
interface, and this module is the proof that they can be consumed from a
clean room. embeddings.bin is a GLEX container — 4-byte magic "GLEX",
little-endian u32 version=1, u64 rows, u64 cols, then float32 row-major
data. vocab.txt is one token per line, line index = id, base rows first.
"""

from __future__ import annotations

import hashlib
import json
import os
import struct
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, FormatError

VOCAB_FILE = "vocab.txt"
EMBED_FILE = "embeddings.bin"
MANIFEST_FILE = "manifest.json"

GLEX_MAGIC = b"GLEX"
GLEX_VERSION = 1
_HEADER = struct.Struct("<4sIQQ")


def sha256_file(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for block in iter(lambda: f.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def read_glex(path: str) -> np.ndarray:
    """Read a GLEX matrix file into a float32 array."""
    if not os.path.exists(path):
        raise ConfigError(f"matrix file does not exist: {path}")
    with open(path, "rb") as f:
        head = f.read(_HEADER.size)
        if len(head) < _HEADER.size:
            raise FormatError(f"{path}: truncated GLEX header")
        magic, version, rows, cols = _HEADER.unpack(head)
        if magic != GLEX_MAGIC:
            raise FormatError(f"{path}: bad magic {magic!r}, expected {GLEX_MAGIC!r}")
        if version != GLEX_VERSION:
            raise FormatError(f"{path}: unsupported GLEX version {version}")
        data = np.fromfile(f, dtype="<f4", count=rows * cols)
    if data.size != rows * cols:
        raise FormatError(
            f"{path}: expected {rows * cols} float32 values, got {data.size}"
        )
    return data.reshape(rows, cols)


@dataclass
class ExportedLexicon:
    """In-memory view of one exported lexicon directory."""

    tokens: list[str]           # base tokens first, then added, id = index
    embeddings: np.ndarray      # float32, (n_base + n_added, d_lm)
    n_base: int
    n_added: int
    d_lm: int
    map_kind: str
    manifest: dict

    @property
    def base_tokens(self) -> list[str]:
        return self.tokens[: self.n_base]

    @property
    def added_tokens(self) -> list[str]:
        return self.tokens[self.n_base:]

    @property
    def added_rows(self) -> np.ndarray:
        return self.embeddings[self.n_base:]


def load_lexicon(in_dir: str, verify: bool = True) -> ExportedLexicon:
    """Load and cross-check an exported lexicon directory.

    With verify=True (the default) every file named in the manifest's sha256
    table must hash to its recorded value; a directory that fails the gate is
    treated as corrupt and never partially loaded.
    """
    manifest_path = os.path.join(in_dir, MANIFEST_FILE)
    if not os.path.exists(manifest_path):
        raise ConfigError(f"no {MANIFEST_FILE} in {in_dir}; not an exported lexicon")
    with open(manifest_path, encoding="utf-8") as f:
        try:
            manifest = json.load(f)
        except json.JSONDecodeError as e:
            raise FormatError(f"unparseable manifest in {in_dir}: {e}")
    for key in ("d_lm", "n_base", "n_added", "map_kind", "sha256"):
        if key not in manifest:
            raise FormatError(f"manifest missing required key {key!r}")

    if verify:
        for name, expected in manifest["sha256"].items():
            path = os.path.join(in_dir, name)
            if not os.path.exists(path):
                raise FormatError(f"lexicon file missing: {name}")
            actual = sha256_file(path)
            if actual != expected:
                raise FormatError(
                    f"checksum mismatch for {name}: manifest says {expected[:12]}..., "
                    f"file hashes to {actual[:12]}..."
                )

    with open(os.path.join(in_dir, VOCAB_FILE), encoding="utf-8") as f:
        tokens = f.read().split("\n")
    if tokens and tokens[-1] == "":
        tokens.pop()
    n_base = int(manifest["n_base"])
    n_added = int(manifest["n_added"])
    d_lm = int(manifest["d_lm"])
    if len(tokens) != n_base + n_added:
        raise FormatError(
            f"vocab.txt has {len(tokens)} lines, manifest says {n_base}+{n_added}"
        )

    embeddings = read_glex(os.path.join(in_dir, EMBED_FILE))
    if embeddings.shape != (n_base + n_added, d_lm):
        raise FormatError(
            f"embeddings.bin has shape {embeddings.shape}, manifest says "
            f"({n_base + n_added}, {d_lm})"
        )

    return ExportedLexicon(
        tokens=tokens,
        embeddings=embeddings,
        n_base=n_base,
        n_added=n_added,
        d_lm=d_lm,
        map_kind=str(manifest["map_kind"]),
        manifest=manifest,
    )


def write_base_vocab(lexicon: ExportedLexicon, path: str) -> None:
    """Write only the base rows of the vocab, one token per line.

    The core CLI takes the base wordpiece vocab and the lexicon directory as
    separate inputs; this recovers the former from the latter.
    """
    with open(path, "w", encoding="utf-8") as f:
        for tok in lexicon.base_tokens:
            f.write(tok)
            f.write("\n")
