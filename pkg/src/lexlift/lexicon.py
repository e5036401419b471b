"""Extending the LM's embedding table with aligned word vectors.

The updated lookup keeps every base wordpiece row bit-identical and appends
one row per word-vocab token not already present as a whole word: the mapped
vector W @ E_W2V(x), or a fresh random row under the random-map ablation.
Export writes a directory of (vocab.txt, embeddings.bin, manifest.json) with
checksums; import verifies them and reconstructs an equal lexicon.
"""

from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass, field

import numpy as np

from .align import LinearMap, apply_map
from .errors import DataError, FormatError
from .io_formats import read_matrix, sha256_file, write_matrix, write_vocab_file
from .word2vec import EmbeddingTable, Vocab
from .wordpiece import WordpieceVocab

log = logging.getLogger(__name__)

VOCAB_FILE = "vocab.txt"
EMBED_FILE = "embeddings.bin"
MANIFEST_FILE = "manifest.json"

RANDOM_INIT_STD = 0.02


@dataclass
class ExtendedModelLexicon:
    base_vocab: WordpieceVocab
    added_tokens: list[str]
    table: EmbeddingTable
    provenance: list[str]  # per added token: "aligned" | "random"
    map_kind: str = "least_squares"
    added_ids: dict[str, int] = field(init=False, repr=False)

    def __post_init__(self):
        n_base = len(self.base_vocab)
        if len(self.table) != n_base + len(self.added_tokens):
            raise DataError(
                f"table has {len(self.table)} rows, expected "
                f"{n_base} base + {len(self.added_tokens)} added"
            )
        if len(self.provenance) != len(self.added_tokens):
            raise DataError("provenance length does not match added token count")
        self.added_ids = {t: n_base + i for i, t in enumerate(self.added_tokens)}

    @property
    def n_base(self) -> int:
        return len(self.base_vocab)

    @property
    def n_added(self) -> int:
        return len(self.added_tokens)

    @property
    def d_lm(self) -> int:
        return self.table.dim

    def all_tokens(self) -> list[str]:
        return self.base_vocab.tokens + self.added_tokens

    def __eq__(self, other) -> bool:
        if not isinstance(other, ExtendedModelLexicon):
            return NotImplemented
        return (
            self.base_vocab.tokens == other.base_vocab.tokens
            and self.added_tokens == other.added_tokens
            and self.provenance == other.provenance
            and self.map_kind == other.map_kind
            and self.table.matrix.shape == other.table.matrix.shape
            and np.array_equal(
                self.table.matrix.view(np.uint32), other.table.matrix.view(np.uint32)
            )
        )


def extend_embeddings(base_table: EmbeddingTable, base_vocab: WordpieceVocab,
                      w2v_table: EmbeddingTable, w2v_vocab: Vocab,
                      linear_map: LinearMap, seed: int = 0) -> ExtendedModelLexicon:
    """Append rows for word-vocab tokens absent from the base vocabulary.

    Base rows are carried over untouched. Added rows are W @ v computed in
    float64 and stored as float32; under a random-kind map they are instead
    drawn i.i.d. normal(0, 0.02) from `seed`. Tokens already present as whole
    words are skipped (the base id keeps serving them).
    """
    if len(base_table) != len(base_vocab):
        raise DataError(
            f"base table rows ({len(base_table)}) != base vocab size ({len(base_vocab)})"
        )
    if len(w2v_table) != len(w2v_vocab):
        raise DataError(
            f"word-vector rows ({len(w2v_table)}) != word vocab size ({len(w2v_vocab)})"
        )
    if linear_map.d_lm != base_table.dim:
        raise DataError(
            f"map outputs dim {linear_map.d_lm}, base table has dim {base_table.dim}"
        )
    if linear_map.d_w2v != w2v_table.dim:
        raise DataError(
            f"map expects dim {linear_map.d_w2v}, word vectors have dim {w2v_table.dim}"
        )

    added: list[str] = []
    added_rows: list[np.ndarray] = []
    random_init = linear_map.kind == "random"
    rng = np.random.default_rng(seed) if random_init else None
    for i, tok in enumerate(w2v_vocab.tokens):
        if tok in base_vocab.id_of:
            log.debug("skipping %r: already a whole-word vocab entry", tok)
            continue
        added.append(tok)
        if random_init:
            added_rows.append(rng.normal(0.0, RANDOM_INIT_STD, size=base_table.dim))
        else:
            added_rows.append(apply_map(linear_map, w2v_table.matrix[i].astype(np.float64)))

    if added:
        new_block = np.stack(added_rows).astype(np.float32)
        matrix = np.concatenate([base_table.matrix, new_block], axis=0)
    else:
        matrix = base_table.matrix.copy()
    provenance = ["random" if random_init else "aligned"] * len(added)
    return ExtendedModelLexicon(
        base_vocab=base_vocab,
        added_tokens=added,
        table=EmbeddingTable(matrix),
        provenance=provenance,
        map_kind=linear_map.kind,
    )


def export_lexicon(lexicon: ExtendedModelLexicon, out_dir: str) -> dict:
    """Write vocab.txt, embeddings.bin, and manifest.json; returns the manifest.

    Each file is written atomically and the manifest last, so an interrupted
    export never yields an importable directory.
    """
    os.makedirs(out_dir, exist_ok=True)
    vocab_path = os.path.join(out_dir, VOCAB_FILE)
    embed_path = os.path.join(out_dir, EMBED_FILE)
    manifest_path = os.path.join(out_dir, MANIFEST_FILE)

    write_vocab_file(vocab_path, lexicon.all_tokens())
    write_matrix(embed_path, lexicon.table.matrix)
    manifest = {
        "d_lm": lexicon.d_lm,
        "n_base": lexicon.n_base,
        "n_added": lexicon.n_added,
        "map_kind": lexicon.map_kind,
        "provenance": lexicon.provenance,
        "sha256": {
            VOCAB_FILE: sha256_file(vocab_path),
            EMBED_FILE: sha256_file(embed_path),
        },
    }
    tmp = manifest_path + ".tmp"
    try:
        with open(tmp, "w", encoding="utf-8") as f:
            json.dump(manifest, f, indent=2)
            f.write("\n")
        os.replace(tmp, manifest_path)
    finally:
        if os.path.exists(tmp):
            os.unlink(tmp)
    return manifest


def read_manifest(in_dir: str) -> dict:
    manifest_path = os.path.join(in_dir, MANIFEST_FILE)
    if not os.path.exists(manifest_path):
        raise FormatError(f"no {MANIFEST_FILE} in {in_dir}; not an exported lexicon")
    with open(manifest_path, encoding="utf-8") as f:
        try:
            return json.load(f)
        except json.JSONDecodeError as e:
            raise FormatError(f"unparseable manifest in {in_dir}: {e}")


def verify_checksums(in_dir: str, manifest: dict) -> None:
    for name, expected in manifest.get("sha256", {}).items():
        path = os.path.join(in_dir, name)
        if not os.path.exists(path):
            raise FormatError(f"lexicon file missing: {name}")
        actual = sha256_file(path)
        if actual != expected:
            raise FormatError(
                f"checksum mismatch for {name}: manifest says {expected[:12]}..., "
                f"file hashes to {actual[:12]}..."
            )


def load_added_tokens(in_dir: str) -> tuple[WordpieceVocab, dict[str, int]]:
    """Base vocab plus {added token: extended id}, without reading embeddings.

    Enough for tokenizer work; verifies only the vocab file's checksum.
    """
    manifest = read_manifest(in_dir)
    vocab_path = os.path.join(in_dir, VOCAB_FILE)
    expected = manifest.get("sha256", {}).get(VOCAB_FILE)
    if expected is not None and sha256_file(vocab_path) != expected:
        raise FormatError(f"checksum mismatch for {VOCAB_FILE} in {in_dir}")
    with open(vocab_path, encoding="utf-8") as f:
        tokens = f.read().split("\n")
    if tokens and tokens[-1] == "":
        tokens.pop()
    n_base = int(manifest["n_base"])
    base = WordpieceVocab(tokens[:n_base])
    added = {tok: n_base + i for i, tok in enumerate(tokens[n_base:])}
    return base, added


def import_lexicon(in_dir: str) -> ExtendedModelLexicon:
    """Reconstruct a lexicon, verifying checksums, header, and dimensions."""
    manifest = read_manifest(in_dir)
    for key in ("d_lm", "n_base", "n_added", "map_kind", "sha256"):
        if key not in manifest:
            raise FormatError(f"manifest missing required key {key!r}")
    verify_checksums(in_dir, manifest)

    with open(os.path.join(in_dir, VOCAB_FILE), encoding="utf-8") as f:
        tokens = f.read().split("\n")
    if tokens and tokens[-1] == "":
        tokens.pop()
    n_base, n_added = int(manifest["n_base"]), int(manifest["n_added"])
    if len(tokens) != n_base + n_added:
        raise FormatError(
            f"vocab.txt has {len(tokens)} lines, manifest says {n_base}+{n_added}"
        )

    matrix = read_matrix(os.path.join(in_dir, EMBED_FILE))
    if matrix.shape[0] != n_base + n_added:
        raise FormatError(
            f"embeddings.bin has {matrix.shape[0]} rows, manifest says {n_base + n_added}"
        )
    if matrix.shape[1] != int(manifest["d_lm"]):
        raise FormatError(
            f"embeddings.bin dim {matrix.shape[1]} disagrees with manifest d_lm "
            f"{manifest['d_lm']}"
        )

    provenance = manifest.get("provenance")
    if provenance is None:
        provenance = ["random" if manifest["map_kind"] == "random" else "aligned"] * n_added
    if len(provenance) != n_added:
        raise FormatError("manifest provenance length does not match n_added")

    return ExtendedModelLexicon(
        base_vocab=WordpieceVocab(tokens[:n_base]),
        added_tokens=tokens[n_base:],
        table=EmbeddingTable(matrix),
        provenance=list(provenance),
        map_kind=str(manifest["map_kind"]),
    )
