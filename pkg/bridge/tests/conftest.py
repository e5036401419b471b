"""Fixtures: tiny local checkpoints plus a lexicon exported by the real CLI.

Everything the bridge consumes is produced the way a user would produce it:
the lexicon directory comes out of `lexlift ingest / train-w2v / align /
extend` subprocess calls, and the checkpoints are one-layer BERT models
whose word-embedding matrix doubles as the LM lexicon fed to the aligner, so
the exported base rows really are the checkpoint's own vectors.
"""

from __future__ import annotations

import json
import string
import subprocess

import numpy as np
import pytest
import torch
import transformers
from transformers import BertConfig, BertForQuestionAnswering

transformers.logging.set_verbosity_error()
transformers.logging.disable_progress_bar()

HIDDEN = 16

KNOWN = [
    "the", "of", "and", "in", "was", "is", "for", "with", "patient",
    "patients", "study", "disease", "hospital", "clinical", "severe",
    "acute", "fever", "virus", "infection",
]
NOVEL = ["dementia", "euthymia", "sepsis"]


def vocab_tokens() -> list[str]:
    tokens = ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"]
    seen = set(tokens)
    for tok in (
        KNOWN
        + list(string.ascii_lowercase)
        + list(string.digits)
        + [".", ",", "%"]
        + ["##" + c for c in string.ascii_lowercase + string.digits]
    ):
        if tok not in seen:
            seen.add(tok)
            tokens.append(tok)
    return tokens


def run_lexlift(*args: str) -> str:
    proc = subprocess.run(["lexlift", *args], capture_output=True, text=True)
    assert proc.returncode == 0, f"lexlift {args[0]}: {proc.stderr or proc.stdout}"
    return proc.stdout


@pytest.fixture(scope="session")
def workspace(tmp_path_factory):
    """Checkpoints, corpus, and the CLI-built lexicon, in one directory."""
    ws = tmp_path_factory.mktemp("bridge-ws")
    tokens = vocab_tokens()

    config = BertConfig(
        vocab_size=len(tokens),
        hidden_size=HIDDEN,
        num_hidden_layers=1,
        num_attention_heads=2,
        intermediate_size=32,
        max_position_embeddings=512,
        type_vocab_size=2,
    )
    torch.manual_seed(7)
    qa_model = BertForQuestionAnswering(config)
    qa_model.save_pretrained(ws / "ckpt_qa")
    qa_model.bert.save_pretrained(ws / "ckpt_base")

    # The aligner's LM inputs are the checkpoint's own embedding matrix.
    from lexlift.io_formats import write_matrix

    lm_matrix = (
        qa_model.bert.embeddings.word_embeddings.weight.detach().numpy()
    ).astype(np.float32)
    write_matrix(str(ws / "lm.vecs"), lm_matrix)
    (ws / "lm_vocab.txt").write_text("\n".join(tokens) + "\n")

    rng = np.random.default_rng(5)
    lines = []
    for _ in range(150):
        words = [str(w) for w in rng.choice(KNOWN, size=8)]
        words += [str(w) for w in rng.choice(NOVEL, size=2)]
        rng.shuffle(words)
        lines.append(" ".join(words))
    (ws / "corpus.txt").write_text("\n".join(lines) + "\n")

    run_lexlift("ingest", "--input", str(ws / "corpus.txt"),
                "--out", str(ws / "tokens.txt"))
    run_lexlift("train-w2v", "--tokens", str(ws / "tokens.txt"),
                "--dim", str(HIDDEN), "--out", str(ws / "w2v.vecs"),
                "--epochs", "1", "--min-count", "1", "--window", "3",
                "--negatives", "3", "--seed", "2")
    run_lexlift("align", "--w2v", str(ws / "w2v.vecs"),
                "--lm-embed", str(ws / "lm.vecs"),
                "--lm-vocab", str(ws / "lm_vocab.txt"),
                "--out", str(ws / "map.bin"))
    run_lexlift("extend", "--lm-embed", str(ws / "lm.vecs"),
                "--lm-vocab", str(ws / "lm_vocab.txt"),
                "--w2v", str(ws / "w2v.vecs"), "--map", str(ws / "map.bin"),
                "--out", str(ws / "lexicon"))

    manifest = json.loads((ws / "lexicon" / "manifest.json").read_text())
    assert manifest["n_added"] == len(NOVEL)
    assert manifest["n_base"] == len(tokens)
    return ws


@pytest.fixture(scope="session")
def lexicon_dir(workspace) -> str:
    return str(workspace / "lexicon")


@pytest.fixture(scope="session")
def qa_checkpoint(workspace) -> str:
    return str(workspace / "ckpt_qa")


@pytest.fixture(scope="session")
def base_checkpoint(workspace) -> str:
    return str(workspace / "ckpt_base")


@pytest.fixture(scope="session")
def zero_added_lexicon(workspace, tmp_path_factory) -> str:
    """An export with no added tokens, fabricated with the producing toolkit."""
    from lexlift.io_formats import read_matrix
    from lexlift.lexicon import ExtendedModelLexicon, export_lexicon
    from lexlift.word2vec import EmbeddingTable
    from lexlift.wordpiece import WordpieceVocab

    out = tmp_path_factory.mktemp("zero-added") / "lexicon"
    lexicon = ExtendedModelLexicon(
        base_vocab=WordpieceVocab.load(str(workspace / "lm_vocab.txt")),
        added_tokens=[],
        table=EmbeddingTable(read_matrix(str(workspace / "lm.vecs"))),
        provenance=[],
        map_kind="least_squares",
    )
    export_lexicon(lexicon, str(out))
    return str(out)


@pytest.fixture(scope="session")
def patched_qa(workspace, qa_checkpoint, lexicon_dir) -> str:
    from lexlift_bridge.patch import patch_checkpoint

    out = workspace / "patched_qa"
    patch_checkpoint(qa_checkpoint, lexicon_dir, str(out))
    return str(out)


@pytest.fixture(scope="session")
def qa_dataset(workspace) -> str:
    """Four questions over two contexts; one context long enough to window."""
    rng = np.random.default_rng(23)
    short_ctx = (
        "the patient was in hospital with severe fever and dementia "
        "the study of sepsis and euthymia was clinical and acute "
        "infection of the virus was severe in the patient"
    )
    long_words = [str(w) for w in rng.choice(KNOWN + NOVEL, size=600)]
    long_words[307:309] = ["severe", "sepsis"]
    long_ctx = " ".join(long_words)
    payload = {
        "version": "bridge-fixture",
        "data": [{
            "title": "toy",
            "paragraphs": [
                {
                    "context": short_ctx,
                    "qas": [
                        {"id": "q1", "question": "what was severe",
                         "answers": [{"text": "severe fever and dementia"}]},
                        {"id": "q2", "question": "what kind of study was it",
                         "answers": [{"text": "clinical"},
                                     {"text": "clinical and acute"}]},
                    ],
                },
                {
                    "context": long_ctx,
                    "qas": [
                        {"id": "q3", "question": "what was the sepsis like",
                         "answers": [{"text": "severe sepsis"}]},
                        {"id": "q4", "question": "what did the patient have",
                         "answers": [{"text": "fever"}]},
                    ],
                },
            ],
        }],
    }
    path = workspace / "qa.json"
    path.write_text(json.dumps(payload, indent=2) + "\n")
    return str(path)


@pytest.fixture(scope="session")
def ner_encoded(workspace):
    """Toy CoNLL splits encoded by the real CLI (50/50 tokenizer mixture)."""
    rng = np.random.default_rng(11)

    def synth(n_sentences: int) -> str:
        out = []
        for _ in range(n_sentences):
            for _ in range(8):
                if rng.random() < 0.25:
                    out.append(f"{rng.choice(NOVEL)} B-DIS")
                else:
                    out.append(f"{rng.choice(KNOWN)} O")
            out.append("")
        return "\n".join(out) + "\n"

    (workspace / "train.conll").write_text(synth(50))
    (workspace / "dev.conll").write_text(synth(12))
    for split in ("train", "dev"):
        run_lexlift("encode-ner", "--conll", str(workspace / f"{split}.conll"),
                    "--vocab", str(workspace / "lm_vocab.txt"),
                    "--lexicon-dir", str(workspace / "lexicon"),
                    "--mode", "both",
                    "--out", str(workspace / f"{split}.jsonl"),
                    "--labels-out", str(workspace / f"labels_{split}.json"))
    train_labels = (workspace / "labels_train.json").read_text()
    assert train_labels == (workspace / "labels_dev.json").read_text()
    return {
        "train": str(workspace / "train.jsonl"),
        "dev": str(workspace / "dev.jsonl"),
        "labels": str(workspace / "labels_train.json"),
    }
