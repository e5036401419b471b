import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lexlift.errors import DataError
from lexlift.ner import (IGNORE_LABEL_ID, LabeledSentence, build_label_map,
                         chunk_sentence, encode_dataset, encode_ner, read_conll,
                         validate_bio, write_jsonl, write_label_map)
from lexlift.wordpiece import tokenize_extended, tokenize_standard


def _sentence(n, spans=()):
    """n words labeled O except B-DIS/I-DIS runs given as (start, length)."""
    labels = ["O"] * n
    for start, length in spans:
        labels[start] = "B-DIS"
        for i in range(start + 1, start + length):
            labels[i] = "I-DIS"
    return LabeledSentence([f"w{i}" for i in range(n)], labels)


# ----------------------------------------------------------------- chunking

def test_short_sentence_single_chunk():
    chunks = chunk_sentence(_sentence(25))
    assert len(chunks) == 1
    assert chunks[0].words == [f"w{i}" for i in range(25)]


def test_plain_sentence_splits_at_thirty():
    chunks = chunk_sentence(_sentence(31))
    assert [len(c) for c in chunks] == [30, 1]


def test_span_never_straddles_a_boundary():
    # 60 words with an entity at words 29..31: the span will not fit at the
    # end of the first chunk, so the chunk breaks early at word 28
    chunks = chunk_sentence(_sentence(60, spans=[(29, 3)]))
    assert [len(c) for c in chunks] == [29, 30, 1]
    assert chunks[1].labels[0] == "B-DIS"
    assert chunks[1].labels[1:3] == ["I-DIS", "I-DIS"]
    for chunk in chunks:
        assert not chunk.labels[0].startswith("I-")


def test_concatenation_reproduces_sentence():
    sent = _sentence(95, spans=[(10, 4), (40, 2), (88, 5)])
    chunks = chunk_sentence(sent)
    rebuilt_words = [w for c in chunks for w in c.words]
    rebuilt_labels = [l for c in chunks for l in c.labels]
    assert rebuilt_words == sent.words
    assert rebuilt_labels == sent.labels
    assert all(len(c) <= 30 for c in chunks)


def test_oversized_span_is_fatal():
    with pytest.raises(DataError, match="w0"):
        chunk_sentence(_sentence(40, spans=[(0, 32)]))


@settings(max_examples=60)
@given(st.integers(1, 120), st.data())
def test_chunking_properties(n, data):
    spans = []
    cursor = 0
    while cursor < n - 1:
        start = data.draw(st.integers(cursor, min(cursor + 10, n - 1)))
        length = data.draw(st.integers(1, min(6, n - start)))
        spans.append((start, length))
        cursor = start + length + 1
    sent = _sentence(n, spans=spans)
    chunks = chunk_sentence(sent)
    assert [w for c in chunks for w in c.words] == sent.words
    assert all(1 <= len(c) <= 30 for c in chunks)
    for c in chunks:
        assert not c.labels[0].startswith("I-")  # spans stay whole


# --------------------------------------------------------------- validation

def test_bio_rules():
    validate_bio(["O", "B-X", "I-X", "B-Y", "O"])
    with pytest.raises(DataError):
        validate_bio(["O", "I-X"])  # I without B
    with pytest.raises(DataError):
        validate_bio(["B-X", "I-Y"])  # type switch inside a span
    with pytest.raises(DataError):
        validate_bio(["Q-X"])


def test_label_map_orders_outside_first():
    sents = [LabeledSentence(["a", "b"], ["B-Z", "O"]),
             LabeledSentence(["c"], ["B-A"])]
    assert build_label_map(sents) == {"O": 0, "B-A": 1, "B-Z": 2}


# ----------------------------------------------------------------- encoding

def test_encode_single_word_entity(wp_vocab):
    chunk = LabeledSentence(["dementia"], ["B-DIS"])
    label_map = {"O": 0, "B-DIS": 1, "I-DIS": 2}
    tok = tokenize_standard(chunk.words, wp_vocab)
    assert tok.pieces == ["dem", "##ent", "##ia"]
    ids, labels = encode_ner(chunk, tok, wp_vocab, label_map)
    assert ids[0] == wp_vocab.cls_id and ids[-1] == wp_vocab.sep_id
    assert ids[1:-1] == list(tok.ids)
    assert labels == [IGNORE_LABEL_ID, 1, IGNORE_LABEL_ID, IGNORE_LABEL_ID,
                      IGNORE_LABEL_ID]


def test_encode_extended_variant_shrinks(wp_vocab):
    chunk = LabeledSentence(["dementia"], ["B-DIS"])
    label_map = {"O": 0, "B-DIS": 1}
    added = {"dementia": len(wp_vocab)}
    tok = tokenize_extended(chunk.words, wp_vocab, added)
    ids, labels = encode_ner(chunk, tok, wp_vocab, label_map)
    assert ids == [wp_vocab.cls_id, len(wp_vocab), wp_vocab.sep_id]
    assert labels == [IGNORE_LABEL_ID, 1, IGNORE_LABEL_ID]


def test_encode_label_count_matches_words(wp_vocab):
    chunk = LabeledSentence(["the", "patient", "was", "stable"],
                            ["O", "O", "O", "O"])
    tok = tokenize_standard(chunk.words, wp_vocab)
    ids, labels = encode_ner(chunk, tok, wp_vocab, {"O": 0})
    assert len(ids) == len(labels)
    assert sum(l != IGNORE_LABEL_ID for l in labels) == 4


def test_encode_missing_label_rejected(wp_vocab):
    chunk = LabeledSentence(["fever"], ["B-SYM"])
    tok = tokenize_standard(chunk.words, wp_vocab)
    with pytest.raises(DataError, match="B-SYM"):
        encode_ner(chunk, tok, wp_vocab, {"O": 0})


# ------------------------------------------------------------------ dataset

@pytest.fixture
def sentences():
    return [
        LabeledSentence(["the", "patient", "has", "dementia"],
                        ["O", "O", "O", "B-DIS"]),
        LabeledSentence(["fever", "and", "virus"],
                        ["B-SYM", "O", "B-DIS"]),
        LabeledSentence(["stable"], ["O"]),
        LabeledSentence(["acute", "disease"], ["B-DIS", "I-DIS"]),
    ]


def test_dataset_modes(wp_vocab, sentences):
    added = {"dementia": len(wp_vocab)}
    std = list(encode_dataset(sentences, wp_vocab, added, "standard"))
    ext = list(encode_dataset(sentences, wp_vocab, added, "extended"))
    mix = list(encode_dataset(sentences, wp_vocab, added, "mixture"))
    both = list(encode_dataset(sentences, wp_vocab, added, "both"))
    assert [r["tokenizer"] for r in std] == ["standard"] * 4
    assert [r["tokenizer"] for r in ext] == ["extended"] * 4
    assert [r["tokenizer"] for r in mix] == ["standard", "extended"] * 2
    assert len(both) == 8
    assert [r["tokenizer"] for r in both] == ["standard", "extended"] * 4
    for r in both:
        assert r["word_initial"][0] is False and r["word_initial"][-1] is False
        assert len(r["word_initial"]) == len(r["ids"]) == len(r["labels"])


def test_dataset_word_label_counts_agree_across_tokenizers(wp_vocab, sentences):
    added = {"dementia": len(wp_vocab), "fever": len(wp_vocab) + 1}
    std = list(encode_dataset(sentences, wp_vocab, added, "standard"))
    ext = list(encode_dataset(sentences, wp_vocab, added, "extended"))
    for a, b in zip(std, ext):
        kept_a = [l for l in a["labels"] if l != IGNORE_LABEL_ID]
        kept_b = [l for l in b["labels"] if l != IGNORE_LABEL_ID]
        assert kept_a == kept_b  # same words, same labels, any tokenizer
        assert sum(a["word_initial"]) == sum(b["word_initial"])
        assert len(b["ids"]) <= len(a["ids"])


def test_dataset_unknown_mode(wp_vocab, sentences):
    with pytest.raises(DataError):
        list(encode_dataset(sentences, wp_vocab, {}, "fancy"))


def test_write_jsonl_and_label_map(tmp_path, wp_vocab, sentences):
    import json

    out = tmp_path / "ner.jsonl"
    n = write_jsonl(encode_dataset(sentences, wp_vocab, {}, "standard"), str(out))
    assert n == 4
    lines = out.read_text().splitlines()
    assert len(lines) == 4
    assert json.loads(lines[0])["tokenizer"] == "standard"

    lm_path = tmp_path / "labels.json"
    write_label_map(build_label_map(sentences), str(lm_path))
    assert json.loads(lm_path.read_text())["O"] == 0


# -------------------------------------------------------------------- conll

def test_read_conll(tmp_path):
    path = tmp_path / "data.conll"
    path.write_text(
        "the O\npatient O\nhas O\ndementia B-DIS\n"
        "\n"
        "fever B-SYM\n"
    )
    sents = read_conll(str(path))
    assert len(sents) == 2
    assert sents[0].words == ["the", "patient", "has", "dementia"]
    assert sents[0].labels == ["O", "O", "O", "B-DIS"]
    assert sents[1].words == ["fever"]


def test_read_conll_extra_columns(tmp_path):
    path = tmp_path / "data.conll"
    path.write_text("Glucose NN B-CHEM\nlevel NN O\n")
    sents = read_conll(str(path))
    assert sents[0].words == ["Glucose", "level"]
    assert sents[0].labels == ["B-CHEM", "O"]


def test_read_conll_bad_line_reports_location(tmp_path):
    path = tmp_path / "data.conll"
    path.write_text("fine O\nbroken\n")
    with pytest.raises(DataError, match="data.conll:2"):
        read_conll(str(path))


def test_read_conll_empty_file(tmp_path):
    path = tmp_path / "empty.conll"
    path.write_text("\n\n")
    with pytest.raises(DataError):
        read_conll(str(path))
