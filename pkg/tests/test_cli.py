import json

import numpy as np
import pytest
from click.testing import CliRunner

from lexlift.cli import main
from lexlift.io_formats import write_matrix

KNOWN = ["the", "of", "and", "in", "was", "patient", "patients", "study",
         "disease", "hospital", "clinical", "severe", "acute", "fever", "virus"]
NOVEL = ["dementia", "euthymia", "sepsis"]


@pytest.fixture(scope="module")
def runner():
    return CliRunner()


@pytest.fixture(scope="module")
def ws(tmp_path_factory, wp_vocab):
    root = tmp_path_factory.mktemp("cli")
    rng = np.random.default_rng(5)
    lines = []
    for _ in range(150):
        words = list(rng.choice(KNOWN, size=8)) + list(rng.choice(NOVEL, size=2))
        rng.shuffle(words)
        lines.append(" ".join(words))
    (root / "corpus.txt").write_text("\n".join(lines) + "\n")
    wp_vocab.save(str(root / "lm_vocab.txt"))
    lm = rng.normal(0, 0.5, size=(len(wp_vocab), 10)).astype(np.float32)
    write_matrix(str(root / "lm.vecs"), lm)
    return root


def _ok(result):
    assert result.exit_code == 0, result.output + getattr(result, "stderr", "")
    return result


def test_version(runner):
    result = _ok(runner.invoke(main, ["--version"]))
    assert "lexlift" in result.output


@pytest.fixture(scope="module")
def chain(runner, ws):
    """Drive the full lexical pipeline through individual CLI commands."""
    out = {}
    out["ingest"] = _ok(runner.invoke(main, [
        "ingest", "--input", str(ws / "corpus.txt"),
        "--out", str(ws / "tokens.txt")]))
    out["train"] = _ok(runner.invoke(main, [
        "train-w2v", "--tokens", str(ws / "tokens.txt"), "--dim", "10",
        "--out", str(ws / "w2v.vecs"), "--epochs", "1", "--min-count", "1",
        "--window", "3", "--negatives", "3", "--seed", "2"]))
    out["align"] = _ok(runner.invoke(main, [
        "align", "--w2v", str(ws / "w2v.vecs"),
        "--lm-embed", str(ws / "lm.vecs"),
        "--lm-vocab", str(ws / "lm_vocab.txt"),
        "--out", str(ws / "map.bin")]))
    out["extend"] = _ok(runner.invoke(main, [
        "extend", "--lm-embed", str(ws / "lm.vecs"),
        "--lm-vocab", str(ws / "lm_vocab.txt"),
        "--w2v", str(ws / "w2v.vecs"), "--map", str(ws / "map.bin"),
        "--out", str(ws / "lexicon")]))
    return out


def test_ingest_output(chain):
    body = json.loads(chain["ingest"].output)
    assert body["lines"] == 150
    assert body["tokens"] == 150 * 10


def test_train_output(chain, ws):
    body = json.loads(chain["train"].output)
    assert body["vocab_size"] == len(KNOWN) + len(NOVEL)
    assert (ws / "w2v.vecs.vocab").exists()  # default --vocab-out


def test_align_output(chain):
    body = json.loads(chain["align"].output)
    assert body["kind"] == "least_squares"
    assert body["n_pairs"] == len(KNOWN)


def test_extend_output(chain, ws):
    body = json.loads(chain["extend"].output)
    assert body["n_added"] == len(NOVEL)
    assert (ws / "lexicon" / "manifest.json").exists()


def test_report_command(runner, ws, chain, tmp_path_factory):
    queries = tmp_path_factory.mktemp("q") / "queries.txt"
    queries.write_text("patient\nfever\n")
    result = _ok(runner.invoke(main, [
        "report", "--map", str(ws / "map.bin"), "--queries", str(queries),
        "--top-k", "2", "--w2v", str(ws / "w2v.vecs"),
        "--lm-embed", str(ws / "lm.vecs"),
        "--lm-vocab", str(ws / "lm_vocab.txt")]))
    body = json.loads(result.output)
    assert body["queries"]["patient"]["status"] == "ok"
    assert len(body["queries"]["fever"]["lm_cross"]) == 2


def test_tokenize_stdin_modes(runner, ws, chain):
    result = _ok(runner.invoke(main, [
        "tokenize", "--vocab", str(ws / "lm_vocab.txt"),
        "--lexicon-dir", str(ws / "lexicon"), "--mode", "both"],
        input="dementia hospital\n\neuthymia\n"))
    lines = result.output.splitlines()
    assert lines[0] == "standard: dem ##ent ##ia hospital"
    assert lines[1] == "extended: dementia hospital"
    assert lines[2] == "standard: e ##uth ##ym ##ia"
    assert lines[3] == "extended: euthymia"


def test_tokenize_extended_vocab_file(runner, ws, chain):
    ext = ws / "ext_vocab.txt"
    base = (ws / "lm_vocab.txt").read_text()
    ext.write_text(base + "dementia\n")
    result = _ok(runner.invoke(main, [
        "tokenize", "--vocab", str(ws / "lm_vocab.txt"),
        "--extended", str(ext), "--mode", "extended"],
        input="dementia\n"))
    assert result.output.splitlines()[0] == "dementia"


def test_encode_ner_command(runner, ws, chain):
    conll = ws / "tags.conll"
    conll.write_text("the O\npatient O\nhad O\ndementia B-DIS\n")
    result = _ok(runner.invoke(main, [
        "encode-ner", "--conll", str(conll),
        "--vocab", str(ws / "lm_vocab.txt"),
        "--lexicon-dir", str(ws / "lexicon"), "--mode", "mixture",
        "--out", str(ws / "ner.jsonl")]))
    body = json.loads(result.output)
    assert body["sentences"] == 1
    assert body["examples"] == 1


def test_qa_infer_and_score_commands(runner, ws, chain):
    dataset = ws / "qa.json"
    dataset.write_text(json.dumps({"data": [{"paragraphs": [{
        "context": "the patient was in hospital with severe fever",
        "qas": [{"id": "q1", "question": "where was the patient",
                 "answers": [{"text": "in hospital"}]}],
    }]}]}))
    infer = _ok(runner.invoke(main, [
        "qa-infer", "--dataset", str(dataset),
        "--vocab", str(ws / "lm_vocab.txt"),
        "--lexicon-dir", str(ws / "lexicon"),
        "--out", str(ws / "preds.json")]))
    assert json.loads(infer.output)["n_questions"] == 1

    score = _ok(runner.invoke(main, [
        "score", "--predictions", str(ws / "preds.json"),
        "--dataset", str(dataset)]))
    metrics = json.loads(score.output)
    assert metrics["n"] == 1
    assert 0.0 <= metrics["f1"] <= 1.0


def test_qa_emit_inputs_command(runner, ws, chain):
    dataset = ws / "qa.json"
    emit = ws / "inputs.jsonl"
    result = _ok(runner.invoke(main, [
        "qa-infer", "--dataset", str(dataset),
        "--vocab", str(ws / "lm_vocab.txt"),
        "--mode", "standard", "--emit-inputs", str(emit)]))
    body = json.loads(result.output)
    assert body["n_inputs"] >= 1
    first = json.loads(emit.read_text().splitlines()[0])
    assert first["qid"] == "q1" and first["step"] == 1


# ------------------------------------------------------------------- errors

def test_missing_vocab_exits_2(runner, ws):
    result = runner.invoke(main, [
        "tokenize", "--vocab", str(ws / "nope_vocab.txt"),
        "--mode", "standard"], input="x\n")
    assert result.exit_code == 2
    assert "does not exist" in result.stderr


def test_missing_corpus_fails(runner, ws):
    result = runner.invoke(main, [
        "ingest", "--input", str(ws / "nope.txt"), "--out", str(ws / "t.txt")])
    assert result.exit_code != 0
    assert "nope.txt" in result.stderr


def test_bad_ablation_choice(runner, ws):
    result = runner.invoke(main, [
        "align", "--w2v", str(ws / "w2v.vecs"),
        "--lm-embed", str(ws / "lm.vecs"),
        "--lm-vocab", str(ws / "lm_vocab.txt"),
        "--out", str(ws / "m.bin"), "--ablation", "bogus"])
    assert result.exit_code == 2


def test_mock_encoder_without_logits_exits_2(runner, ws, chain):
    result = runner.invoke(main, [
        "qa-infer", "--dataset", str(ws / "qa.json"),
        "--vocab", str(ws / "lm_vocab.txt"), "--encoder", "mock"])
    assert result.exit_code == 2
    assert "logits" in result.stderr


def test_pipeline_bad_override(runner):
    result = runner.invoke(main, ["pipeline", "--set", "justakey"])
    assert result.exit_code == 2
    assert "KEY=VALUE" in result.stderr
