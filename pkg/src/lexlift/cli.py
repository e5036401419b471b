"""Command-line interface: a thin client of the HTTP service.

By default each invocation mounts the service in-process and talks to it over
ASGI; pass --server (or set LEXLIFT_SERVER) to target a running instance
instead. Exit codes: 0 success, 1 runtime failure, 2 configuration error.
"""

from __future__ import annotations

import json
import sys

import click

from . import __version__


class ServiceClient:
    """POSTs to the service and maps error payloads to process exit codes."""

    def __init__(self, server: str | None):
        if server:
            import httpx

            self._client = httpx.Client(base_url=server.rstrip("/"), timeout=None)
        else:
            import warnings

            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                from starlette.testclient import TestClient

            from .service import create_app

            self._client = TestClient(create_app(), raise_server_exceptions=False)

    def post(self, path: str, payload: dict) -> dict:
        resp = self._client.post(path, json=payload)
        if resp.status_code >= 400:
            try:
                body = resp.json()
            except ValueError:
                body = {"detail": resp.text}
            detail = body.get("detail", "request failed")
            if isinstance(detail, list):  # pydantic validation errors
                detail = "; ".join(
                    f"{'.'.join(str(p) for p in e.get('loc', []))}: {e.get('msg')}"
                    for e in detail
                )
                click.echo(f"error: {detail}", err=True)
                sys.exit(2)
            click.echo(f"error: {detail}", err=True)
            sys.exit(int(body.get("exit_code", 1)))
        return resp.json()

    def get(self, path: str) -> dict:
        resp = self._client.get(path)
        if resp.status_code >= 400:
            click.echo(f"error: GET {path} -> {resp.status_code}", err=True)
            sys.exit(1)
        return resp.json()


def _emit(payload: dict) -> None:
    click.echo(json.dumps(payload, indent=2, ensure_ascii=False))


@click.group()
@click.version_option(__version__, prog_name="lexlift")
@click.option("--server", envvar="LEXLIFT_SERVER", default=None, metavar="URL",
              help="Base URL of a running service; default runs in-process.")
@click.pass_context
def main(ctx, server):
    """Domain-adapt a pretrained LM's lexical layer with corpus word vectors."""
    ctx.obj = ServiceClient(server)


@main.command()
@click.option("--input", "input_", required=True, metavar="GLOB",
              help="Input file, glob, or comma-separated list (.txt or .gz).")
@click.option("--out", required=True, type=click.Path(), help="Tokenized output file.")
@click.option("--format", "format_", default="auto",
              type=click.Choice(["auto", "plain-lines", "gzip-lines"]))
@click.option("--lower-case", is_flag=True, default=False,
              help="Lowercase and strip accents (uncased models).")
@click.pass_obj
def ingest(client, input_, out, format_, lower_case):
    """Clean and whitespace/punctuation-tokenize a raw corpus."""
    patterns = [p.strip() for p in input_.split(",") if p.strip()]
    _emit(client.post("/v1/ingest", {
        "corpus": patterns, "out": out, "format": format_, "lower_case": lower_case,
    }))


@main.command("train-w2v")
@click.option("--tokens", required=True, type=click.Path(), help="Ingested token file.")
@click.option("--dim", required=True, type=int, help="Vector dimensionality d_W2V.")
@click.option("--out", required=True, type=click.Path(), help="Output vector file.")
@click.option("--vocab-out", type=click.Path(), default=None,
              help="Vocab file path (default: <out>.vocab).")
@click.option("--window", default=5, type=int, show_default=True)
@click.option("--negatives", default=5, type=int, show_default=True)
@click.option("--epochs", default=5, type=int, show_default=True)
@click.option("--min-count", default=5, type=int, show_default=True)
@click.option("--sample", default=1e-3, type=float, show_default=True,
              help="Frequency subsampling threshold (0 disables).")
@click.option("--lr", default=0.05, type=float, show_default=True)
@click.option("--workers", default=1, type=int, show_default=True)
@click.option("--seed", default=1, type=int, show_default=True)
@click.pass_obj
def train_w2v(client, tokens, dim, out, vocab_out, window, negatives, epochs,
              min_count, sample, lr, workers, seed):
    """Train CBOW word vectors on the tokenized corpus."""
    _emit(client.post("/v1/w2v/train", {
        "tokens": tokens, "out": out, "vocab_out": vocab_out or out + ".vocab",
        "dim": dim, "window": window, "negatives": negatives, "epochs": epochs,
        "min_count": min_count, "sample": sample, "lr": lr,
        "workers": workers, "seed": seed,
    }))


@main.command()
@click.option("--w2v", required=True, type=click.Path(), help="Word vector file.")
@click.option("--w2v-vocab", type=click.Path(), default=None,
              help="Word vocab file (default: <w2v>.vocab).")
@click.option("--lm-embed", required=True, type=click.Path(), help="LM embedding matrix.")
@click.option("--lm-vocab", required=True, type=click.Path(), help="LM wordpiece vocab.")
@click.option("--out", required=True, type=click.Path(), help="Output map file.")
@click.option("--ablation", default="none",
              type=click.Choice(["none", "identity", "random"]), show_default=True)
@click.option("--seed", default=0, type=int, show_default=True)
@click.pass_obj
def align(client, w2v, w2v_vocab, lm_embed, lm_vocab, out, ablation, seed):
    """Fit the least-squares map from word-vector space to LM space."""
    _emit(client.post("/v1/align/fit", {
        "w2v": w2v, "w2v_vocab": w2v_vocab or w2v + ".vocab",
        "lm_embed": lm_embed, "lm_vocab": lm_vocab,
        "out": out, "ablation": ablation, "seed": seed,
    }))


@main.command()
@click.option("--map", "map_", required=True, type=click.Path(), help="Fitted map file.")
@click.option("--queries", required=True, type=click.Path(),
              help="Query tokens, one per line.")
@click.option("--top-k", default=3, type=int, show_default=True)
@click.option("--w2v", required=True, type=click.Path())
@click.option("--w2v-vocab", type=click.Path(), default=None)
@click.option("--lm-embed", required=True, type=click.Path())
@click.option("--lm-vocab", required=True, type=click.Path())
@click.pass_obj
def report(client, map_, queries, top_k, w2v, w2v_vocab, lm_embed, lm_vocab):
    """Nearest-neighbor diagnostics for an alignment."""
    try:
        with open(queries, encoding="utf-8") as f:
            query_tokens = [line.strip() for line in f if line.strip()]
    except OSError as e:
        click.echo(f"error: cannot read queries file: {e}", err=True)
        sys.exit(2)
    _emit(client.post("/v1/align/report", {
        "map": map_, "queries": query_tokens, "k": top_k,
        "w2v": w2v, "w2v_vocab": w2v_vocab or w2v + ".vocab",
        "lm_embed": lm_embed, "lm_vocab": lm_vocab,
    }))


@main.command()
@click.option("--lm-embed", required=True, type=click.Path())
@click.option("--lm-vocab", required=True, type=click.Path())
@click.option("--w2v", required=True, type=click.Path())
@click.option("--w2v-vocab", type=click.Path(), default=None)
@click.option("--map", "map_", required=True, type=click.Path())
@click.option("--out", required=True, type=click.Path(), help="Output lexicon directory.")
@click.option("--seed", default=0, type=int, show_default=True,
              help="Seed for random-ablation rows.")
@click.pass_obj
def extend(client, lm_embed, lm_vocab, w2v, w2v_vocab, map_, out, seed):
    """Build and export the extended embedding table + vocabulary."""
    _emit(client.post("/v1/lexicon/extend", {
        "lm_embed": lm_embed, "lm_vocab": lm_vocab,
        "w2v": w2v, "w2v_vocab": w2v_vocab or w2v + ".vocab",
        "map": map_, "out_dir": out, "seed": seed,
    }))


@main.command()
@click.option("--vocab", required=True, type=click.Path(), help="Base wordpiece vocab.")
@click.option("--extended", "ext_vocab", type=click.Path(), default=None,
              help="Extended vocab file (base lines + added tokens).")
@click.option("--lexicon-dir", type=click.Path(), default=None,
              help="Exported lexicon directory (alternative to --extended).")
@click.option("--mode", default="standard",
              type=click.Choice(["standard", "extended", "both"]), show_default=True)
@click.pass_obj
def tokenize(client, vocab, ext_vocab, lexicon_dir, mode):
    """Tokenize words read from stdin, one whitespace-separated line at a time."""
    for line in sys.stdin:
        words = line.split()
        if not words:
            continue
        resp = client.post("/v1/tokenize", {
            "words": words, "vocab": vocab, "ext_vocab": ext_vocab,
            "lexicon_dir": lexicon_dir, "mode": mode,
        })
        if mode == "both":
            click.echo("standard: " + " ".join(resp["standard"]["pieces"]))
            click.echo("extended: " + " ".join(resp["extended"]["pieces"]))
        else:
            click.echo(" ".join(resp[mode]["pieces"]))


@main.command("encode-ner")
@click.option("--conll", required=True, type=click.Path(),
              help="Two-column (token tag) CoNLL-style file.")
@click.option("--vocab", required=True, type=click.Path())
@click.option("--lexicon-dir", type=click.Path(), default=None)
@click.option("--mode", default="standard",
              type=click.Choice(["standard", "extended", "mixture", "both"]),
              show_default=True)
@click.option("--out", required=True, type=click.Path(), help="Encoded JSONL output.")
@click.option("--labels-out", type=click.Path(), default=None,
              help="Write the label map JSON here.")
@click.option("--max-words", default=30, type=int, show_default=True)
@click.pass_obj
def encode_ner(client, conll, vocab, lexicon_dir, mode, out, labels_out, max_words):
    """Chunk, tokenize, and encode a labeled NER dataset."""
    _emit(client.post("/v1/ner/encode", {
        "conll": conll, "vocab": vocab, "lexicon_dir": lexicon_dir, "mode": mode,
        "out": out, "labels_out": labels_out, "max_words": max_words,
    }))


@main.command("qa-infer")
@click.option("--dataset", required=True, type=click.Path(), help="SQuAD-format JSON.")
@click.option("--vocab", required=True, type=click.Path())
@click.option("--lexicon-dir", type=click.Path(), default=None)
@click.option("--mode", default="pooled",
              type=click.Choice(["standard", "extended", "pooled"]), show_default=True)
@click.option("--encoder", default="hash", type=click.Choice(["hash", "mock"]),
              show_default=True, help="mock replays --logits; hash is synthetic.")
@click.option("--logits", type=click.Path(), default=None,
              help=".npz of precomputed logits keyed by input hash (mock encoder).")
@click.option("--out", type=click.Path(), default=None, help="Predictions JSON path.")
@click.option("--emit-inputs", type=click.Path(), default=None,
              help="Write encoder inputs as JSONL and stop (no inference).")
@click.option("--lower-case", is_flag=True, default=False)
@click.pass_obj
def qa_infer(client, dataset, vocab, lexicon_dir, mode, encoder, logits, out,
             emit_inputs, lower_case):
    """Sliding-window extractive QA over an abstract encoder."""
    _emit(client.post("/v1/qa/infer", {
        "dataset": dataset, "vocab": vocab, "lexicon_dir": lexicon_dir,
        "mode": mode,
        "encoder": {"kind": encoder, "logits": logits},
        "out": out, "emit_inputs": emit_inputs, "lower_case": lower_case,
    }))


@main.command()
@click.option("--predictions", required=True, type=click.Path(),
              help="JSON {question_id: answer}.")
@click.option("--dataset", required=True, type=click.Path(), help="Gold SQuAD JSON.")
@click.option("--out", type=click.Path(), default=None, help="Metrics JSON path.")
@click.pass_obj
def score(client, predictions, dataset, out):
    """Score predictions with em / f1 / substr."""
    _emit(client.post("/v1/qa/score", {
        "predictions": predictions, "dataset": dataset, "out": out,
    }))


@main.command()
@click.option("--config", type=click.Path(), default=None,
              help="Flat key=value config file.")
@click.option("--set", "overrides", multiple=True, metavar="KEY=VALUE",
              help="Override a config key (repeatable).")
@click.option("--resume", is_flag=True, default=False,
              help="Skip stages whose inputs and outputs are unchanged.")
@click.pass_obj
def pipeline(client, config, overrides, resume):
    """Run ingest -> train -> align -> extend from one configuration."""
    kv = {}
    for item in overrides:
        if "=" not in item:
            click.echo(f"error: --set expects KEY=VALUE, got {item!r}", err=True)
            sys.exit(2)
        key, value = item.split("=", 1)
        kv[key.strip()] = value.strip()
    _emit(client.post("/v1/pipeline/run", {
        "config": config, "overrides": kv, "resume": resume,
    }))


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, type=int, show_default=True)
def serve(host, port):
    """Run the HTTP service."""
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(), host=host, port=port)


if __name__ == "__main__":
    main()
