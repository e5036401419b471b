"""FastAPI application exposing the toolkit over HTTP.

Every pipeline operation is a POST endpoint taking paths + parameters and
returning a JSON summary. Domain errors map to their HTTP status with the
process exit code included, so thin clients can propagate it.
"""

from __future__ import annotations

import json
import time

from fastapi import FastAPI
from fastapi.responses import JSONResponse

from .. import __version__
from ..align import (LinearMap, alignment_report, fit_linear_map, intersect_vocab,
                     make_ablation_map)
from ..corpus import BasicTokenizerConfig, CorpusSource, run_ingest, stream_token_lines
from ..encoders import HashEncoder, MockEncoder
from ..errors import ConfigError, DataError, LexliftError
from ..io_formats import read_matrix, write_matrix
from ..lexicon import export_lexicon, extend_embeddings, load_added_tokens
from ..ner import build_label_map, encode_dataset, read_conll, write_jsonl, write_label_map
from ..pipeline import load_config, make_config, run_pipeline
from ..qa import (emit_window_inputs, infer_dataset, plan_windows, read_squad,
                  score_predictions)
from ..word2vec import EmbeddingTable, Vocab, W2VConfig, build_vocab, train
from ..wordpiece import WordpieceVocab, tokenize_extended, tokenize_standard
from . import schemas


def _tokenizer_inputs(vocab_path: str, lexicon_dir: str | None,
                      ext_vocab: str | None = None):
    if lexicon_dir:
        return load_added_tokens(lexicon_dir)
    vocab = WordpieceVocab.load(vocab_path)
    added: dict[str, int] = {}
    if ext_vocab:
        from ..io_formats import read_vocab_file

        ext_tokens = read_vocab_file(ext_vocab)
        if ext_tokens[: len(vocab)] != vocab.tokens:
            raise DataError(
                f"{ext_vocab} does not start with the base vocab; it is not an "
                f"extension of {vocab_path}"
            )
        added = {tok: len(vocab) + i for i, tok in enumerate(ext_tokens[len(vocab):])}
    return vocab, added


def _tokenized(result) -> schemas.TokenizedWords:
    return schemas.TokenizedWords(
        pieces=result.pieces, ids=result.ids,
        word_initial=result.word_initial, word_spans=result.word_spans,
    )


def create_app() -> FastAPI:
    app = FastAPI(title="lexlift", version=__version__)

    @app.exception_handler(LexliftError)
    async def lexlift_error_handler(request, exc: LexliftError):
        return JSONResponse(
            status_code=exc.http_status,
            content={
                "detail": str(exc),
                "error_type": type(exc).__name__,
                "exit_code": exc.exit_code,
            },
        )

    @app.get("/health", response_model=schemas.HealthResponse)
    def health():
        return schemas.HealthResponse(status="ok", version=__version__)

    @app.post("/v1/ingest", response_model=schemas.IngestResponse)
    def ingest(req: schemas.IngestRequest):
        source = CorpusSource.from_patterns(req.corpus, req.format)
        config = BasicTokenizerConfig(lower_case=req.lower_case)
        stats = run_ingest(source, config, req.out)
        return schemas.IngestResponse(
            files=len(stats.files), lines=stats.lines_written,
            tokens=stats.tokens, out=req.out)

    @app.post("/v1/tokenize", response_model=schemas.TokenizeResponse)
    def tokenize(req: schemas.TokenizeRequest):
        if req.mode not in ("standard", "extended", "both"):
            raise ConfigError(f"unknown tokenize mode {req.mode!r}")
        vocab, added = _tokenizer_inputs(req.vocab, req.lexicon_dir, req.ext_vocab)
        resp = schemas.TokenizeResponse()
        if req.mode in ("standard", "both"):
            resp.standard = _tokenized(tokenize_standard(req.words, vocab))
        if req.mode in ("extended", "both"):
            resp.extended = _tokenized(tokenize_extended(req.words, vocab, added))
        return resp

    @app.post("/v1/w2v/train", response_model=schemas.TrainW2VResponse)
    def w2v_train(req: schemas.TrainW2VRequest):
        config = W2VConfig(
            dim=req.dim, window=req.window, negatives=req.negatives,
            subsample_threshold=req.sample, min_count=req.min_count,
            epochs=req.epochs, initial_lr=req.lr, seed=req.seed,
            workers=req.workers,
        )
        start = time.monotonic()
        vocab = build_vocab(stream_token_lines(req.tokens), config.min_count)

        class _Lines:
            def __iter__(self):
                return stream_token_lines(req.tokens)

        table = train(_Lines(), vocab, config)
        write_matrix(req.out, table.matrix)
        vocab.save(req.vocab_out)
        return schemas.TrainW2VResponse(
            vocab_size=len(vocab), train_words=int(vocab.counts.sum()),
            out=req.out, vocab_out=req.vocab_out,
            duration_s=round(time.monotonic() - start, 3),
        )

    def _load_spaces(req):
        lm_vocab = WordpieceVocab.load(req.lm_vocab)
        lm_table = EmbeddingTable(read_matrix(req.lm_embed))
        w2v_vocab = Vocab.load(req.w2v_vocab)
        w2v_table = EmbeddingTable(read_matrix(req.w2v))
        return lm_vocab, lm_table, w2v_vocab, w2v_table

    @app.post("/v1/align/fit", response_model=schemas.AlignFitResponse)
    def align_fit(req: schemas.AlignFitRequest):
        if req.ablation not in ("none", "identity", "random"):
            raise ConfigError(f"unknown ablation {req.ablation!r}")
        lm_vocab, lm_table, w2v_vocab, w2v_table = _load_spaces(req)
        if req.ablation == "none":
            pairs = intersect_vocab(lm_vocab, w2v_vocab, lm_table, w2v_table)
            linear_map = fit_linear_map(pairs)
        else:
            linear_map = make_ablation_map(
                req.ablation, lm_table.dim, w2v_table.dim, seed=req.seed)
        linear_map.save(req.out)
        return schemas.AlignFitResponse(
            kind=linear_map.kind, n_pairs=linear_map.n_pairs,
            residual_rms=linear_map.residual_rms,
            d_lm=linear_map.d_lm, d_w2v=linear_map.d_w2v, out=req.out,
        )

    @app.post("/v1/align/report", response_model=schemas.AlignReportResponse)
    def align_report(req: schemas.AlignReportRequest):
        lm_vocab, lm_table, w2v_vocab, w2v_table = _load_spaces(req)
        linear_map = LinearMap.load(req.map)
        pairs = intersect_vocab(lm_vocab, w2v_vocab, lm_table, w2v_table)
        report = alignment_report(linear_map, pairs, w2v_vocab, lm_vocab,
                                  req.queries, req.k)
        return schemas.AlignReportResponse(k=report["k"], queries=report["queries"])

    @app.post("/v1/lexicon/extend", response_model=schemas.ExtendResponse)
    def lexicon_extend(req: schemas.ExtendRequest):
        lm_vocab, lm_table, w2v_vocab, w2v_table = _load_spaces(req)
        linear_map = LinearMap.load(req.map)
        lexicon = extend_embeddings(
            lm_table, lm_vocab, w2v_table, w2v_vocab, linear_map, seed=req.seed)
        export_lexicon(lexicon, req.out_dir)
        return schemas.ExtendResponse(
            d_lm=lexicon.d_lm, n_base=lexicon.n_base, n_added=lexicon.n_added,
            map_kind=lexicon.map_kind, out_dir=req.out_dir,
        )

    @app.post("/v1/ner/encode", response_model=schemas.EncodeNerResponse)
    def ner_encode(req: schemas.EncodeNerRequest):
        vocab, added = _tokenizer_inputs(req.vocab, req.lexicon_dir)
        sentences = read_conll(req.conll)
        label_map = build_label_map(sentences)
        records = encode_dataset(sentences, vocab, added, req.mode,
                                 label_map=label_map, max_words=req.max_words)
        n = write_jsonl(records, req.out)
        if req.labels_out:
            write_label_map(label_map, req.labels_out)
        return schemas.EncodeNerResponse(
            sentences=len(sentences), examples=n, labels=label_map, out=req.out)

    @app.post("/v1/qa/plan", response_model=schemas.QAPlanResponse)
    def qa_plan(req: schemas.QAPlanRequest):
        plan = plan_windows(req.q_len, req.c_len)
        return schemas.QAPlanResponse(
            q_len=plan.q_len, c_len=plan.c_len, stride=plan.stride,
            n_steps=plan.n_steps,
            steps=[schemas.QAPlanStep(
                a_l=s.a_l, a_r=s.a_r, p_l=s.p_l, p_r=s.p_r,
                input_len=s.input_len(plan.q_len),
            ) for s in plan.steps],
        )

    def _make_encoder(spec: schemas.EncoderSpec):
        if spec.kind == "mock":
            if not spec.logits:
                raise ConfigError("encoder kind 'mock' requires a logits path")
            return MockEncoder(spec.logits, out_dim=spec.out_dim)
        if spec.kind == "hash":
            return HashEncoder(out_dim=spec.out_dim, scale=spec.scale, salt=spec.salt)
        raise ConfigError(f"unknown encoder kind {spec.kind!r}")

    @app.post("/v1/qa/infer", response_model=schemas.QAInferResponse)
    def qa_infer(req: schemas.QAInferRequest):
        vocab, added = _tokenizer_inputs(req.vocab, req.lexicon_dir)
        examples = read_squad(req.dataset)
        basic = BasicTokenizerConfig(lower_case=req.lower_case)
        if req.emit_inputs:
            records = emit_window_inputs(examples, vocab, added, req.mode, basic)
            with open(req.emit_inputs, "w", encoding="utf-8") as f:
                for rec in records:
                    f.write(json.dumps(rec))
                    f.write("\n")
            return schemas.QAInferResponse(
                n_questions=len(examples), n_inputs=len(records),
                emit_inputs=req.emit_inputs,
            )
        encoder = _make_encoder(req.encoder)
        predictions = infer_dataset(examples, encoder, vocab, added, req.mode, basic)
        if req.out:
            with open(req.out, "w", encoding="utf-8") as f:
                json.dump(predictions, f, indent=2, ensure_ascii=False)
                f.write("\n")
        return schemas.QAInferResponse(
            n_questions=len(examples), out=req.out,
            predictions=None if req.out else predictions,
        )

    @app.post("/v1/qa/score", response_model=schemas.QAScoreResponse)
    def qa_score_endpoint(req: schemas.QAScoreRequest):
        with open(req.predictions, encoding="utf-8") as f:
            predictions = json.load(f)
        if not isinstance(predictions, dict):
            raise DataError(f"{req.predictions} must hold a {{question_id: answer}} object")
        examples = read_squad(req.dataset)
        golds = {ex.qid: ex.golds for ex in examples if ex.golds}
        metrics = score_predictions(predictions, golds)
        if req.out:
            with open(req.out, "w", encoding="utf-8") as f:
                json.dump(metrics, f, indent=2)
                f.write("\n")
        return schemas.QAScoreResponse(
            em=metrics["em"], f1=metrics["f1"], substr=metrics["substr"],
            n=int(metrics["n"]),
        )

    @app.post("/v1/pipeline/run", response_model=schemas.PipelineResponse)
    def pipeline_run(req: schemas.PipelineRequest):
        overrides = dict(req.overrides)
        if req.resume:
            overrides["resume"] = "true"
        if req.config:
            config = load_config(req.config, overrides)
        else:
            config = make_config(overrides)
        manifest = run_pipeline(config)
        return schemas.PipelineResponse(
            status=manifest["status"],
            manifest_path=manifest["manifest_path"],
            stages=manifest["stages"],
        )

    return app


app = create_app()
