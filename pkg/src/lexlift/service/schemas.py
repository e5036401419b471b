"""Pydantic request/response models for the HTTP service.

The service runs next to the artifacts it manipulates, so requests carry
file paths plus parameters and responses carry summaries; large matrices
stay on disk.
"""

from __future__ import annotations

from pydantic import BaseModel, Field


class HealthResponse(BaseModel):
    status: str
    version: str


class ErrorResponse(BaseModel):
    detail: str
    error_type: str
    exit_code: int


class IngestRequest(BaseModel):
    corpus: list[str] = Field(min_length=1, description="file paths or glob patterns")
    out: str
    format: str = "auto"
    lower_case: bool = False


class IngestResponse(BaseModel):
    files: int
    lines: int
    tokens: int
    out: str


class TokenizeRequest(BaseModel):
    words: list[str]
    vocab: str
    lexicon_dir: str | None = None
    ext_vocab: str | None = None  # full extended vocab file (base lines + added)
    mode: str = "standard"  # standard | extended | both


class TokenizedWords(BaseModel):
    pieces: list[str]
    ids: list[int]
    word_initial: list[bool]
    word_spans: list[tuple[int, int]]


class TokenizeResponse(BaseModel):
    standard: TokenizedWords | None = None
    extended: TokenizedWords | None = None


class TrainW2VRequest(BaseModel):
    tokens: str
    out: str
    vocab_out: str
    dim: int
    window: int = 5
    negatives: int = 5
    epochs: int = 5
    min_count: int = 5
    sample: float = 1e-3
    lr: float = 0.05
    seed: int = 1
    workers: int = 1


class TrainW2VResponse(BaseModel):
    vocab_size: int
    train_words: int
    out: str
    vocab_out: str
    duration_s: float


class AlignFitRequest(BaseModel):
    w2v: str
    w2v_vocab: str
    lm_embed: str
    lm_vocab: str
    out: str
    ablation: str = "none"  # none | identity | random
    seed: int = 0


class AlignFitResponse(BaseModel):
    kind: str
    n_pairs: int
    residual_rms: float
    d_lm: int
    d_w2v: int
    out: str


class AlignReportRequest(BaseModel):
    map: str
    w2v: str
    w2v_vocab: str
    lm_embed: str
    lm_vocab: str
    queries: list[str]
    k: int = 5


class AlignReportResponse(BaseModel):
    k: int
    queries: dict[str, dict]


class ExtendRequest(BaseModel):
    lm_embed: str
    lm_vocab: str
    w2v: str
    w2v_vocab: str
    map: str
    out_dir: str
    seed: int = 0


class ExtendResponse(BaseModel):
    d_lm: int
    n_base: int
    n_added: int
    map_kind: str
    out_dir: str


class EncodeNerRequest(BaseModel):
    conll: str
    vocab: str
    lexicon_dir: str | None = None
    mode: str = "standard"  # standard | extended | mixture | both
    out: str
    labels_out: str | None = None
    max_words: int = 30


class EncodeNerResponse(BaseModel):
    sentences: int
    examples: int
    labels: dict[str, int]
    out: str


class QAPlanRequest(BaseModel):
    q_len: int
    c_len: int


class QAPlanStep(BaseModel):
    a_l: int
    a_r: int
    p_l: int
    p_r: int
    input_len: int


class QAPlanResponse(BaseModel):
    q_len: int
    c_len: int
    stride: int
    n_steps: int
    steps: list[QAPlanStep]


class EncoderSpec(BaseModel):
    kind: str = "hash"  # hash | mock
    logits: str | None = None  # .npz path for kind=mock
    out_dim: int = 2
    scale: float = 1.0
    salt: str = ""


class QAInferRequest(BaseModel):
    dataset: str
    vocab: str
    lexicon_dir: str | None = None
    mode: str = "pooled"  # standard | extended | pooled
    encoder: EncoderSpec = EncoderSpec()
    out: str | None = None
    emit_inputs: str | None = None  # write encoder inputs JSONL here instead of inferring
    lower_case: bool = False


class QAInferResponse(BaseModel):
    n_questions: int
    n_inputs: int | None = None
    out: str | None = None
    emit_inputs: str | None = None
    predictions: dict[str, str] | None = None


class QAScoreRequest(BaseModel):
    predictions: str
    dataset: str
    out: str | None = None


class QAScoreResponse(BaseModel):
    em: float
    f1: float
    substr: float
    n: int


class PipelineRequest(BaseModel):
    config: str | None = None
    overrides: dict[str, str] = {}
    resume: bool = False


class PipelineResponse(BaseModel):
    status: str
    manifest_path: str
    stages: dict[str, dict]
