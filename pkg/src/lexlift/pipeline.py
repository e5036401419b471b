"""End-to-end pipeline: ingest -> train word vectors -> align -> extend.

Configuration is a flat key=value text file (command-line overrides welcome);
every run writes a manifest recording versions, seeds, checksums, and timings
so reruns are reproducible and `resume` can no-op unchanged stages.
"""

from __future__ import annotations

import json
import os
import platform
import sys
import time
from dataclasses import dataclass, field, fields

import numpy as np

from . import __version__
from .align import LinearMap, fit_linear_map, intersect_vocab, make_ablation_map
from .corpus import BasicTokenizerConfig, CorpusSource, run_ingest, stream_token_lines
from .errors import ConfigError, LexliftError
from .io_formats import read_matrix, read_matrix_shape, sha256_file
from .lexicon import export_lexicon, extend_embeddings
from .word2vec import EmbeddingTable, Vocab, W2VConfig, build_vocab, train
from .wordpiece import WordpieceVocab

STAGES = ("ingest", "train", "align", "extend")

MANIFEST_NAME = "run_manifest.json"

_BOOL_TRUE = {"1", "true", "yes", "on"}
_BOOL_FALSE = {"0", "false", "no", "off"}


def _corpus_source(config: "PipelineConfig") -> CorpusSource:
    patterns = [p.strip() for p in config.corpus.split(",") if p.strip()]
    return CorpusSource.from_patterns(patterns, config.corpus_format)


def _parse_bool(key: str, value: str) -> bool:
    v = value.strip().lower()
    if v in _BOOL_TRUE:
        return True
    if v in _BOOL_FALSE:
        return False
    raise ConfigError(f"config key {key} expects a boolean, got {value!r}")


@dataclass
class PipelineConfig:
    work_dir: str = "."
    corpus: str = ""  # glob pattern(s), comma-separated
    corpus_format: str = "auto"
    lm_vocab: str = ""
    lm_embed: str = ""
    stages: str = "ingest,train,align,extend"
    dim: int = 768
    window: int = 5
    negatives: int = 5
    epochs: int = 5
    min_count: int = 5
    sample: float = 1e-3
    lr: float = 0.05
    workers: int = 1
    seed: int = 1
    ablation: str = "none"
    lower_case: bool = False
    resume: bool = False

    def stage_list(self) -> list[str]:
        names = [s.strip() for s in self.stages.split(",") if s.strip()]
        for name in names:
            if name not in STAGES:
                raise ConfigError(f"unknown stage {name!r} (expected from {STAGES})")
        return [s for s in STAGES if s in names]

    def w2v_config(self) -> W2VConfig:
        return W2VConfig(
            dim=self.dim, window=self.window, negatives=self.negatives,
            subsample_threshold=self.sample, min_count=self.min_count,
            epochs=self.epochs, initial_lr=self.lr, seed=self.seed,
            workers=self.workers,
        )

    # Artifact paths, all under work_dir.
    @property
    def tokens_path(self) -> str:
        return os.path.join(self.work_dir, "tokens.txt")

    @property
    def w2v_path(self) -> str:
        return os.path.join(self.work_dir, "w2v.vecs")

    @property
    def w2v_vocab_path(self) -> str:
        return os.path.join(self.work_dir, "w2v.vocab")

    @property
    def map_path(self) -> str:
        return os.path.join(self.work_dir, "map.bin")

    @property
    def lexicon_dir(self) -> str:
        return os.path.join(self.work_dir, "lexicon")


_FIELD_TYPES = {f.name: f.type for f in fields(PipelineConfig)}


def parse_config_text(text: str) -> dict[str, str]:
    """Flat key=value lines; '#' starts a comment; blank lines ignored."""
    values: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"config line {lineno}: expected key=value, got {raw!r}")
        key, value = line.split("=", 1)
        values[key.strip()] = value.strip()
    return values


def make_config(values: dict[str, str]) -> PipelineConfig:
    kwargs = {}
    for key, value in values.items():
        if key not in _FIELD_TYPES:
            raise ConfigError(f"unknown config key {key!r}")
        ftype = _FIELD_TYPES[key]
        if ftype in (int, "int") or ftype in (float, "float"):
            cast = int if ftype in (int, "int") else float
            try:
                kwargs[key] = cast(value)
            except ValueError:
                raise ConfigError(f"config key {key!r}: {value!r} is not a number")
        elif ftype in (bool, "bool"):
            kwargs[key] = _parse_bool(key, value) if isinstance(value, str) else bool(value)
        else:
            kwargs[key] = value
    return PipelineConfig(**kwargs)


def load_config(path: str, overrides: dict[str, str] | None = None) -> PipelineConfig:
    if not os.path.exists(path):
        raise ConfigError(f"config file not found: {path}")
    with open(path, encoding="utf-8") as f:
        values = parse_config_text(f.read())
    if overrides:
        values.update({k: str(v) for k, v in overrides.items()})
    return make_config(values)


def _validate(config: PipelineConfig, stages: list[str]) -> None:
    """Reject missing inputs and dimension mismatches before any compute."""
    if "ingest" in stages:
        if not config.corpus:
            raise ConfigError("stage 'ingest' requires the 'corpus' key")
        _corpus_source(config)
    elif "train" in stages and not os.path.exists(config.tokens_path):
        raise ConfigError(f"stage 'train' needs {config.tokens_path} (run ingest first)")
    if "align" in stages or "extend" in stages:
        for key in ("lm_vocab", "lm_embed"):
            path = getattr(config, key)
            if not path:
                raise ConfigError(f"stages align/extend require the {key!r} key")
            if not os.path.exists(path):
                raise ConfigError(f"{key} file not found: {path}")
        rows, cols = read_matrix_shape(config.lm_embed)
        if cols != config.dim:
            raise ConfigError(
                f"dim mismatch: config dim={config.dim} but LM embeddings have "
                f"d_LM={cols}; the method requires d_W2V = d_LM"
            )
    config.w2v_config().validate()
    if config.ablation not in ("none", "identity", "random"):
        raise ConfigError(f"unknown ablation {config.ablation!r}")


def _checksums(paths: list[str]) -> dict[str, str]:
    return {p: sha256_file(p) for p in paths if os.path.exists(p)}


def _dir_files(d: str) -> list[str]:
    if not os.path.isdir(d):
        return []
    return sorted(
        os.path.join(d, name) for name in os.listdir(d)
        if os.path.isfile(os.path.join(d, name))
    )


class _StageRunner:
    """Executes one stage, timing it and recording input/output checksums."""

    def __init__(self, config: PipelineConfig, previous: dict | None):
        self.config = config
        self.previous = previous or {}

    def can_skip(self, name: str, inputs: list[str], outputs: list[str]) -> bool:
        if not self.config.resume:
            return False
        prior = self.previous.get("stages", {}).get(name)
        if not prior or prior.get("status") != "ok":
            return False
        if prior.get("inputs") != _checksums(inputs):
            return False
        recorded = prior.get("outputs", {})
        return bool(recorded) and _checksums(list(recorded)) == recorded

    def run(self, name: str, inputs: list[str], outputs: list[str], fn) -> dict:
        if self.can_skip(name, inputs, outputs):
            entry = dict(self.previous["stages"][name])
            entry["status"] = "skipped"
            return entry
        start = time.monotonic()
        fn()
        out_files = list(outputs)
        for path in outputs:
            if os.path.isdir(path):
                out_files.remove(path)
                out_files.extend(_dir_files(path))
        return {
            "status": "ok",
            "duration_s": round(time.monotonic() - start, 3),
            "inputs": _checksums(inputs),
            "outputs": _checksums(out_files),
        }


def run_pipeline(config: PipelineConfig) -> dict:
    """Run the requested stages in dependency order; returns the run manifest."""
    stages = config.stage_list()
    if not stages:
        raise ConfigError("no stages requested")
    _validate(config, stages)
    os.makedirs(config.work_dir, exist_ok=True)

    manifest_path = os.path.join(config.work_dir, MANIFEST_NAME)
    previous = None
    if config.resume and os.path.exists(manifest_path):
        with open(manifest_path, encoding="utf-8") as f:
            previous = json.load(f)

    manifest: dict = {
        "versions": {
            "lexlift": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
        },
        "seed": config.seed,
        "config": {f.name: getattr(config, f.name) for f in fields(config)},
        "stages": {},
        "status": "ok",
    }
    runner = _StageRunner(config, previous)

    def ingest_stage():
        source = _corpus_source(config)
        tok_config = BasicTokenizerConfig(lower_case=config.lower_case)
        run_ingest(source, tok_config, config.tokens_path)

    def train_stage():
        vocab = build_vocab(stream_token_lines(config.tokens_path), config.min_count)

        class _Lines:
            def __iter__(self):
                return stream_token_lines(config.tokens_path)

        table = train(_Lines(), vocab, config.w2v_config())
        from .io_formats import write_matrix

        write_matrix(config.w2v_path, table.matrix)
        vocab.save(config.w2v_vocab_path)

    def align_stage():
        if config.ablation == "identity":
            rows, cols = read_matrix_shape(config.lm_embed)
            linear_map = make_ablation_map("identity", cols, config.dim)
        elif config.ablation == "random":
            rows, cols = read_matrix_shape(config.lm_embed)
            linear_map = make_ablation_map("random", cols, config.dim, seed=config.seed)
        else:
            lm_vocab = WordpieceVocab.load(config.lm_vocab)
            lm_table = EmbeddingTable(read_matrix(config.lm_embed))
            w2v_vocab = Vocab.load(config.w2v_vocab_path)
            w2v_table = EmbeddingTable(read_matrix(config.w2v_path))
            pairs = intersect_vocab(lm_vocab, w2v_vocab, lm_table, w2v_table)
            linear_map = fit_linear_map(pairs)
        linear_map.save(config.map_path)

    def extend_stage():
        lm_vocab = WordpieceVocab.load(config.lm_vocab)
        lm_table = EmbeddingTable(read_matrix(config.lm_embed))
        w2v_vocab = Vocab.load(config.w2v_vocab_path)
        w2v_table = EmbeddingTable(read_matrix(config.w2v_path))
        linear_map = LinearMap.load(config.map_path)
        lexicon = extend_embeddings(
            lm_table, lm_vocab, w2v_table, w2v_vocab, linear_map, seed=config.seed)
        export_lexicon(lexicon, config.lexicon_dir)

    plans = {
        "ingest": ([], [config.tokens_path], ingest_stage),
        "train": ([config.tokens_path], [config.w2v_path, config.w2v_vocab_path],
                  train_stage),
        "align": ([config.w2v_path, config.w2v_vocab_path, config.lm_embed,
                   config.lm_vocab], [config.map_path, config.map_path + ".json"],
                  align_stage),
        "extend": ([config.w2v_path, config.w2v_vocab_path, config.lm_embed,
                    config.lm_vocab, config.map_path], [config.lexicon_dir],
                   extend_stage),
    }
    if "ingest" in stages:
        source = _corpus_source(config)
        plans["ingest"] = (list(source.paths), [config.tokens_path], ingest_stage)

    first_error: LexliftError | None = None
    for name in STAGES:
        if name not in stages:
            continue
        if first_error is not None:
            manifest["stages"][name] = {"status": "not_run"}
            continue
        inputs, outputs, fn = plans[name]
        try:
            manifest["stages"][name] = runner.run(name, inputs, outputs, fn)
        except LexliftError as e:
            manifest["stages"][name] = {"status": "failed", "error": str(e)}
            manifest["status"] = "failed"
            manifest["error"] = str(e)
            first_error = e

    with open(manifest_path, "w", encoding="utf-8") as f:
        json.dump(manifest, f, indent=2)
        f.write("\n")
    manifest["manifest_path"] = manifest_path
    if first_error is not None:
        raise first_error
    return manifest
