"""Extractive QA evaluation: lexlift plans and decodes, the model only encodes.

Three `lexlift` CLI calls bracket one batch of forward passes:

  1. qa-infer --emit-inputs     materializes every per-window encoder input
  2. (here) the QA head runs over each unique input; start/end logits are
     stored as (length, 2) float32 arrays in an .npz keyed by the record's
     content hash
  3. qa-infer --encoder mock    replays the logits through the offline path
  4. score                      emits em / f1 / substr

Window math, pooling, and span decoding therefore live in exactly one place;
this module never re-implements any of them, so its predictions agree with
the offline path by construction.
"""

from __future__ import annotations

import json
import os
import shutil
import subprocess
import sys
import tempfile

import numpy as np
import torch
from transformers import AutoModelForQuestionAnswering

from .errors import BridgeError, ConfigError
from .lexicon import load_lexicon, write_base_vocab

INPUTS_FILE = "inputs.jsonl"
LOGITS_FILE = "logits.npz"
PREDS_FILE = "predictions.json"
METRICS_FILE = "metrics.json"
BASE_VOCAB_FILE = "base_vocab.txt"


def resolve_lexlift(lexlift_bin: str | None = None) -> list[str]:
    """Locate the core CLI: an explicit path, PATH, or the current python."""
    if lexlift_bin:
        return [lexlift_bin]
    found = shutil.which("lexlift")
    if found:
        return [found]
    return [sys.executable, "-m", "lexlift.cli"]


def _run_lexlift(cmd: list[str], args: list[str]) -> None:
    proc = subprocess.run(cmd + args, capture_output=True, text=True)
    if proc.returncode != 0:
        detail = (proc.stderr or proc.stdout).strip()
        raise BridgeError(
            f"lexlift {args[0]} failed (exit {proc.returncode}): {detail}")


def read_inputs(path: str) -> list[dict]:
    records = []
    with open(path, encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if line:
                records.append(json.loads(line))
    return records


def compute_logits(model, records: list[dict], batch_size: int = 8,
                   device: str = "cpu") -> dict[str, np.ndarray]:
    """Forward each unique input; returns {content key: (length, 2) float32}.

    Inputs are padded per batch and masked, and each stored array is cut back
    to the true input length, so batch composition cannot leak into the
    logits the offline path replays.
    """
    model.to(device)
    model.eval()
    unique: list[dict] = []
    seen: set[str] = set()
    for rec in records:
        if rec["key"] not in seen:
            seen.add(rec["key"])
            unique.append(rec)

    out: dict[str, np.ndarray] = {}
    with torch.no_grad():
        for lo in range(0, len(unique), batch_size):
            batch = unique[lo:lo + batch_size]
            width = max(len(rec["ids"]) for rec in batch)
            input_ids = torch.zeros((len(batch), width), dtype=torch.long)
            attention = torch.zeros((len(batch), width), dtype=torch.long)
            for i, rec in enumerate(batch):
                length = len(rec["ids"])
                input_ids[i, :length] = torch.tensor(rec["ids"], dtype=torch.long)
                attention[i, :length] = 1
            result = model(input_ids=input_ids.to(device),
                           attention_mask=attention.to(device))
            start = result.start_logits.cpu().numpy()
            end = result.end_logits.cpu().numpy()
            for i, rec in enumerate(batch):
                length = len(rec["ids"])
                out[rec["key"]] = np.stack(
                    [start[i, :length], end[i, :length]], axis=1
                ).astype(np.float32)
    return out


def evaluate_qa(model_dir: str, dataset: str, lexicon_dir: str,
                out: str | None = None, mode: str = "pooled",
                batch_size: int = 8, lexlift_bin: str | None = None,
                work_dir: str | None = None, lower_case: bool = False,
                device: str = "cpu") -> dict:
    """Run the full loop and return the metrics dict {em, f1, substr, n}.

    Intermediate files land in work_dir when given (kept for inspection),
    otherwise in a temporary directory. The lexicon directory must be the
    same export the model was patched with — the content-hash keys only line
    up when both sides tokenize identically.
    """
    if not os.path.exists(dataset):
        raise ConfigError(f"dataset does not exist: {dataset}")
    lexicon = load_lexicon(lexicon_dir)
    cmd = resolve_lexlift(lexlift_bin)

    tmp = None
    if work_dir is None:
        tmp = tempfile.TemporaryDirectory(prefix="lexlift-bridge-qa-")
        work_dir = tmp.name
    else:
        os.makedirs(work_dir, exist_ok=True)

    try:
        base_vocab = os.path.join(work_dir, BASE_VOCAB_FILE)
        write_base_vocab(lexicon, base_vocab)
        inputs_path = os.path.join(work_dir, INPUTS_FILE)
        logits_path = os.path.join(work_dir, LOGITS_FILE)
        preds_path = os.path.join(work_dir, PREDS_FILE)
        metrics_path = os.path.join(work_dir, METRICS_FILE)

        common = ["--dataset", dataset, "--vocab", base_vocab,
                  "--lexicon-dir", lexicon_dir, "--mode", mode]
        if lower_case:
            common.append("--lower-case")

        _run_lexlift(cmd, ["qa-infer", *common, "--emit-inputs", inputs_path])

        records = read_inputs(inputs_path)
        if not records:
            raise BridgeError(f"{inputs_path} came back empty")
        model = AutoModelForQuestionAnswering.from_pretrained(model_dir)
        logits = compute_logits(model, records, batch_size, device)
        np.savez(logits_path, **logits)

        _run_lexlift(cmd, ["qa-infer", *common, "--encoder", "mock",
                           "--logits", logits_path, "--out", preds_path])
        _run_lexlift(cmd, ["score", "--predictions", preds_path,
                           "--dataset", dataset, "--out", metrics_path])

        with open(metrics_path, encoding="utf-8") as f:
            metrics = json.load(f)
        if out:
            with open(out, "w", encoding="utf-8") as f:
                json.dump(metrics, f, indent=2)
                f.write("\n")
        return metrics
    finally:
        if tmp is not None:
            tmp.cleanup()
