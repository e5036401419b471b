"""Token-classification finetuning over encoded NER files.

Consumes the JSONL written by `lexlift encode-ner` — records of
{ids, labels, word_initial, tokenizer} with -100 marking positions excluded
from the loss — plus its labels.json. The model is the checkpoint encoder
with a softmax classifier over the last hidden states, trained with AdamW
under a linear learning-rate schedule (10% warmup). Model selection runs the
batch-size x peak-learning-rate grid by entity-level dev F1, then the final
model trains on the concatenation of train and dev.
"""

from __future__ import annotations

import json
import os
import random
from contextlib import contextmanager
from dataclasses import dataclass, field

import numpy as np
import torch
from transformers import AutoModelForTokenClassification

from .errors import BridgeError, ConfigError, FormatError

BATCH_GRID = (10, 16, 32, 64)
LR_GRID = (1e-5, 3e-5, 5e-5)
GRID = tuple((b, lr) for b in BATCH_GRID for lr in LR_GRID)
DEFAULT_EPOCHS = 100
WARMUP_FRACTION = 0.1
IGNORE_LABEL_ID = -100
PAD_ID = 0


def read_encoded(path: str) -> list[dict]:
    """Load encoded examples, checking each record carries aligned ids/labels."""
    if not os.path.exists(path):
        raise ConfigError(f"encoded file does not exist: {path}")
    records = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as e:
                raise FormatError(f"{path}:{lineno}: not valid JSON: {e}")
            if "ids" not in rec or "labels" not in rec:
                raise FormatError(f"{path}:{lineno}: record lacks ids/labels")
            if len(rec["ids"]) != len(rec["labels"]):
                raise FormatError(
                    f"{path}:{lineno}: {len(rec['ids'])} ids vs "
                    f"{len(rec['labels'])} labels"
                )
            records.append(rec)
    if not records:
        raise FormatError(f"{path} contains no records")
    return records


def read_label_map(path: str) -> dict[str, int]:
    with open(path, encoding="utf-8") as f:
        label_map = json.load(f)
    if not isinstance(label_map, dict) or not label_map:
        raise FormatError(f"{path} must hold a non-empty {{label: id}} object")
    ids = sorted(int(v) for v in label_map.values())
    if ids != list(range(len(ids))):
        raise FormatError(f"{path}: label ids must be contiguous from 0, got {ids}")
    return {str(k): int(v) for k, v in label_map.items()}


def collate(records: list[dict], pad_id: int = PAD_ID) -> dict[str, torch.Tensor]:
    """Pad a batch to its longest sequence; padding is masked and ignored."""
    width = max(len(rec["ids"]) for rec in records)
    n = len(records)
    input_ids = torch.full((n, width), pad_id, dtype=torch.long)
    attention = torch.zeros((n, width), dtype=torch.long)
    labels = torch.full((n, width), IGNORE_LABEL_ID, dtype=torch.long)
    for i, rec in enumerate(records):
        length = len(rec["ids"])
        input_ids[i, :length] = torch.tensor(rec["ids"], dtype=torch.long)
        attention[i, :length] = 1
        labels[i, :length] = torch.tensor(rec["labels"], dtype=torch.long)
    return {"input_ids": input_ids, "attention_mask": attention, "labels": labels}


def linear_warmup_factor(step: int, total_steps: int,
                         warmup_fraction: float = WARMUP_FRACTION) -> float:
    """Learning-rate multiplier: 0 -> 1 over the warmup, then linearly to 0."""
    warmup = max(1, int(warmup_fraction * total_steps))
    if step < warmup:
        return step / warmup
    remaining = max(1, total_steps - warmup)
    return max(0.0, (total_steps - step) / remaining)


@contextmanager
def oom_guard(batch_size: int):
    """Rethrow out-of-memory as a BridgeError naming the offending batch size."""
    try:
        yield
    except (torch.OutOfMemoryError, RuntimeError) as e:
        if "out of memory" in str(e).lower():
            raise BridgeError(
                f"out of memory at batch size {batch_size}; "
                f"retry with a smaller batch"
            ) from e
        raise


# ---------------------------------------------------------------------------
# BIO span extraction and entity-level F1


def bio_spans(tags: list[str]) -> set[tuple[str, int, int]]:
    """Entity spans (type, start, end_exclusive) over word positions.

    A stray I-X (after O, start of sequence, or a different type) opens a new
    span, matching the common lenient reading of BIO output.
    """
    spans: set[tuple[str, int, int]] = set()
    start, kind = None, None
    for i, tag in enumerate(tags):
        if tag.startswith("B-"):
            if start is not None:
                spans.add((kind, start, i))
            start, kind = i, tag[2:]
        elif tag.startswith("I-"):
            if start is None or tag[2:] != kind:
                if start is not None:
                    spans.add((kind, start, i))
                start, kind = i, tag[2:]
        else:
            if start is not None:
                spans.add((kind, start, i))
            start, kind = None, None
    if start is not None:
        spans.add((kind, start, len(tags)))
    return spans


def entity_f1(gold_seqs: list[list[int]], pred_seqs: list[list[int]],
              id2label: dict[int, str]) -> float:
    """Micro-averaged entity F1; positions labeled -100 in gold are skipped."""
    tp = fp = fn = 0
    for gold, pred in zip(gold_seqs, pred_seqs):
        g_tags, p_tags = [], []
        for g, p in zip(gold, pred):
            if g == IGNORE_LABEL_ID:
                continue
            g_tags.append(id2label[g])
            p_tags.append(id2label[p])
        g_spans = bio_spans(g_tags)
        p_spans = bio_spans(p_tags)
        tp += len(g_spans & p_spans)
        fp += len(p_spans - g_spans)
        fn += len(g_spans - p_spans)
    denom = 2 * tp + fp + fn
    if denom == 0:
        return 1.0  # nothing to find and nothing predicted
    return 2 * tp / denom


# ---------------------------------------------------------------------------
# Training


@dataclass
class TrainHistory:
    epoch_losses: list[float] = field(default_factory=list)


@dataclass
class FinetuneResult:
    batch_size: int
    lr: float
    epochs: int
    dev_f1: float | None
    grid_scores: list[dict]
    out_dir: str | None
    history: TrainHistory
    n_final_train: int
    model: object = field(default=None, repr=False)


def _batches(records: list[dict], batch_size: int, shuffle_rng=None):
    order = list(range(len(records)))
    if shuffle_rng is not None:
        shuffle_rng.shuffle(order)
    for lo in range(0, len(order), batch_size):
        yield [records[i] for i in order[lo:lo + batch_size]]


def _load_model(model_dir: str, n_labels: int, id2label: dict[int, str],
                freeze_encoder: bool):
    model = AutoModelForTokenClassification.from_pretrained(
        model_dir,
        num_labels=n_labels,
        id2label={int(k): v for k, v in id2label.items()},
        label2id={v: int(k) for k, v in id2label.items()},
    )
    if freeze_encoder:
        for param in model.base_model.parameters():
            param.requires_grad = False
    return model


def _train(model, records: list[dict], batch_size: int, lr: float, epochs: int,
           seed: int, pad_id: int, device: str) -> TrainHistory:
    model.to(device)
    model.train()
    params = [p for p in model.parameters() if p.requires_grad]
    optimizer = torch.optim.AdamW(params, lr=lr)
    steps_per_epoch = (len(records) + batch_size - 1) // batch_size
    total_steps = max(1, epochs * steps_per_epoch)
    scheduler = torch.optim.lr_scheduler.LambdaLR(
        optimizer, lambda step: linear_warmup_factor(step, total_steps))
    shuffle_rng = random.Random(seed)
    history = TrainHistory()
    for _ in range(epochs):
        losses = []
        for batch in _batches(records, batch_size, shuffle_rng):
            with oom_guard(batch_size):
                tensors = collate(batch, pad_id)
                out = model(
                    input_ids=tensors["input_ids"].to(device),
                    attention_mask=tensors["attention_mask"].to(device),
                    labels=tensors["labels"].to(device),
                )
                optimizer.zero_grad()
                out.loss.backward()
                optimizer.step()
            scheduler.step()
            losses.append(float(out.loss.detach()))
        history.epoch_losses.append(float(np.mean(losses)))
    return history


def _predict(model, records: list[dict], batch_size: int, pad_id: int,
             device: str) -> list[list[int]]:
    model.eval()
    preds: list[list[int]] = []
    with torch.no_grad():
        for batch in _batches(records, batch_size):
            tensors = collate(batch, pad_id)
            with oom_guard(batch_size):
                logits = model(
                    input_ids=tensors["input_ids"].to(device),
                    attention_mask=tensors["attention_mask"].to(device),
                ).logits
            best = logits.argmax(dim=-1).cpu().tolist()
            for rec, row in zip(batch, best):
                preds.append(row[: len(rec["ids"])])
    return preds


def evaluate_f1(model, records: list[dict], id2label: dict[int, str],
                batch_size: int = 32, pad_id: int = PAD_ID,
                device: str = "cpu") -> float:
    preds = _predict(model, records, batch_size, pad_id, device)
    golds = [rec["labels"] for rec in records]
    return entity_f1(golds, preds, id2label)


def token_accuracy(model, records: list[dict], batch_size: int = 32,
                   pad_id: int = PAD_ID, device: str = "cpu") -> float:
    """Fraction of non-ignored positions predicted correctly."""
    preds = _predict(model, records, batch_size, pad_id, device)
    hit = total = 0
    for rec, pred in zip(records, preds):
        for g, p in zip(rec["labels"], pred):
            if g == IGNORE_LABEL_ID:
                continue
            total += 1
            hit += int(g == p)
    return hit / total if total else 1.0


def finetune_ner(model_dir: str, train_path: str, labels_path: str,
                 dev_path: str | None = None, out_dir: str | None = None,
                 batch_size: int | None = None, lr: float | None = None,
                 epochs: int = DEFAULT_EPOCHS, grid=None,
                 freeze_encoder: bool = False, seed: int = 13,
                 pad_id: int = PAD_ID, device: str = "cpu") -> FinetuneResult:
    """Train a token classifier; with no explicit config, grid-search first.

    Grid mode trains one model per (batch size, lr) cell on train, scores
    entity F1 on dev, picks the best cell (ties: earlier in the grid), and
    retrains the final model on train + dev under that cell. A fixed
    batch_size and lr skip the search and train on train alone.
    """
    train_records = read_encoded(train_path)
    dev_records = read_encoded(dev_path) if dev_path else None
    label_map = read_label_map(labels_path)
    id2label = {v: k for k, v in label_map.items()}
    n_labels = len(label_map)

    explicit = batch_size is not None and lr is not None
    if not explicit and dev_records is None:
        raise ConfigError("grid search needs a dev file to select on")

    grid_scores: list[dict] = []
    if explicit:
        chosen = (int(batch_size), float(lr))
        final_records = train_records
    else:
        search = tuple(grid) if grid is not None else GRID
        for cell_batch, cell_lr in search:
            torch.manual_seed(seed)
            model = _load_model(model_dir, n_labels, id2label, freeze_encoder)
            _train(model, train_records, cell_batch, cell_lr, epochs,
                   seed, pad_id, device)
            f1 = evaluate_f1(model, dev_records, id2label,
                             pad_id=pad_id, device=device)
            grid_scores.append(
                {"batch_size": cell_batch, "lr": cell_lr, "dev_f1": f1})
        best = max(grid_scores, key=lambda s: s["dev_f1"])
        chosen = (best["batch_size"], best["lr"])
        # Final model sees every labeled sentence once the config is fixed.
        final_records = train_records + dev_records

    torch.manual_seed(seed)
    model = _load_model(model_dir, n_labels, id2label, freeze_encoder)
    history = _train(model, final_records, chosen[0], chosen[1], epochs,
                     seed, pad_id, device)
    dev_f1 = None
    if explicit and dev_records is not None:
        dev_f1 = evaluate_f1(model, dev_records, id2label,
                             pad_id=pad_id, device=device)
        grid_scores.append(
            {"batch_size": chosen[0], "lr": chosen[1], "dev_f1": dev_f1})
    elif not explicit:
        dev_f1 = max(s["dev_f1"] for s in grid_scores)

    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
        model.save_pretrained(out_dir)
        with open(os.path.join(out_dir, "labels.json"), "w", encoding="utf-8") as f:
            json.dump(label_map, f, indent=2, ensure_ascii=False)
            f.write("\n")

    return FinetuneResult(
        batch_size=chosen[0],
        lr=chosen[1],
        epochs=epochs,
        dev_f1=dev_f1,
        grid_scores=grid_scores,
        out_dir=out_dir,
        history=history,
        n_final_train=len(final_records),
        model=model,
    )
