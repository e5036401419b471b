"""Command-line front end: patch, finetune-ner, eval-qa.

Each command prints a small JSON body on success, like the core CLI. Errors
exit 2 for incompatible invocations and 1 for everything else.
"""

from __future__ import annotations

import json
import sys

import click

from . import __version__
from .errors import BridgeError

EPOCH_DEFAULT_HELP = "Training epochs."


def _emit(body: dict) -> None:
    click.echo(json.dumps(body, indent=2))


def _fail(err: BridgeError) -> None:
    click.echo(f"error: {err}", err=True)
    sys.exit(err.exit_code)


@click.group()
@click.version_option(version=__version__, prog_name="lexlift-bridge")
def main():
    """Apply exported lexicons to transformer checkpoints."""


@main.command()
@click.option("--checkpoint", required=True, type=click.Path(),
              help="Source checkpoint directory.")
@click.option("--lexicon-dir", required=True, type=click.Path(),
              help="Exported lexicon directory.")
@click.option("--out", required=True, type=click.Path(),
              help="Patched checkpoint directory.")
@click.option("--no-verify", is_flag=True, default=False,
              help="Skip the manifest checksum gate (not recommended).")
def patch(checkpoint, lexicon_dir, out, no_verify):
    """Extend a checkpoint's embedding layer with an exported lexicon."""
    from .patch import patch_checkpoint

    try:
        result = patch_checkpoint(checkpoint, lexicon_dir, out,
                                  verify=not no_verify)
    except BridgeError as err:
        _fail(err)
    _emit({
        "out_dir": result.out_dir,
        "architecture": result.architecture,
        "n_base": result.n_base,
        "n_added": result.n_added,
        "d_lm": result.d_lm,
        "vocab_size": result.vocab_size,
    })


@main.command("finetune-ner")
@click.option("--model", required=True, type=click.Path(),
              help="Patched checkpoint directory.")
@click.option("--train", "train_", required=True, type=click.Path(),
              help="Encoded training JSONL (from lexlift encode-ner).")
@click.option("--dev", type=click.Path(), default=None,
              help="Encoded dev JSONL for model selection.")
@click.option("--labels", required=True, type=click.Path(),
              help="labels.json from lexlift encode-ner.")
@click.option("--out", required=True, type=click.Path(),
              help="Trained model directory.")
@click.option("--batch-size", type=int, default=None,
              help="Fixed batch size (with --lr, skips the grid).")
@click.option("--lr", type=float, default=None,
              help="Fixed peak learning rate (with --batch-size).")
@click.option("--epochs", type=int, default=None, help=EPOCH_DEFAULT_HELP)
@click.option("--freeze-encoder", is_flag=True, default=False,
              help="Train only the classifier head.")
@click.option("--seed", type=int, default=13, show_default=True)
def finetune_ner_cmd(model, train_, dev, labels, out, batch_size, lr, epochs,
                     freeze_encoder, seed):
    """Finetune a token classifier; grid-search unless a config is pinned."""
    from .ner import DEFAULT_EPOCHS, finetune_ner

    try:
        result = finetune_ner(
            model, train_, labels, dev_path=dev, out_dir=out,
            batch_size=batch_size, lr=lr,
            epochs=DEFAULT_EPOCHS if epochs is None else epochs,
            freeze_encoder=freeze_encoder, seed=seed,
        )
    except BridgeError as err:
        _fail(err)
    _emit({
        "out_dir": result.out_dir,
        "batch_size": result.batch_size,
        "lr": result.lr,
        "epochs": result.epochs,
        "dev_f1": result.dev_f1,
        "n_final_train": result.n_final_train,
        "grid": result.grid_scores,
    })


@main.command("eval-qa")
@click.option("--model", required=True, type=click.Path(),
              help="Patched QA checkpoint directory.")
@click.option("--dataset", required=True, type=click.Path(),
              help="SQuAD-format JSON.")
@click.option("--lexicon-dir", required=True, type=click.Path(),
              help="The lexicon export the model was patched with.")
@click.option("--mode", default="pooled", show_default=True,
              type=click.Choice(["standard", "extended", "pooled"]))
@click.option("--out", type=click.Path(), default=None,
              help="Metrics JSON path.")
@click.option("--batch-size", type=int, default=8, show_default=True)
@click.option("--work-dir", type=click.Path(), default=None,
              help="Keep intermediate files here instead of a temp dir.")
@click.option("--lexlift-bin", type=click.Path(), default=None,
              help="Path to the lexlift CLI (default: search PATH).")
@click.option("--lower-case", is_flag=True, default=False)
def eval_qa(model, dataset, lexicon_dir, mode, out, batch_size, work_dir,
            lexlift_bin, lower_case):
    """Evaluate extractive QA with the model as the encoder."""
    from .qa_eval import evaluate_qa

    try:
        metrics = evaluate_qa(
            model, dataset, lexicon_dir, out=out, mode=mode,
            batch_size=batch_size, lexlift_bin=lexlift_bin,
            work_dir=work_dir, lower_case=lower_case,
        )
    except BridgeError as err:
        _fail(err)
    _emit(metrics)


if __name__ == "__main__":
    main()
