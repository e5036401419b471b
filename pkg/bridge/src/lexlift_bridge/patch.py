"""Patching a transformer checkpoint with an exported lexicon.

The embedding matrix grows from n_base to n_base + n_added rows; every
existing wordpiece row is left untouched (the new ids extend the table, they
never displace it) and each appended row is copied verbatim from the export.
Tied output embeddings follow through the framework's resize. The result is
a standard checkpoint directory that loads with the extended vocabulary,
plus the lexicon's vocab.txt and manifest.json alongside it so downstream
steps can recover the id mapping without the original export.
"""

from __future__ import annotations

import os
import shutil
from dataclasses import dataclass

import torch
import transformers
from transformers import AutoConfig

from .errors import ConfigError
from .lexicon import MANIFEST_FILE, VOCAB_FILE, load_lexicon

__all__ = ["CheckpointPatch", "patch_checkpoint"]


@dataclass
class CheckpointPatch:
    """What a patch did: where it read from, what it wrote, and the sizes."""

    checkpoint: str
    lexicon_dir: str
    out_dir: str
    n_base: int
    n_added: int
    d_lm: int
    vocab_size: int     # n_base + n_added
    architecture: str


def _model_class(config):
    """Resolve the concrete head class recorded in the checkpoint's config.

    Loading with the original class keeps task heads (QA, MLM, ...) intact;
    AutoModel would silently drop them. Falls back to the bare encoder when
    the config carries no architecture tag.
    """
    for name in getattr(config, "architectures", None) or []:
        cls = getattr(transformers, name, None)
        if cls is not None:
            return cls
    return transformers.AutoModel


def patch_checkpoint(checkpoint: str, lexicon_dir: str, out_dir: str,
                     verify: bool = True) -> CheckpointPatch:
    """Extend a checkpoint's wordpiece embeddings with an exported lexicon.

    Zero added tokens is a no-op on the weights: the model is re-saved
    unchanged. Raises ConfigError when the lexicon dimension differs from the
    checkpoint's hidden size or when the base vocab sizes disagree, and
    FormatError (via load_lexicon) when the export fails its checksum gate.
    """
    lexicon = load_lexicon(lexicon_dir, verify=verify)
    config = AutoConfig.from_pretrained(checkpoint)
    hidden = int(config.hidden_size)
    if hidden != lexicon.d_lm:
        raise ConfigError(
            f"dim mismatch: checkpoint hidden size is {hidden}, "
            f"lexicon d_lm is {lexicon.d_lm}"
        )

    model = _model_class(config).from_pretrained(checkpoint)
    embeddings = model.get_input_embeddings().weight
    if embeddings.shape[0] != lexicon.n_base:
        raise ConfigError(
            f"vocab mismatch: checkpoint has {embeddings.shape[0]} embedding rows, "
            f"lexicon manifest says n_base={lexicon.n_base}"
        )

    if lexicon.n_added:
        model.resize_token_embeddings(
            lexicon.n_base + lexicon.n_added, mean_resizing=False)
        weight = model.get_input_embeddings().weight
        with torch.no_grad():
            weight[lexicon.n_base:] = torch.from_numpy(
                lexicon.added_rows.copy()).to(weight.dtype)

    os.makedirs(out_dir, exist_ok=True)
    model.save_pretrained(out_dir)
    # The extended vocab file doubles as the patched model's tokenizer vocab.
    shutil.copyfile(os.path.join(lexicon_dir, VOCAB_FILE),
                    os.path.join(out_dir, VOCAB_FILE))
    shutil.copyfile(os.path.join(lexicon_dir, MANIFEST_FILE),
                    os.path.join(out_dir, MANIFEST_FILE))

    return CheckpointPatch(
        checkpoint=checkpoint,
        lexicon_dir=lexicon_dir,
        out_dir=out_dir,
        n_base=lexicon.n_base,
        n_added=lexicon.n_added,
        d_lm=lexicon.d_lm,
        vocab_size=lexicon.n_base + lexicon.n_added,
        architecture=type(model).__name__,
    )
