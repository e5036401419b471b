"""Bridge between exported lexlift lexicons and real transformer checkpoints.

The core toolkit stops at files: a lexicon directory of (vocab.txt,
embeddings.bin, manifest.json) and the `lexlift` CLI. This package picks
those up and touches the actual model: patching a checkpoint's wordpiece
embedding layer, finetuning a token classifier, and driving extractive QA
evaluation where the windows/pooling/decoding all stay on the lexlift side
and only the forward passes happen here.
"""

__version__ = "0.1.0"

from .errors import BridgeError, ConfigError, FormatError  # noqa: F401
from .lexicon import ExportedLexicon, load_lexicon  # noqa: F401
from .patch import CheckpointPatch, patch_checkpoint  # noqa: F401
