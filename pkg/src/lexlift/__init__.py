"""Domain adaptation of a pretrained LM's lexical layer via aligned word vectors."""

__version__ = "0.1.0"
