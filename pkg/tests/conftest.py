"""Shared fixtures around the builders in synthdata.py."""

from __future__ import annotations

import numpy as np
import pytest

from lexlift.wordpiece import WordpieceVocab
from synthdata import fixture_vocab_tokens


@pytest.fixture(scope="session")
def wp_vocab() -> WordpieceVocab:
    return WordpieceVocab(fixture_vocab_tokens())


@pytest.fixture()
def rng() -> np.random.Generator:
    return np.random.default_rng(20260817)
