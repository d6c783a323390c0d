from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from ssd_kit.tokenizer import Vocabulary


@pytest.fixture
def paper_vocab() -> Vocabulary:
    """Vocabulary shaped like the occurrence-search examples: the target
    words decompose into a stem piece plus continuations."""
    tokens = (
        "[UNK]", "la", "el", "y", "canta", "pura", "generosidad", "más",
        "gent", "jent", "luc", "luz", "##e", "##es", "##a", "##s", "##.",
        "casa", "es", "sol",
    )
    return Vocabulary(tokens=tokens)


@pytest.fixture
def word_vocab() -> Vocabulary:
    """Whole-word vocabulary for corpus cleaning/chunking tests."""
    words = (
        "la el los las de en un una es son casa gente pueblo historia tiempo "
        "vida agua tierra camino siglo noche dia hombre mujer palabra obra "
        "verdad fuerza razon trabajo lugar momento forma parte nombre mundo"
    ).split()
    tokens = ("[UNK]", "##.", "##,", "##;", "##:", "##!", "##?") + tuple(sorted(words))
    return Vocabulary(tokens=tokens)
