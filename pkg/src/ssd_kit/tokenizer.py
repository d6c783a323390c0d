"""Subword vocabulary loading and greedy longest-match-first tokenization.

One vocabulary serves token counting (chunk budgeting) and occurrence
matching. Tokenization is pure: the Vocabulary is immutable after load and
`tokenize` has no state, so callers may parallelize freely.
"""

from __future__ import annotations

import json
import re
import unicodedata
from dataclasses import dataclass, field
from pathlib import Path

from .errors import DataError

_WORD_RE = re.compile(r"\S+")


@dataclass(frozen=True)
class TokenSpan:
    """One subword piece anchored to [char_start, char_end) of the source text."""

    token: str
    char_start: int
    char_end: int
    is_continuation: bool


@dataclass(frozen=True)
class Vocabulary:
    """Ordered subword vocabulary with dense ids (line number = id).

    `cased=False` vocabularies lowercase and strip accents before lookup;
    the mapping is applied per character so spans keep their alignment with
    the original text.
    """

    tokens: tuple[str, ...]
    continuation_marker: str = "##"
    unk_token: str = "[UNK]"
    cased: bool = True
    _ids: dict[str, int] = field(init=False, repr=False, compare=False, default=None)

    def __post_init__(self):
        ids: dict[str, int] = {}
        for i, tok in enumerate(self.tokens):
            if tok in ids:
                raise DataError(f"duplicate vocabulary entry {tok!r} at ids {ids[tok]} and {i}")
            ids[tok] = i
        if self.unk_token not in ids:
            raise DataError(f"vocabulary is missing the unk token {self.unk_token!r}")
        object.__setattr__(self, "_ids", ids)

    def __contains__(self, token: str) -> bool:
        return token in self._ids

    def id_of(self, token: str) -> int:
        return self._ids[token]

    def __len__(self) -> int:
        return len(self.tokens)

    def normalize_word(self, word: str) -> str:
        """Apply the vocabulary's case policy, preserving string length."""
        if self.cased:
            return word
        return "".join(_normalize_char(ch) for ch in word)


def _normalize_char(ch: str) -> str:
    """Lowercase and strip combining accents from a single character.

    Length-preserving by construction so char offsets stay valid.
    """
    decomposed = unicodedata.normalize("NFD", ch)
    base = "".join(c for c in decomposed if unicodedata.category(c) != "Mn")
    if len(base) != 1:
        base = ch
    lowered = base.lower()
    return lowered if len(lowered) == 1 else base


def load_vocabulary(path: str | Path) -> Vocabulary:
    """Load a one-subword-per-line vocab file plus its JSON sidecar.

    The sidecar lives at `<path>.json` and overrides the marker, unk token
    and case policy; absent keys fall back to the usual defaults.
    """
    path = Path(path)
    lines = path.read_text(encoding="utf-8").splitlines()
    tokens = tuple(line.rstrip("\n") for line in lines if line.strip())
    sidecar = path.with_name(path.name + ".json")
    marker, unk, cased = "##", "[UNK]", True
    if sidecar.exists():
        with open(sidecar, encoding="utf-8") as fh:
            try:
                meta = json.load(fh)
            except json.JSONDecodeError as exc:
                raise DataError(f"{sidecar}: invalid JSON sidecar: {exc}") from exc
        marker = meta.get("continuation_marker", marker)
        unk = meta.get("unk_token", unk)
        cased = bool(meta.get("cased", cased))
    return Vocabulary(tokens=tokens, continuation_marker=marker, unk_token=unk, cased=cased)


def save_vocabulary(vocab: Vocabulary, path: str | Path) -> None:
    path = Path(path)
    path.write_text("\n".join(vocab.tokens) + "\n", encoding="utf-8")
    sidecar = path.with_name(path.name + ".json")
    with open(sidecar, "w", encoding="utf-8") as fh:
        json.dump(
            {
                "continuation_marker": vocab.continuation_marker,
                "cased": vocab.cased,
                "unk_token": vocab.unk_token,
            },
            fh,
            ensure_ascii=False,
        )
        fh.write("\n")


def word_pieces(word: str, vocab: Vocabulary) -> list[str] | None:
    """Greedy longest-match-first decomposition of one word.

    Returns None when no full decomposition exists (the caller maps the
    word to unk). Non-initial pieces carry the continuation marker.
    """
    normalized = vocab.normalize_word(word)
    pieces: list[str] = []
    start = 0
    n = len(normalized)
    while start < n:
        end = n
        found = None
        while start < end:
            candidate = normalized[start:end]
            if start > 0:
                candidate = vocab.continuation_marker + candidate
            if candidate in vocab:
                found = candidate
                break
            end -= 1
        if found is None:
            return None
        pieces.append(found)
        start = end
    return pieces


def tokenize(text: str, vocab: Vocabulary) -> list[TokenSpan]:
    """Whitespace pre-split followed by greedy subword decomposition.

    Words without a full decomposition become one unk span covering the
    whole word, so tokenization never fails.
    """
    spans: list[TokenSpan] = []
    for match in _WORD_RE.finditer(text):
        word = match.group()
        offset = match.start()
        pieces = word_pieces(word, vocab)
        if pieces is None:
            spans.append(TokenSpan(vocab.unk_token, offset, match.end(), False))
            continue
        cursor = offset
        for i, piece in enumerate(pieces):
            visible = piece[len(vocab.continuation_marker):] if i > 0 else piece
            spans.append(
                TokenSpan(piece, cursor, cursor + len(visible), is_continuation=i > 0)
            )
            cursor += len(visible)
    return spans


def count_tokens(text: str, vocab: Vocabulary) -> int:
    return len(tokenize(text, vocab))
