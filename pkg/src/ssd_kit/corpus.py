"""Corpus ingestion: row cleaning filters and token-budget chunking.

Cleaning applies four filters in a fixed order: OCR confidence (rows that
carry the field only), exact-duplicate and empty-row removal, the
non-alphabetic character ratio (spaces count as non-alphabetic), and the
minimum token count. Chunking splits oversized texts at sentence
separators, falling back to a hard token-boundary split.
"""

from __future__ import annotations

import logging
import unicodedata
from dataclasses import dataclass, field
from typing import Any, Iterable, Iterator

from .errors import ConfigError, DataError
from .tokenizer import Vocabulary, tokenize

log = logging.getLogger(__name__)

SEPARATORS = frozenset(".;:?!\n")

PERIODS = ("old", "new")


@dataclass
class Document:
    """One raw corpus row. Unknown input fields ride along in `extra`."""

    id: str
    source: str
    year: int
    text: str
    ocr_word_confidence: float | None = None
    extra: dict[str, Any] = field(default_factory=dict)

    @classmethod
    def from_row(cls, row: dict[str, Any]) -> "Document":
        known = {"id", "source", "year", "text", "ocr_word_confidence"}
        try:
            doc_id = row["id"]
            text = row["text"]
        except KeyError as exc:
            raise DataError(f"document row missing field {exc}") from exc
        if not isinstance(doc_id, str) or not doc_id:
            raise DataError(f"document id must be a non-empty string, got {doc_id!r}")
        if not isinstance(text, str):
            raise DataError(f"document {doc_id!r}: text must be a string")
        year = row.get("year", 0)
        if isinstance(year, bool) or not isinstance(year, int):
            raise DataError(f"document {doc_id!r}: year must be an integer")
        confidence = row.get("ocr_word_confidence")
        if confidence is not None:
            confidence = float(confidence)
            if not 0.0 <= confidence <= 1.0:
                raise DataError(
                    f"document {doc_id!r}: ocr_word_confidence {confidence} outside [0, 1]"
                )
        return cls(
            id=doc_id,
            source=str(row.get("source", "")),
            year=year,
            text=text,
            ocr_word_confidence=confidence,
            extra={k: v for k, v in row.items() if k not in known},
        )

    def to_row(self) -> dict[str, Any]:
        row: dict[str, Any] = dict(self.extra)
        row.update({"id": self.id, "source": self.source, "year": self.year, "text": self.text})
        if self.ocr_word_confidence is not None:
            row["ocr_word_confidence"] = self.ocr_word_confidence
        return row


@dataclass(frozen=True)
class Chunk:
    """A <=max_tokens slice of one document, split at sentence separators."""

    doc_id: str
    chunk_index: int
    text: str
    token_count: int
    period: str
    year: int

    @property
    def ref(self) -> tuple[str, int]:
        return (self.doc_id, self.chunk_index)

    def to_row(self) -> dict[str, Any]:
        return {
            "doc_id": self.doc_id,
            "chunk_index": self.chunk_index,
            "text": self.text,
            "token_count": self.token_count,
            "period": self.period,
            "year": self.year,
        }

    @classmethod
    def from_row(cls, row: dict[str, Any]) -> "Chunk":
        try:
            chunk = cls(
                doc_id=row["doc_id"],
                chunk_index=int(row["chunk_index"]),
                text=row["text"],
                token_count=int(row["token_count"]),
                period=row["period"],
                year=int(row.get("year", 0)),
            )
        except KeyError as exc:
            raise DataError(f"chunk row missing field {exc}") from exc
        if chunk.period not in PERIODS:
            raise DataError(f"chunk {chunk.doc_id!r}: period must be one of {PERIODS}")
        return chunk


@dataclass
class CleaningConfig:
    min_confidence: float = 0.5
    min_tokens: int = 5
    max_nonalpha: float = 0.5

    def validate(self) -> None:
        problems = []
        if not 0.0 <= self.min_confidence <= 1.0:
            problems.append(f"min_confidence {self.min_confidence} outside [0, 1]")
        if self.min_tokens < 0:
            problems.append(f"min_tokens {self.min_tokens} must be >= 0")
        if not 0.0 <= self.max_nonalpha <= 1.0:
            problems.append(f"max_nonalpha {self.max_nonalpha} outside [0, 1]")
        if problems:
            raise ConfigError("invalid cleaning config: " + "; ".join(problems), problems)


@dataclass
class CleaningReport:
    rows_in: int = 0
    removed_duplicates: int = 0
    removed_nonalpha: int = 0
    removed_short: int = 0
    removed_low_confidence: int = 0
    removed_malformed: int = 0
    rows_out: int = 0
    errors: list[str] = field(default_factory=list)

    def removals(self) -> int:
        return (
            self.removed_duplicates
            + self.removed_nonalpha
            + self.removed_short
            + self.removed_low_confidence
            + self.removed_malformed
        )

    def to_dict(self) -> dict[str, Any]:
        return {
            "rows_in": self.rows_in,
            "removed_low_confidence": self.removed_low_confidence,
            "removed_duplicates": self.removed_duplicates,
            "removed_nonalpha": self.removed_nonalpha,
            "removed_short": self.removed_short,
            "removed_malformed": self.removed_malformed,
            "rows_out": self.rows_out,
            "errors": self.errors,
        }


def nonalpha_ratio(text: str) -> float:
    """Share of characters that are not Unicode letters (spaces included)."""
    if not text:
        return 1.0
    letters = sum(1 for ch in text if unicodedata.category(ch).startswith("L"))
    return (len(text) - letters) / len(text)


def clean(
    documents: Iterable[Document | dict[str, Any]],
    config: CleaningConfig,
    vocab: Vocabulary,
) -> tuple[list[Document], CleaningReport]:
    """Run the four cleaning filters, tallying each stage in the report.

    Accepts parsed Documents or raw row dicts; malformed rows are recorded
    and skipped. Input order is preserved in the output.
    """
    config.validate()
    report = CleaningReport()
    kept: list[Document] = []
    seen: set[str] = set()
    for item in documents:
        report.rows_in += 1
        if isinstance(item, Document):
            doc = item
        else:
            try:
                doc = Document.from_row(item)
            except DataError as exc:
                report.removed_malformed += 1
                report.errors.append(str(exc))
                continue
        conf = doc.ocr_word_confidence
        if conf is not None and not conf > config.min_confidence:
            report.removed_low_confidence += 1
            continue
        trimmed = doc.text.strip()
        if not trimmed or trimmed in seen:
            report.removed_duplicates += 1
            continue
        seen.add(trimmed)
        if nonalpha_ratio(doc.text) > config.max_nonalpha:
            report.removed_nonalpha += 1
            continue
        if len(tokenize(doc.text, vocab)) < config.min_tokens:
            report.removed_short += 1
            continue
        kept.append(doc)
    report.rows_out = len(kept)
    return kept, report


def _is_boundary(text: str, prev_end: int, next_start: int) -> bool:
    """True when a chunk may end after the word finishing at prev_end."""
    if text[prev_end - 1] in SEPARATORS:
        return True
    return any(ch == "\n" for ch in text[prev_end:next_start])


def chunk_documents(
    documents: Iterable[Document],
    max_tokens: int,
    period: str,
    vocab: Vocabulary,
) -> Iterator[Chunk]:
    """Split each document into chunks of at most max_tokens tokens.

    Splits land on the last separator boundary inside the token window when
    one exists, otherwise on the window edge. A single word longer than the
    whole budget is hard-split at subword boundaries (logged).
    """
    if max_tokens < 16:
        raise ConfigError(f"max_tokens must be >= 16, got {max_tokens}")
    if period not in PERIODS:
        raise ConfigError(f"period must be one of {PERIODS}, got {period!r}")
    for doc in documents:
        yield from _chunk_one(doc, max_tokens, period, vocab)


def _chunk_one(
    doc: Document, max_tokens: int, period: str, vocab: Vocabulary
) -> Iterator[Chunk]:
    text = doc.text
    spans = tokenize(text, vocab)
    if not spans:
        return
    # group subword spans into words: a word starts at a non-continuation span
    words: list[tuple[int, int, int]] = []  # (char_start, char_end, token_count)
    for span in spans:
        if span.is_continuation and words:
            start, _, count = words[-1]
            words[-1] = (start, span.char_end, count + 1)
        else:
            words.append((span.char_start, span.char_end, 1))

    index = 0
    chunk_index = 0
    while index < len(words):
        if words[index][2] > max_tokens:
            # one word outnumbers the whole budget: hard split inside it
            log.warning(
                "document %s: single word of %d tokens exceeds max_tokens=%d; hard split",
                doc.id,
                words[index][2],
                max_tokens,
            )
            for piece_start, piece_end in _split_long_word(
                text, words[index][0], words[index][1], max_tokens, vocab
            ):
                yield _make_chunk(doc, chunk_index, text[piece_start:piece_end], period, vocab)
                chunk_index += 1
            index += 1
            continue
        total = 0
        end = index
        while end < len(words) and total + words[end][2] <= max_tokens:
            total += words[end][2]
            end += 1
        if end < len(words):
            boundary = None
            for j in range(end - 1, index, -1):
                if _is_boundary(text, words[j - 1][1], words[j][0]):
                    boundary = j
                    break
            # also allow ending right at the window when the last word closes a sentence
            if _is_boundary(text, words[end - 1][1], words[end][0]):
                boundary = end
            if boundary is not None:
                end = boundary
        piece = text[words[index][0] : words[end - 1][1]]
        yield _make_chunk(doc, chunk_index, piece, period, vocab)
        chunk_index += 1
        index = end


def _split_long_word(
    text: str, start: int, end: int, max_tokens: int, vocab: Vocabulary
) -> Iterator[tuple[int, int]]:
    # Slices that start mid-word lose the continuation context, so their
    # re-tokenized count can differ from the piece count; every candidate is
    # verified and shrunk until it honors the budget (a 1-char slice always does).
    cursor = start
    while cursor < end:
        spans = tokenize(text[cursor:end], vocab)
        cut = cursor + spans[min(max_tokens, len(spans)) - 1].char_end
        while cut > cursor + 1 and len(tokenize(text[cursor:cut], vocab)) > max_tokens:
            cut = cursor + max(1, (cut - cursor) // 2)
        yield (cursor, cut)
        cursor = cut


def _make_chunk(
    doc: Document, chunk_index: int, piece: str, period: str, vocab: Vocabulary
) -> Chunk:
    piece = piece.strip()
    return Chunk(
        doc_id=doc.id,
        chunk_index=chunk_index,
        text=piece,
        token_count=len(tokenize(piece, vocab)),
        period=period,
        year=doc.year,
    )
