"""Target-word occurrence search over chunked corpora.

A target is searched through an ordered fallback: the lemma itself, its
surface forms (historical spellings), then the first subword piece of each
as a word-prefix pattern. The first matching plan entry wins, so a usage is
never counted twice.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable

from . import jsonl
from .corpus import Chunk
from .errors import DataError
from .tokenizer import Vocabulary, word_pieces

log = logging.getLogger(__name__)

MIN_PREFIX_LEN = 3

MATCH_KINDS = ("exact", "surface", "subword_prefix")


@dataclass(frozen=True)
class TargetWord:
    lemma: str
    surface_forms: tuple[str, ...] = ()
    min_occurrences_per_period: int = 10

    def __post_init__(self):
        if not self.lemma:
            raise DataError("target lemma must be non-empty")
        seen = set()
        for form in self.surface_forms:
            if form == self.lemma or form in seen:
                raise DataError(
                    f"target {self.lemma!r}: surface forms must be unique and differ from the lemma"
                )
            seen.add(form)


@dataclass(frozen=True)
class Occurrence:
    id: str
    word: str
    chunk_ref: tuple[str, int]
    period: str
    char_start: int
    char_end: int
    matched_form: str
    match_kind: str

    def to_row(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "word": self.word,
            "doc_id": self.chunk_ref[0],
            "chunk_index": self.chunk_ref[1],
            "period": self.period,
            "char_start": self.char_start,
            "char_end": self.char_end,
            "matched_form": self.matched_form,
            "match_kind": self.match_kind,
        }

    @classmethod
    def from_row(cls, row: dict[str, Any]) -> "Occurrence":
        try:
            occ = cls(
                id=row["id"],
                word=row["word"],
                chunk_ref=(row["doc_id"], int(row["chunk_index"])),
                period=row["period"],
                char_start=int(row["char_start"]),
                char_end=int(row["char_end"]),
                matched_form=row["matched_form"],
                match_kind=row["match_kind"],
            )
        except KeyError as exc:
            raise DataError(f"occurrence row missing field {exc}") from exc
        if occ.match_kind not in MATCH_KINDS:
            raise DataError(f"occurrence {occ.id!r}: bad match_kind {occ.match_kind!r}")
        return occ


@dataclass
class OccurrenceCensus:
    word: str
    count_old: int
    count_new: int
    min_per_period: int

    @property
    def sufficient(self) -> bool:
        return (
            self.count_old >= self.min_per_period
            and self.count_new >= self.min_per_period
        )

    def to_dict(self) -> dict[str, Any]:
        return {
            "word": self.word,
            "count_old": self.count_old,
            "count_new": self.count_new,
            "min_per_period": self.min_per_period,
            "sufficient": self.sufficient,
        }


def build_search_plan(
    target: TargetWord, vocab: Vocabulary
) -> list[tuple[str, str]]:
    """Ordered (form, kind) entries; matching is case-insensitive.

    Prefix entries come from the first subword piece of the lemma and of
    each surface form; pieces shorter than 3 characters are dropped, and
    duplicates keep their earliest position.
    """
    plan: list[tuple[str, str]] = []
    seen: set[str] = set()

    def add(form: str, kind: str) -> None:
        key = vocab.normalize_word(form).lower()
        if key and key not in seen:
            seen.add(key)
            plan.append((form, kind))

    add(target.lemma, "exact")
    for form in target.surface_forms:
        add(form, "surface")
    for form in (target.lemma, *target.surface_forms):
        pieces = word_pieces(form, vocab)
        if pieces is None:
            if form == target.lemma:
                log.warning(
                    "target %r has no subword decomposition; plan holds exact and "
                    "surface entries only",
                    target.lemma,
                )
            continue
        prefix = pieces[0]
        if prefix.startswith(vocab.continuation_marker):
            prefix = prefix[len(vocab.continuation_marker):]
        if len(prefix) >= MIN_PREFIX_LEN:
            add(prefix, "subword_prefix")
    return plan


def find_occurrences(
    chunks: Iterable[Chunk],
    target: TargetWord,
    vocab: Vocabulary,
) -> list[Occurrence]:
    """Scan whitespace-delimited chunk words against the target's plan.

    Exact and surface entries need whole-word equality; prefix entries need
    the word to start with the form. matched_form keeps the original casing
    of the matched span.
    """
    plan = [
        (form, form.lower(), kind) for form, kind in build_search_plan(target, vocab)
    ]
    found: list[Occurrence] = []
    for chunk in chunks:
        text = chunk.text
        pos = 0
        n = len(text)
        while pos < n:
            if text[pos].isspace():
                pos += 1
                continue
            end = pos
            while end < n and not text[end].isspace():
                end += 1
            word_lower = text[pos:end].lower()
            for _, form_lower, kind in plan:
                if kind in ("exact", "surface"):
                    hit = word_lower == form_lower
                    span_end = end
                else:
                    hit = word_lower.startswith(form_lower)
                    span_end = pos + len(form_lower)
                if hit:
                    found.append(
                        Occurrence(
                            id=f"{target.lemma}:{chunk.doc_id}:{chunk.chunk_index}:{pos}",
                            word=target.lemma,
                            chunk_ref=chunk.ref,
                            period=chunk.period,
                            char_start=pos,
                            char_end=span_end,
                            matched_form=text[pos:span_end],
                            match_kind=kind,
                        )
                    )
                    break
            pos = end
    found.sort(key=lambda o: (o.chunk_ref[0], o.chunk_ref[1], o.char_start))
    return found


def occurrence_census(
    occurrences: Iterable[Occurrence],
    word: str,
    min_per_period: int = 10,
) -> OccurrenceCensus:
    count_old = 0
    count_new = 0
    for occ in occurrences:
        if occ.word != word:
            continue
        if occ.period == "old":
            count_old += 1
        else:
            count_new += 1
    return OccurrenceCensus(word, count_old, count_new, min_per_period)


def load_targets(path: str | Path) -> list[TargetWord]:
    """Read the targets file: a JSON array of {lemma, surface_forms}."""
    payload = jsonl.load_json(path)
    if not isinstance(payload, list):
        raise DataError(f"{path}: targets file must hold a JSON array")
    targets = []
    for entry in payload:
        if not isinstance(entry, dict) or "lemma" not in entry:
            raise DataError(f"{path}: every target needs a 'lemma' field")
        targets.append(
            TargetWord(
                lemma=entry["lemma"],
                surface_forms=tuple(entry.get("surface_forms", ())),
                min_occurrences_per_period=int(entry.get("min_occurrences_per_period", 10)),
            )
        )
    return targets
