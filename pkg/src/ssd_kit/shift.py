"""Per-sense semantic shift: cosine-distance and inverted-prototype measures.

A sense effectively present in both periods is scored by
cd = 1 - CS(centroid_old, centroid_new) and prt = 1 / CS; a sense under the
frequency floor (or absent) in one period is gained or lost with cd forced
to 1.0 and prt to infinity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Iterable, Sequence

import numpy as np

from .clustering import SenseClustering
from .errors import ConfigError, DataError

STATUSES = ("continuous", "gained", "lost")


def cosine_similarity(a: Sequence[float] | np.ndarray, b: Sequence[float] | np.ndarray) -> float:
    """dot(a, b) / (|a| * |b|) in 64-bit. Zero vectors are an error."""
    va = np.asarray(a, dtype=np.float64)
    vb = np.asarray(b, dtype=np.float64)
    if va.shape != vb.shape:
        raise DataError(f"cosine similarity shape mismatch: {va.shape} vs {vb.shape}")
    norm_a = float(np.linalg.norm(va))
    norm_b = float(np.linalg.norm(vb))
    if norm_a == 0.0 or norm_b == 0.0:
        raise DataError("cosine similarity is undefined for zero vectors")
    return float(np.dot(va, vb) / (norm_a * norm_b))


@dataclass(frozen=True)
class FrequencyRule:
    """A sense below min_fraction of a period's usages counts as absent there."""

    min_fraction: float = 0.10

    def __post_init__(self):
        if not 0.0 <= self.min_fraction < 0.5:
            raise ConfigError(f"min_fraction {self.min_fraction} outside [0, 0.5)")


def effective_presence(count_in_period: int, period_total: int, rule: FrequencyRule) -> bool:
    """True when the sense holds at least min_fraction of the period's usages.

    The boundary is inclusive: exactly min_fraction counts as present. An
    empty period makes every sense absent.
    """
    if not 0 <= count_in_period <= period_total:
        raise DataError(
            f"sense count {count_in_period} outside [0, period total {period_total}]"
        )
    if period_total == 0 or count_in_period == 0:
        return False
    return count_in_period / period_total >= rule.min_fraction


@dataclass
class SenseShift:
    sense: int
    cd: float
    prt: float  # math.inf for gained/lost or non-positive similarity
    status: str
    count_old: int
    count_new: int
    effective_old: bool
    effective_new: bool
    anomalous: bool = False
    nonpositive_similarity: bool = False

    def to_dict(self) -> dict[str, Any]:
        return {
            "sense": self.sense,
            "cd": self.cd,
            "prt": "inf" if math.isinf(self.prt) else self.prt,
            "status": self.status,
            "count_old": self.count_old,
            "count_new": self.count_new,
            "effective_old": self.effective_old,
            "effective_new": self.effective_new,
            "anomalous": self.anomalous,
            "nonpositive_similarity": self.nonpositive_similarity,
        }


@dataclass
class ShiftReport:
    word: str
    senses: list[SenseShift] = field(default_factory=list)

    def to_dict(self) -> dict[str, Any]:
        summary = word_shift_summary(self)
        return {
            "word": self.word,
            "senses": [s.to_dict() for s in self.senses],
            "summary": summary,
        }


def sense_shift(clustering: SenseClustering, rule: FrequencyRule) -> ShiftReport:
    """Score every sense of one word against the presence rule.

    Status is a pure function of the two effective-presence booleans;
    a sense effective in neither period is reported lost and flagged
    anomalous. Non-positive similarity between continuous centroids yields
    prt = inf with its own diagnostic flag.
    """
    total_old = clustering.period_total("old")
    total_new = clustering.period_total("new")
    report = ShiftReport(word=clustering.word)
    for sense in sorted(clustering.counts):
        count_old = clustering.counts[sense]["old"]
        count_new = clustering.counts[sense]["new"]
        eff_old = effective_presence(count_old, total_old, rule)
        eff_new = effective_presence(count_new, total_new, rule)
        entry = SenseShift(
            sense=sense,
            cd=1.0,
            prt=math.inf,
            status="continuous",
            count_old=count_old,
            count_new=count_new,
            effective_old=eff_old,
            effective_new=eff_new,
        )
        if eff_old and eff_new:
            similarity = cosine_similarity(
                clustering.centroids[sense]["old"], clustering.centroids[sense]["new"]
            )
            entry.cd = 1.0 - similarity
            if similarity > 0.0:
                entry.prt = 1.0 / similarity
            else:
                entry.prt = math.inf
                entry.nonpositive_similarity = True
        elif eff_new:
            entry.status = "gained"
        elif eff_old:
            entry.status = "lost"
        else:
            entry.status = "lost"
            entry.anomalous = True
        report.senses.append(entry)
    return report


def word_shift_summary(report: ShiftReport, binary_threshold: float = 0.5) -> dict[str, Any]:
    """Word-level roll-up: max CD over senses plus the binary-change verdict."""
    if not report.senses:
        raise DataError(f"shift report for {report.word!r} has no senses")
    max_cd = max(s.cd for s in report.senses)
    any_gained = any(s.status == "gained" for s in report.senses)
    any_lost = any(s.status == "lost" for s in report.senses)
    return {
        "max_cd": max_cd,
        "any_gained": any_gained,
        "any_lost": any_lost,
        "binary_change": any_gained or any_lost or max_cd >= binary_threshold,
    }


def rank_words(reports: Iterable[ShiftReport]) -> list[dict[str, Any]]:
    """Corpus-level graded-change ranking: words ordered by max CD, descending."""
    rows = []
    for report in reports:
        summary = word_shift_summary(report)
        rows.append(
            {
                "word": report.word,
                "max_cd": summary["max_cd"],
                "binary_change": summary["binary_change"],
            }
        )
    rows.sort(key=lambda r: (-r["max_cd"], r["word"]))
    return rows
