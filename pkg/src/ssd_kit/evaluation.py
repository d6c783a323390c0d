"""Binary change detection benchmark over annotated sentence pairs.

Five classifiers: three assign the pair's usages to precomputed sense
clusters (different cluster = change) under each clustering algorithm, and
two threshold a direct embedding comparison (cosine distance, inverted
prototype similarity). Scores are precision/recall/F1 with change as the
positive class.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

from . import jsonl
from .clustering import SenseClustering
from .embeddings import EmbeddingBackend, EmbedRequest
from .errors import ConfigError, DataError
from .shift import cosine_similarity

CLUSTERING_METHODS = ("ap", "km_inertia", "km_silhouette")
DISTANCE_METHODS = ("cd", "prt")
ALL_METHODS = CLUSTERING_METHODS + DISTANCE_METHODS

DEFAULT_CD_THRESHOLD = 0.5
# prt value matching cd 0.5 through prt * (1 - cd) = 1
DEFAULT_PRT_THRESHOLD = 2.0


@dataclass(frozen=True)
class AnnotatedPair:
    """Two usages of one word with a 1-4 relatedness rating."""

    word: str
    sentence_a: str
    span_a: tuple[int, int]
    sentence_b: str
    span_b: tuple[int, int]
    rating: int

    def __post_init__(self):
        if not 1 <= self.rating <= 4:
            raise DataError(f"pair rating must be in [1, 4], got {self.rating}")

    @classmethod
    def from_row(cls, row: dict[str, Any]) -> "AnnotatedPair":
        try:
            return cls(
                word=row["word"],
                sentence_a=row["sentence_a"],
                span_a=tuple(row["span_a"]),
                sentence_b=row["sentence_b"],
                span_b=tuple(row["span_b"]),
                rating=int(row["rating"]),
            )
        except KeyError as exc:
            raise DataError(f"annotated pair missing field {exc}") from exc

    def to_row(self) -> dict[str, Any]:
        return {
            "word": self.word,
            "sentence_a": self.sentence_a,
            "span_a": list(self.span_a),
            "sentence_b": self.sentence_b,
            "span_b": list(self.span_b),
            "rating": self.rating,
        }


def load_pairs(path: str | Path) -> list[AnnotatedPair]:
    return [AnnotatedPair.from_row(row) for _, row in jsonl.read_rows(path)]


def binarize_rating(rating: int) -> int:
    """Ratings 1-2 mean no change (0); ratings 3-4 mean change (1)."""
    if not isinstance(rating, int) or isinstance(rating, bool) or not 1 <= rating <= 4:
        raise DataError(f"rating must be an integer in [1, 4], got {rating!r}")
    return 0 if rating <= 2 else 1


def combined_sense_centroids(clustering: SenseClustering) -> dict[int, np.ndarray]:
    """Per sense, the mean of whichever period centroids exist."""
    combined: dict[int, np.ndarray] = {}
    for sense, by_period in clustering.centroids.items():
        vectors = [np.asarray(v, dtype=np.float64) for v in by_period.values()]
        if vectors:
            combined[sense] = np.mean(vectors, axis=0)
    return combined


def assign_to_sense(vector: np.ndarray, centroids: Mapping[int, np.ndarray]) -> int:
    """Nearest combined centroid by Euclidean distance (ties: lower sense)."""
    if not centroids:
        raise DataError("cannot assign to an empty centroid set")
    vec = np.asarray(vector, dtype=np.float64)
    best_sense, best_dist = -1, np.inf
    for sense in sorted(centroids):
        dist = float(((vec - centroids[sense]) ** 2).sum())
        if dist < best_dist:
            best_sense, best_dist = sense, dist
    return best_sense


def classify_pair_clustering(
    embedding_a: np.ndarray,
    embedding_b: np.ndarray,
    clustering: SenseClustering,
) -> int:
    """1 when the two usages land in different sense clusters."""
    centroids = combined_sense_centroids(clustering)
    return int(
        assign_to_sense(embedding_a, centroids) != assign_to_sense(embedding_b, centroids)
    )


def classify_pair_distance(
    embedding_a: np.ndarray,
    embedding_b: np.ndarray,
    method: str,
    threshold: float,
) -> int:
    """Threshold 1 - CS (cd) or 1 / CS (prt); boundary values classify as change."""
    similarity = cosine_similarity(embedding_a, embedding_b)
    if method == "cd":
        return int(1.0 - similarity >= threshold)
    if method == "prt":
        if similarity <= 0.0:
            return 1
        return int(1.0 / similarity >= threshold)
    raise ConfigError(f"distance method must be cd or prt, got {method!r}")


@dataclass
class EvalResult:
    method: str
    f1: float
    precision: float
    recall: float
    n_pairs: int
    n_skipped: int = 0
    valid: bool = True
    per_word_breakdown: dict[str, dict[str, int]] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        return {
            "method": self.method,
            "f1": self.f1,
            "precision": self.precision,
            "recall": self.recall,
            "n_pairs": self.n_pairs,
            "n_skipped": self.n_skipped,
            "valid": self.valid,
            "per_word_breakdown": self.per_word_breakdown,
        }


@dataclass
class BenchmarkReport:
    results: list[EvalResult]
    average_clustering: float | None = None
    average_all: float | None = None

    def to_dict(self) -> dict[str, Any]:
        return {
            "results": [r.to_dict() for r in self.results],
            "average_clustering": self.average_clustering,
            "average_all": self.average_all,
        }


def _prf(gold: Sequence[int], predicted: Sequence[int]) -> tuple[float, float, float]:
    tp = sum(1 for g, p in zip(gold, predicted) if g == 1 and p == 1)
    fp = sum(1 for g, p in zip(gold, predicted) if g == 0 and p == 1)
    fn = sum(1 for g, p in zip(gold, predicted) if g == 1 and p == 0)
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return precision, recall, f1


def run_benchmark(
    pairs: Sequence[AnnotatedPair],
    methods: Sequence[str],
    backend: EmbeddingBackend,
    clusterings: Mapping[str, Mapping[str, SenseClustering]] | None = None,
    cd_threshold: float = DEFAULT_CD_THRESHOLD,
    prt_threshold: float = DEFAULT_PRT_THRESHOLD,
) -> BenchmarkReport:
    """Score every requested method against the binarized gold ratings.

    `clusterings` maps clustering method -> word -> SenseClustering; pairs
    whose word has no clustering are skipped for that method (a method with
    every pair skipped is flagged invalid). The report mirrors the
    benchmark table layout with clustering-average and all-method-average
    columns.
    """
    if not pairs:
        raise DataError("benchmark needs at least one annotated pair")
    unknown = [m for m in methods if m not in ALL_METHODS]
    if unknown:
        raise ConfigError(f"unknown eval methods: {unknown}; valid: {list(ALL_METHODS)}")
    clusterings = clusterings or {}

    requests = []
    for i, pair in enumerate(pairs):
        requests.append(EmbedRequest(f"pair:{i}:a", pair.sentence_a, pair.span_a))
        requests.append(EmbedRequest(f"pair:{i}:b", pair.sentence_b, pair.span_b))
    vectors = backend.embed(requests)
    missing = [r.occurrence_id for r in requests if r.occurrence_id not in vectors]
    if missing:
        raise DataError(f"backend left {len(missing)} pair usages without vectors")

    gold = [binarize_rating(p.rating) for p in pairs]
    results: list[EvalResult] = []
    for method in methods:
        predictions: list[int] = []
        kept_gold: list[int] = []
        skipped = 0
        breakdown: dict[str, dict[str, int]] = {}
        for i, pair in enumerate(pairs):
            vec_a = vectors[f"pair:{i}:a"]
            vec_b = vectors[f"pair:{i}:b"]
            if method in CLUSTERING_METHODS:
                word_clusterings = clusterings.get(method, {})
                if pair.word not in word_clusterings:
                    skipped += 1
                    continue
                label = classify_pair_clustering(
                    vec_a, vec_b, word_clusterings[pair.word]
                )
            elif method == "cd":
                label = classify_pair_distance(vec_a, vec_b, "cd", cd_threshold)
            else:
                label = classify_pair_distance(vec_a, vec_b, "prt", prt_threshold)
            predictions.append(label)
            kept_gold.append(gold[i])
            entry = breakdown.setdefault(pair.word, {"n": 0, "correct": 0})
            entry["n"] += 1
            entry["correct"] += int(label == gold[i])
        precision, recall, f1 = _prf(kept_gold, predictions)
        results.append(
            EvalResult(
                method=method,
                f1=f1,
                precision=precision,
                recall=recall,
                n_pairs=len(predictions),
                n_skipped=skipped,
                valid=len(predictions) > 0,
                per_word_breakdown=breakdown,
            )
        )

    by_method = {r.method: r for r in results}
    clustering_scores = [
        by_method[m].f1 for m in CLUSTERING_METHODS if m in by_method and by_method[m].valid
    ]
    all_scores = [r.f1 for r in results if r.valid]
    return BenchmarkReport(
        results=results,
        average_clustering=(
            sum(clustering_scores) / len(clustering_scores) if clustering_scores else None
        ),
        average_all=sum(all_scores) / len(all_scores) if all_scores else None,
    )


def sweep_threshold(
    pairs: Sequence[AnnotatedPair],
    backend: EmbeddingBackend,
    method: str = "cd",
    grid: Sequence[float] | None = None,
) -> tuple[float, float]:
    """Best-F1 threshold for a distance method on a dev split."""
    if method not in DISTANCE_METHODS:
        raise ConfigError(f"sweep supports cd/prt, got {method!r}")
    if grid is None:
        grid = (
            np.linspace(0.05, 0.95, 19)
            if method == "cd"
            else np.linspace(1.05, 5.0, 40)
        )
    best = (float(grid[0]), -1.0)
    for threshold in grid:
        report = run_benchmark(
            pairs,
            [method],
            backend,
            cd_threshold=threshold if method == "cd" else DEFAULT_CD_THRESHOLD,
            prt_threshold=threshold if method == "prt" else DEFAULT_PRT_THRESHOLD,
        )
        f1 = report.results[0].f1
        if f1 > best[1]:
            best = (float(threshold), f1)
    return best
