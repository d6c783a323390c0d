"""Joint sense clustering of a word's embeddings across both periods.

Two algorithm families: KMeans with an automatic K chosen by silhouette or
by the inertia elbow, and Affinity Propagation with damped message passing.
Both operate on the pooled old+new vectors of one word; sense member sets
and per-(sense, period) centroids come out of `build_sense_sets`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from .embeddings import PeriodSplit
from .errors import ConfigError, DataError

ALGORITHMS = ("ap", "kmeans_silhouette", "kmeans_inertia")

KMEANS_MAX_ITER = 300


@dataclass
class ClusteringConfig:
    algorithm: str = "ap"
    k_min: int = 2
    k_max: int = 10
    ap_damping: float = 0.975
    ap_max_iter: int = 1000
    ap_convergence_iter: int = 100
    seed: int = 0
    n_init: int = 10
    metric: str = "euclidean"

    def validate(self) -> None:
        problems = []
        if self.algorithm not in ALGORITHMS:
            problems.append(f"algorithm must be one of {ALGORITHMS}, got {self.algorithm!r}")
        if not 2 <= self.k_min <= self.k_max:
            problems.append(f"need 2 <= k_min <= k_max, got [{self.k_min}, {self.k_max}]")
        if not 0.5 <= self.ap_damping < 1.0:
            problems.append(f"ap_damping {self.ap_damping} outside [0.5, 1)")
        if self.ap_max_iter < 1 or self.ap_convergence_iter < 1:
            problems.append("ap iteration counts must be >= 1")
        if self.n_init < 1:
            problems.append("n_init must be >= 1")
        if self.metric not in ("euclidean", "cosine"):
            problems.append(f"metric must be euclidean or cosine, got {self.metric!r}")
        if problems:
            raise ConfigError("invalid clustering config: " + "; ".join(problems), problems)


@dataclass
class SenseClustering:
    """Cluster labels plus per-(sense, period) members, counts and centroids."""

    word: str
    algorithm: str
    m: int
    labels: dict[str, int]
    members: dict[int, dict[str, list[str]]]
    counts: dict[int, dict[str, int]]
    centroids: dict[int, dict[str, np.ndarray]]
    converged: bool = True
    diagnostics: dict[str, Any] = field(default_factory=dict)

    def period_total(self, period: str) -> int:
        return sum(c[period] for c in self.counts.values())

    def to_dict(self) -> dict[str, Any]:
        return {
            "word": self.word,
            "algorithm": self.algorithm,
            "m": self.m,
            "labels": dict(sorted(self.labels.items())),
            "counts": {str(s): dict(self.counts[s]) for s in sorted(self.counts)},
            "centroids": {
                str(s): {
                    period: [float(x) for x in vec]
                    for period, vec in sorted(self.centroids[s].items())
                }
                for s in sorted(self.centroids)
            },
            "members": {
                str(s): {p: list(ids) for p, ids in sorted(self.members[s].items())}
                for s in sorted(self.members)
            },
            "converged": self.converged,
        }

    @classmethod
    def from_dict(cls, payload: dict[str, Any]) -> "SenseClustering":
        try:
            return cls(
                word=payload["word"],
                algorithm=payload["algorithm"],
                m=int(payload["m"]),
                labels={k: int(v) for k, v in payload["labels"].items()},
                members={
                    int(s): {p: list(ids) for p, ids in periods.items()}
                    for s, periods in payload["members"].items()
                },
                counts={
                    int(s): {p: int(n) for p, n in periods.items()}
                    for s, periods in payload["counts"].items()
                },
                centroids={
                    int(s): {
                        p: np.asarray(vec, dtype=np.float64)
                        for p, vec in periods.items()
                    }
                    for s, periods in payload["centroids"].items()
                },
                converged=bool(payload.get("converged", True)),
            )
        except KeyError as exc:
            raise DataError(f"sense clustering payload missing field {exc}") from exc


def _as_points(points: Sequence[Sequence[float]] | np.ndarray) -> np.ndarray:
    arr = np.asarray(points, dtype=np.float64)
    if arr.ndim != 2:
        raise DataError(f"points must be a 2-D array, got shape {arr.shape}")
    return arr


def _prepare_metric(points: np.ndarray, metric: str) -> np.ndarray:
    """Cosine mode clusters length-normalized vectors with Euclidean math."""
    if metric == "cosine":
        norms = np.linalg.norm(points, axis=1, keepdims=True)
        norms[norms == 0.0] = 1.0
        return points / norms
    return points


def _plusplus_seed(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """k-means++ D^2 sampling."""
    n = len(points)
    centroids = np.empty((k, points.shape[1]))
    centroids[0] = points[rng.integers(n)]
    closest = ((points - centroids[0]) ** 2).sum(axis=1)
    for i in range(1, k):
        total = closest.sum()
        if total <= 0.0:
            centroids[i:] = points[rng.integers(n, size=k - i)]
            break
        probs = closest / total
        centroids[i] = points[rng.choice(n, p=probs)]
        closest = np.minimum(closest, ((points - centroids[i]) ** 2).sum(axis=1))
    return centroids


def _sq_dists(points: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    diff = points[:, None, :] - centroids[None, :, :]
    return (diff**2).sum(axis=2)


def kmeans(
    points: Sequence[Sequence[float]] | np.ndarray,
    k: int,
    seed: int = 0,
    n_init: int = 10,
) -> tuple[np.ndarray, np.ndarray, float]:
    """Lloyd's algorithm with k-means++ seeding, best of n_init restarts.

    Returns (labels, centroids, inertia). Iterates until assignments stop
    changing (or 300 iterations); empty clusters are re-seeded from the
    point farthest to its centroid. Inertia is asserted non-increasing
    across iterations within each restart.
    """
    pts = _as_points(points)
    n = len(pts)
    if not 1 <= k <= n:
        raise DataError(f"kmeans needs 1 <= k <= n={n}, got k={k}")
    best: tuple[float, np.ndarray, np.ndarray] | None = None
    for restart in range(n_init):
        rng = np.random.default_rng(seed + restart)
        labels, centroids, inertia = _lloyd(pts, k, rng)
        if best is None or inertia < best[0]:
            best = (inertia, labels, centroids)
    inertia, labels, centroids = best
    return labels, centroids, float(inertia)


def _lloyd(
    pts: np.ndarray, k: int, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray, float]:
    centroids = _plusplus_seed(pts, k, rng)
    labels = np.full(len(pts), -1, dtype=np.int64)
    prev_inertia = np.inf
    for _ in range(KMEANS_MAX_ITER):
        dists = _sq_dists(pts, centroids)
        new_labels = dists.argmin(axis=1)
        inertia = float(dists[np.arange(len(pts)), new_labels].sum())
        assert inertia <= prev_inertia * (1.0 + 1e-12) + 1e-12, (
            f"inertia increased across Lloyd iterations: {prev_inertia} -> {inertia}"
        )
        prev_inertia = inertia
        for empty in np.setdiff1d(np.arange(k), np.unique(new_labels)):
            farthest = dists[np.arange(len(pts)), new_labels].argmax()
            centroids[empty] = pts[farthest]
            dists = _sq_dists(pts, centroids)
            new_labels = dists.argmin(axis=1)
            prev_inertia = np.inf
        if np.array_equal(new_labels, labels):
            break
        labels = new_labels
        for j in range(k):
            member = pts[labels == j]
            if len(member):
                centroids[j] = member.mean(axis=0)
    dists = _sq_dists(pts, centroids)
    labels = dists.argmin(axis=1)
    inertia = float(dists[np.arange(len(pts)), labels].sum())
    return labels, centroids, inertia


def silhouette_score(
    points: Sequence[Sequence[float]] | np.ndarray, labels: Sequence[int] | np.ndarray
) -> float:
    """Mean silhouette with Euclidean distance; singletons contribute 0."""
    pts = _as_points(points)
    lab = np.asarray(labels, dtype=np.int64)
    if len(lab) != len(pts):
        raise DataError("labels and points length mismatch")
    unique = np.unique(lab)
    if len(unique) < 2:
        raise DataError("silhouette score needs at least 2 clusters")
    dists = np.sqrt(np.maximum(_sq_dists(pts, pts), 0.0))
    scores = np.zeros(len(pts))
    sizes = {c: int((lab == c).sum()) for c in unique}
    for i in range(len(pts)):
        own = lab[i]
        if sizes[own] == 1:
            scores[i] = 0.0
            continue
        a = dists[i][lab == own].sum() / (sizes[own] - 1)
        b = min(dists[i][lab == c].mean() for c in unique if c != own)
        denom = max(a, b)
        scores[i] = 0.0 if denom == 0.0 else (b - a) / denom
    return float(scores.mean())


def auto_k_kmeans(
    split: PeriodSplit,
    config: ClusteringConfig,
    criterion: str,
    word: str = "",
) -> SenseClustering:
    """KMeans with K chosen over [k_min, min(k_max, n-1)].

    Silhouette picks the argmax score; the inertia criterion picks the
    elbow, i.e. the K maximizing the second difference
    I(K-1) - 2*I(K) + I(K+1) of the inertia curve (the kink point of the
    forward-difference curve). Ties go to the smaller K. K is never below
    2: single-meaning words are a documented failure mode of this selector.
    """
    config.validate()
    if criterion not in ("silhouette", "inertia"):
        raise ConfigError(f"criterion must be silhouette or inertia, got {criterion!r}")
    pts = _prepare_metric(split.vectors, config.metric)
    n = len(pts)
    if n < config.k_min + 1:
        raise DataError(
            f"auto-K needs at least k_min + 1 = {config.k_min + 1} points, got {n}"
        )
    k_hi = min(config.k_max, n - 1)
    candidates = list(range(config.k_min, k_hi + 1))
    runs = {
        k: kmeans(pts, k, seed=config.seed, n_init=config.n_init) for k in candidates
    }
    if criterion == "silhouette":
        scores = {}
        for k in candidates:
            labels = runs[k][0]
            scores[k] = (
                silhouette_score(pts, labels) if np.unique(labels).size > 1 else -1.0
            )
        best_k = max(candidates, key=lambda k: (scores[k], -k))
    else:
        inertia = {k: runs[k][2] for k in candidates}
        for k in (config.k_min - 1, k_hi + 1):
            if k not in inertia:
                inertia[k] = kmeans(pts, k, seed=config.seed, n_init=config.n_init)[2]
        scores = {
            k: inertia[k - 1] - 2.0 * inertia[k] + inertia[k + 1] for k in candidates
        }
        best_k = max(scores, key=lambda k: (scores[k], -k))
    labels = runs[best_k][0]
    algorithm = "kmeans_silhouette" if criterion == "silhouette" else "kmeans_inertia"
    clustering = build_sense_sets(labels, split, word=word, algorithm=algorithm)
    clustering.diagnostics = {
        "criterion": criterion,
        "scores": {int(k): float(v) for k, v in scores.items()},
        "chosen_k": int(best_k),
    }
    return clustering


def affinity_propagation(
    split: PeriodSplit,
    config: ClusteringConfig,
    word: str = "",
) -> SenseClustering:
    """Damped responsibility/availability message passing.

    Similarity is negative squared Euclidean distance and the shared
    preference is the median off-diagonal similarity. Iteration stops when
    the exemplar set is unchanged for ap_convergence_iter rounds; hitting
    ap_max_iter first returns the current exemplars with converged=False.
    """
    config.validate()
    pts = _prepare_metric(split.vectors, config.metric)
    n = len(pts)
    if n < 2:
        raise DataError(f"affinity propagation needs at least 2 points, got {n}")
    S = -_sq_dists(pts, pts)
    off_diagonal = S[~np.eye(n, dtype=bool)]
    np.fill_diagonal(S, np.median(off_diagonal))

    lam = config.ap_damping
    R = np.zeros((n, n))
    A = np.zeros((n, n))
    idx = np.arange(n)
    exemplars = np.empty(0, dtype=np.int64)
    stable = 0
    converged = False
    iterations = 0
    if np.ptp(off_diagonal) == 0.0:
        # degenerate instance: all points mutually equidistant (or identical)
        exemplars = np.array([0])
        converged = True
    else:
        last_key = None
        for iterations in range(1, config.ap_max_iter + 1):
            AS = A + S
            best_idx = AS.argmax(axis=1)
            best = AS[idx, best_idx]
            AS[idx, best_idx] = -np.inf
            second = AS.max(axis=1)
            R_new = S - best[:, None]
            R_new[idx, best_idx] = S[idx, best_idx] - second
            R = lam * R + (1.0 - lam) * R_new

            R_pos = np.maximum(R, 0.0)
            np.fill_diagonal(R_pos, R.diagonal())
            column = R_pos.sum(axis=0)
            A_new = column[None, :] - R_pos
            diag = A_new.diagonal().copy()
            A_new = np.minimum(A_new, 0.0)
            np.fill_diagonal(A_new, diag)
            A = lam * A + (1.0 - lam) * A_new

            exemplars = np.flatnonzero(R.diagonal() + A.diagonal() > 0.0)
            key = exemplars.tobytes()
            if key == last_key and len(exemplars) > 0:
                stable += 1
                if stable >= config.ap_convergence_iter:
                    converged = True
                    break
            else:
                stable = 0
            last_key = key
    if len(exemplars) == 0:
        exemplars = np.array([int((R.diagonal() + A.diagonal()).argmax())])
    labels = np.asarray(S[:, exemplars].argmax(axis=1), dtype=np.int64)
    labels[exemplars] = np.arange(len(exemplars))
    clustering = build_sense_sets(labels, split, word=word, algorithm="ap")
    clustering.converged = converged
    clustering.diagnostics = {
        "iterations": iterations,
        "exemplars": [int(e) for e in exemplars],
    }
    return clustering


def build_sense_sets(
    labels: Sequence[int] | np.ndarray,
    split: PeriodSplit,
    word: str = "",
    algorithm: str = "ap",
) -> SenseClustering:
    """Partition each period's ids by label and average member vectors.

    Senses with no members in a period carry no centroid for it; the union
    of member sets over senses reproduces each period's id set exactly.
    """
    lab = np.asarray(labels, dtype=np.int64)
    ids = split.ids
    periods = split.periods
    vectors = split.vectors
    if len(lab) != len(ids):
        raise DataError("labels and split length mismatch")
    m = int(lab.max()) + 1 if len(lab) else 0
    members: dict[int, dict[str, list[str]]] = {
        s: {"old": [], "new": []} for s in range(m)
    }
    sums: dict[int, dict[str, np.ndarray]] = {
        s: {"old": np.zeros(vectors.shape[1]), "new": np.zeros(vectors.shape[1])}
        for s in range(m)
    }
    for occurrence_id, period, label, vec in zip(ids, periods, lab, vectors):
        members[int(label)][period].append(occurrence_id)
        sums[int(label)][period] += vec
    counts = {
        s: {p: len(members[s][p]) for p in ("old", "new")} for s in range(m)
    }
    centroids: dict[int, dict[str, np.ndarray]] = {}
    for s in range(m):
        centroids[s] = {}
        for p in ("old", "new"):
            if counts[s][p]:
                centroids[s][p] = sums[s][p] / counts[s][p]
    return SenseClustering(
        word=word,
        algorithm=algorithm,
        m=m,
        labels={occurrence_id: int(label) for occurrence_id, label in zip(ids, lab)},
        members=members,
        counts=counts,
        centroids=centroids,
    )


def cluster_word(
    split: PeriodSplit, config: ClusteringConfig, word: str = ""
) -> SenseClustering:
    """Dispatch to the configured algorithm."""
    config.validate()
    if config.algorithm == "ap":
        return affinity_propagation(split, config, word=word)
    criterion = "silhouette" if config.algorithm == "kmeans_silhouette" else "inertia"
    return auto_k_kmeans(split, config, criterion, word=word)
