"""Independent oracles and data builders shared across the test suite.

Everything here is deliberately brute-force: these implementations check
the library, so they must not share code paths with it.
"""

from __future__ import annotations

import math
from collections import Counter

import numpy as np

from ssd_kit.embeddings import PeriodSplit


def adjusted_rand_index(labels_a, labels_b) -> float:
    """Pair-counting ARI, straight from the contingency-table definition."""
    labels_a = list(labels_a)
    labels_b = list(labels_b)
    assert len(labels_a) == len(labels_b)
    n = len(labels_a)
    contingency: Counter = Counter(zip(labels_a, labels_b))
    sum_comb = sum(math.comb(c, 2) for c in contingency.values())
    sum_a = sum(math.comb(c, 2) for c in Counter(labels_a).values())
    sum_b = sum(math.comb(c, 2) for c in Counter(labels_b).values())
    total = math.comb(n, 2)
    expected = sum_a * sum_b / total if total else 0.0
    max_index = (sum_a + sum_b) / 2.0
    if max_index == expected:
        return 1.0
    return (sum_comb - expected) / (max_index - expected)


def brute_force_silhouette(points, labels) -> float:
    """Quadratic-time reference silhouette, one pure-python loop per point."""
    pts = [list(map(float, p)) for p in np.asarray(points)]
    labels = list(labels)
    n = len(pts)

    def dist(i, j):
        return math.sqrt(sum((a - b) ** 2 for a, b in zip(pts[i], pts[j])))

    clusters = sorted(set(labels))
    members = {c: [i for i in range(n) if labels[i] == c] for c in clusters}
    scores = []
    for i in range(n):
        own = labels[i]
        if len(members[own]) == 1:
            scores.append(0.0)
            continue
        a = sum(dist(i, j) for j in members[own] if j != i) / (len(members[own]) - 1)
        b = min(
            sum(dist(i, j) for j in members[c]) / len(members[c])
            for c in clusters
            if c != own
        )
        denom = max(a, b)
        scores.append(0.0 if denom == 0.0 else (b - a) / denom)
    return sum(scores) / n


def brute_force_pca_2d(points) -> np.ndarray:
    """Covariance eigendecomposition done longhand (no shared code path)."""
    pts = np.asarray(points, dtype=np.float64)
    centered = pts - pts.mean(axis=0)
    cov = np.cov(centered, rowvar=False, bias=False)
    eigenvalues, eigenvectors = np.linalg.eig(cov)
    order = np.argsort(eigenvalues.real)[::-1][:2]
    return centered @ eigenvectors[:, order].real


def make_blobs(
    rng: np.random.Generator,
    centers: np.ndarray,
    per_blob: int,
    sigma: float = 1.0,
) -> tuple[np.ndarray, np.ndarray]:
    points = np.vstack(
        [rng.normal(c, sigma, size=(per_blob, len(c))) for c in centers]
    )
    truth = np.repeat(np.arange(len(centers)), per_blob)
    return points, truth


def three_blob_instance(seed: int, n: int = 150, d: int = 8) -> tuple[np.ndarray, np.ndarray]:
    """Centroid separation >= 10x the unit spread (pairwise distance >= 40)."""
    rng = np.random.default_rng(seed)
    centers = np.array(
        [[10.0] * d, [-10.0] * d, [10.0] * (d // 2) + [-10.0] * (d - d // 2)]
    )
    return make_blobs(rng, centers, n // 3)


def one_blob_instance(seed: int, n: int = 120, d: int = 128) -> np.ndarray:
    """Single isotropic cloud (one axis stretched) including its center point."""
    rng = np.random.default_rng(seed)
    scale = np.ones(d)
    scale[0] = 3.0
    cloud = rng.normal(0.0, 1.0, size=(n, d)) * scale
    cloud[0] = 0.0
    return cloud


def split_from_points(
    points: np.ndarray, periods: list[str] | None = None
) -> PeriodSplit:
    """Wrap raw vectors as a PeriodSplit; defaults to a half/half period split."""
    points = np.asarray(points, dtype=np.float64)
    n = len(points)
    if periods is None:
        periods = ["old"] * (n // 2) + ["new"] * (n - n // 2)
    old_idx = [i for i, p in enumerate(periods) if p == "old"]
    new_idx = [i for i, p in enumerate(periods) if p == "new"]
    dim = points.shape[1]
    return PeriodSplit(
        old_ids=[f"occ-{i:04d}" for i in old_idx],
        new_ids=[f"occ-{i:04d}" for i in new_idx],
        old_vectors=points[old_idx] if old_idx else np.empty((0, dim)),
        new_vectors=points[new_idx] if new_idx else np.empty((0, dim)),
    )


def assert_partition(clustering, split: PeriodSplit) -> None:
    """Check the member sets are disjoint and exhaustive per period."""
    for period, ids in (("old", split.old_ids), ("new", split.new_ids)):
        seen: list[str] = []
        for sense in clustering.members:
            seen.extend(clustering.members[sense][period])
        assert sorted(seen) == sorted(ids), f"{period} member sets are not a partition"
        assert len(seen) == len(set(seen)), f"{period} member sets overlap"
        for sense in clustering.counts:
            assert clustering.counts[sense][period] == len(
                clustering.members[sense][period]
            )
            if clustering.counts[sense][period]:
                assert period in clustering.centroids[sense]
            else:
                assert period not in clustering.centroids.get(sense, {})
