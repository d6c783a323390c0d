from __future__ import annotations

import numpy as np
import pytest

from helpers import split_from_points
from ssd_kit.clustering import ClusteringConfig, build_sense_sets, cluster_word
from ssd_kit.embeddings import CallableBackend
from ssd_kit.errors import ConfigError, DataError
from ssd_kit.evaluation import (
    ALL_METHODS,
    AnnotatedPair,
    assign_to_sense,
    binarize_rating,
    classify_pair_clustering,
    classify_pair_distance,
    combined_sense_centroids,
    run_benchmark,
    sweep_threshold,
)

CENTER_A = np.array([10.0, 0.0, 0.0, 0.0])
CENTER_B = np.array([0.0, 10.0, 0.0, 0.0])


def planted_backend() -> CallableBackend:
    """Sentences starting with 'aa' embed near one center, 'bb' near the other."""

    def embed(text: str, span: tuple[int, int]) -> np.ndarray:
        rng = np.random.default_rng(abs(hash((text, span))) % (2**32))
        base = CENTER_A if text.startswith("aa") else CENTER_B
        return base + rng.normal(scale=0.05, size=4)

    return CallableBackend(embed)


def pair(kind_a: str, kind_b: str, i: int, rating: int) -> AnnotatedPair:
    return AnnotatedPair(
        word="w",
        sentence_a=f"{kind_a} sentence {i} with w inside",
        span_a=(0, 2),
        sentence_b=f"{kind_b} other {i} with w inside",
        span_b=(0, 2),
        rating=rating,
    )


@pytest.fixture
def planted_clusterings():
    rng = np.random.default_rng(0)
    points = np.vstack([
        CENTER_A + rng.normal(scale=0.05, size=(20, 4)),
        CENTER_B + rng.normal(scale=0.05, size=(20, 4)),
    ])
    periods = (["old"] * 10 + ["new"] * 10) * 2
    split = split_from_points(points, periods)
    out = {}
    for method, algorithm in (
        ("ap", "ap"),
        ("km_silhouette", "kmeans_silhouette"),
        ("km_inertia", "kmeans_inertia"),
    ):
        clustering = cluster_word(
            split, ClusteringConfig(algorithm=algorithm, seed=0, n_init=5), word="w"
        )
        out[method] = {"w": clustering}
    return out


# ------------------------------------------------------------- binarize

def test_binarize_exhaustive():
    assert {r: binarize_rating(r) for r in (1, 2, 3, 4)} == {1: 0, 2: 0, 3: 1, 4: 1}


@pytest.mark.parametrize("bad", [0, 5, -1, "2", 2.0, True])
def test_binarize_rejects_out_of_range(bad):
    with pytest.raises(DataError):
        binarize_rating(bad)


def test_pair_rating_validated():
    with pytest.raises(DataError):
        pair("aa", "bb", 0, rating=7)


# ----------------------------------------------------------- classifiers

def test_same_centroid_means_no_change():
    # labels follow the split's id order (old rows first)
    clustering = build_sense_sets(
        [0, 1, 0, 1],
        split_from_points(
            np.vstack([CENTER_A, CENTER_B, CENTER_A, CENTER_B]),
            ["old", "old", "new", "new"],
        ),
    )
    assert classify_pair_clustering(CENTER_A, CENTER_A, clustering) == 0
    assert classify_pair_clustering(CENTER_A, CENTER_B, clustering) == 1


def test_assignment_is_argmin_over_centroids():
    rng = np.random.default_rng(1)
    centroids = {i: rng.normal(size=3) for i in range(5)}
    for _ in range(50):
        vec = rng.normal(size=3)
        expected = min(
            centroids, key=lambda s: float(((vec - centroids[s]) ** 2).sum())
        )
        assert assign_to_sense(vec, centroids) == expected


def test_combined_centroid_averages_periods():
    clustering = build_sense_sets(
        [0, 0],
        split_from_points(np.array([[1.0, 0.0], [0.0, 1.0]]), ["old", "new"]),
    )
    combined = combined_sense_centroids(clustering)
    assert np.allclose(combined[0], [0.5, 0.5])


def test_distance_classifier_identical_embeddings():
    vec = np.array([1.0, 2.0])
    assert classify_pair_distance(vec, vec, "cd", 0.5) == 0
    assert classify_pair_distance(vec, vec, "prt", 2.0) == 0


def test_distance_classifier_orthogonal_is_change():
    a = np.array([1.0, 0.0])
    b = np.array([0.0, 1.0])
    assert classify_pair_distance(a, b, "cd", 0.5) == 1
    assert classify_pair_distance(a, b, "prt", 2.0) == 1


def test_cd_boundary_counts_as_change():
    # thresholding is >=: a pair sitting exactly on the threshold is a change
    from ssd_kit.shift import cosine_similarity

    a = np.array([1.0, 0.0])
    b = np.array([0.5, np.sqrt(3) / 2])
    boundary = 1.0 - cosine_similarity(a, b)
    assert classify_pair_distance(a, b, "cd", boundary) == 1
    assert classify_pair_distance(a, b, "cd", boundary + 1e-12) == 0


def test_prt_nonpositive_similarity_is_change():
    a = np.array([1.0, 0.0])
    b = np.array([-1.0, 0.0])
    assert classify_pair_distance(a, b, "prt", 2.0) == 1


def test_unknown_method_rejected():
    with pytest.raises(ConfigError):
        classify_pair_distance(np.ones(2), np.ones(2), "jsd", 0.5)


# -------------------------------------------------------------- benchmark

def make_pairs() -> list[AnnotatedPair]:
    pairs = []
    for i in range(10):
        pairs.append(pair("aa", "aa", i, rating=1 if i % 2 else 2))        # no change
    for i in range(10):
        pairs.append(pair("aa", "bb", 100 + i, rating=4 if i % 2 else 3))  # change
    return pairs


def test_all_five_methods_reach_f1_one_on_planted_geometry(planted_clusterings):
    report = run_benchmark(
        make_pairs(), list(ALL_METHODS), planted_backend(), planted_clusterings
    )
    for result in report.results:
        assert result.valid
        assert result.f1 == 1.0, f"{result.method} fell short: {result.f1}"
    assert report.average_clustering == 1.0
    assert report.average_all == 1.0


def test_average_clustering_is_the_mean_of_three(planted_clusterings):
    # corrupt one clustering so its F1 drops, then check the average math
    broken = dict(planted_clusterings)
    merged = build_sense_sets(
        [0, 0, 0, 0],
        split_from_points(
            np.vstack([CENTER_A, CENTER_B, CENTER_A, CENTER_B]),
            ["old", "old", "new", "new"],
        ),
        word="w",
    )
    broken["ap"] = {"w": merged}  # single sense: every pair classified 0
    report = run_benchmark(
        make_pairs(), ["ap", "km_inertia", "km_silhouette"], planted_backend(), broken
    )
    by_method = {r.method: r.f1 for r in report.results}
    expected = (by_method["ap"] + by_method["km_inertia"] + by_method["km_silhouette"]) / 3
    assert report.average_clustering == pytest.approx(expected)
    assert by_method["ap"] == 0.0  # recall 0 against gold positives


def test_all_zero_predictions_give_zero_f1():
    pairs = [pair("aa", "aa", i, rating=4) for i in range(5)]
    report = run_benchmark(pairs, ["cd"], planted_backend())
    assert report.results[0].f1 == 0.0
    assert report.results[0].recall == 0.0


def test_cd_prt_symmetric_under_pair_swap(planted_clusterings):
    pairs = make_pairs()
    swapped = [
        AnnotatedPair(
            word=p.word,
            sentence_a=p.sentence_b,
            span_a=p.span_b,
            sentence_b=p.sentence_a,
            span_b=p.span_a,
            rating=p.rating,
        )
        for p in pairs
    ]
    backend = planted_backend()
    forward = run_benchmark(pairs, ["cd", "prt"], backend)
    backward = run_benchmark(swapped, ["cd", "prt"], backend)
    assert [r.f1 for r in forward.results] == [r.f1 for r in backward.results]


def test_pairs_without_clustering_are_skipped(planted_clusterings):
    pairs = make_pairs() + [
        AnnotatedPair(
            word="missing",
            sentence_a="aa x missing",
            span_a=(0, 2),
            sentence_b="bb y missing",
            span_b=(0, 2),
            rating=4,
        )
    ]
    report = run_benchmark(pairs, ["ap", "cd"], planted_backend(), planted_clusterings)
    by_method = {r.method: r for r in report.results}
    assert by_method["ap"].n_skipped == 1
    assert by_method["ap"].n_pairs == len(pairs) - 1
    assert by_method["cd"].n_skipped == 0


def test_method_with_all_pairs_skipped_is_invalid():
    report = run_benchmark(make_pairs(), ["ap"], planted_backend(), clusterings={})
    assert report.results[0].valid is False
    assert report.average_clustering is None


def test_empty_pairs_rejected():
    with pytest.raises(DataError):
        run_benchmark([], ["cd"], planted_backend())


def test_unknown_benchmark_method_rejected():
    with pytest.raises(ConfigError):
        run_benchmark(make_pairs(), ["word2vec"], planted_backend())


def test_per_word_breakdown_counts(planted_clusterings):
    report = run_benchmark(make_pairs(), ["cd"], planted_backend())
    breakdown = report.results[0].per_word_breakdown
    assert breakdown["w"]["n"] == 20
    assert breakdown["w"]["correct"] == 20


def test_sweep_finds_a_perfect_threshold():
    threshold, f1 = sweep_threshold(make_pairs(), planted_backend(), method="cd")
    assert f1 == 1.0
    assert 0.0 < threshold < 1.0


def test_pair_row_round_trip():
    p = pair("aa", "bb", 0, rating=3)
    assert AnnotatedPair.from_row(p.to_row()) == p
