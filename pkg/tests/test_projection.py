from __future__ import annotations

import numpy as np
import pytest

from helpers import brute_force_pca_2d, make_blobs, split_from_points, three_blob_instance
from ssd_kit.clustering import ClusteringConfig, cluster_word
from ssd_kit.errors import ConfigError, DataError
from ssd_kit.projection import (
    NeighborReport,
    diachronic_neighbors,
    dominant_sense_centroid,
    effective_perplexity,
    export_dwug,
    pca_2d,
    tsne_2d,
    write_dwug_files,
)


# --------------------------------------------------------------------- pca

def test_pca_on_2d_data_is_an_isometry():
    rng = np.random.default_rng(0)
    pts = rng.normal(size=(40, 2))
    pts -= pts.mean(axis=0)
    projected = pca_2d(pts, seed=0)
    original = np.linalg.norm(pts[:, None] - pts[None, :], axis=2)
    mapped = np.linalg.norm(projected[:, None] - projected[None, :], axis=2)
    assert np.allclose(original, mapped, atol=1e-9)


def test_pca_collinear_data_has_zero_second_coordinate():
    rng = np.random.default_rng(1)
    direction = rng.normal(size=10)
    pts = np.outer(rng.normal(size=30), direction)
    projected = pca_2d(pts, seed=0)
    assert np.all(np.abs(projected[:, 1]) < 1e-9)


def test_pca_component_variances_ordered():
    rng = np.random.default_rng(2)
    pts = rng.normal(size=(50, 5)) * np.array([5.0, 2.0, 1.0, 0.5, 0.1])
    projected = pca_2d(pts, seed=0)
    assert projected[:, 0].var() >= projected[:, 1].var()


def test_pca_matches_eigendecomposition_oracle():
    rng = np.random.default_rng(3)
    for _ in range(20):
        n = int(rng.integers(5, 100))
        d = int(rng.integers(2, 20))
        pts = rng.normal(size=(n, d)) * rng.uniform(0.5, 3.0, size=d)
        mine = pca_2d(pts, seed=0)
        oracle = brute_force_pca_2d(pts)
        for column in range(2):
            direct = np.abs(mine[:, column] - oracle[:, column]).max()
            flipped = np.abs(mine[:, column] + oracle[:, column]).max()
            assert min(direct, flipped) < 1e-8


def test_pca_identical_points_give_zeros():
    pts = np.ones((5, 3))
    assert np.allclose(pca_2d(pts, seed=0), 0.0)


def test_pca_input_requirements():
    with pytest.raises(DataError):
        pca_2d(np.zeros((2, 3)))
    with pytest.raises(DataError):
        pca_2d(np.zeros((5, 1)))


def test_pca_sign_convention_is_stable():
    rng = np.random.default_rng(4)
    pts = rng.normal(size=(30, 4))
    assert np.allclose(pca_2d(pts, seed=0), pca_2d(pts, seed=99))


# -------------------------------------------------------------------- tsne

def test_effective_perplexity_rule():
    assert effective_perplexity(20, 50.0) == pytest.approx(19 / 3, abs=1e-9)
    assert effective_perplexity(200, 30.0) == 30.0
    with pytest.raises(ConfigError):
        effective_perplexity(10, 0.0)


def test_tsne_needs_five_points():
    with pytest.raises(DataError):
        tsne_2d(np.zeros((4, 3)), perplexity=5.0)


def test_tsne_kl_is_finite_nonnegative_every_iteration():
    rng = np.random.default_rng(5)
    pts = rng.normal(size=(30, 4))
    _, diagnostics = tsne_2d(
        pts, perplexity=10.0, seed=0, iterations=300, return_diagnostics=True
    )
    assert len(diagnostics.kl_history) == 300
    assert all(np.isfinite(v) and v >= 0.0 for v in diagnostics.kl_history)


def test_tsne_separates_two_blobs():
    rng = np.random.default_rng(6)
    points, truth = make_blobs(rng, np.array([[25.0] * 6, [-25.0] * 6]), 30, sigma=1.0)
    layout = tsne_2d(points, perplexity=50.0, seed=0, iterations=600)
    blob_a = layout[truth == 0]
    blob_b = layout[truth == 1]
    centroid_gap = np.linalg.norm(blob_a.mean(axis=0) - blob_b.mean(axis=0))
    spread = max(
        np.linalg.norm(blob_a - blob_a.mean(axis=0), axis=1).max(),
        np.linalg.norm(blob_b - blob_b.mean(axis=0), axis=1).max(),
    )
    assert centroid_gap > 3.0 * spread


def test_tsne_kl_monotone_after_exaggeration():
    # assert over the final 500 iterations, past the transient where the
    # exaggeration lifts; momentum may still cause <=1% upticks
    rng = np.random.default_rng(7)
    pts = rng.normal(size=(40, 5))
    _, diagnostics = tsne_2d(
        pts, perplexity=15.0, seed=0, iterations=1000, return_diagnostics=True
    )
    window = diagnostics.kl_history[500:]
    for before, after in zip(window, window[1:]):
        assert after <= before * 1.01 + 1e-12
    assert window[-1] <= window[0]


def test_tsne_deterministic_under_seed():
    rng = np.random.default_rng(8)
    pts = rng.normal(size=(25, 4))
    a = tsne_2d(pts, perplexity=8.0, seed=3, iterations=200)
    b = tsne_2d(pts, perplexity=8.0, seed=3, iterations=200)
    assert np.array_equal(a, b)


# ------------------------------------------------------------- dwug export

@pytest.fixture
def clustered_word():
    points, _ = three_blob_instance(seed=9, n=60, d=8)
    # make the third blob old-only so one sense vanishes from the new period
    periods = (["old"] * 10 + ["new"] * 10) * 2 + ["old"] * 20
    split = split_from_points(points, periods)
    clustering = cluster_word(
        split, ClusteringConfig(algorithm="ap", seed=0), word="mujeres"
    )
    return clustering, split


def test_dwug_views_partition_points(clustered_word):
    clustering, split = clustered_word
    export = export_dwug(clustering, split, method="pca", seed=0)
    combined = export.view("combined")
    assert len(combined) == len(split.old_ids) + len(split.new_ids)
    old_ids = {p["occurrence_id"] for p in export.view("old")}
    new_ids = {p["occurrence_id"] for p in export.view("new")}
    assert old_ids.isdisjoint(new_ids)
    assert old_ids | new_ids == {p["occurrence_id"] for p in combined}


def test_dwug_old_only_sense_missing_from_new_view(clustered_word):
    clustering, split = clustered_word
    old_only = [
        s for s, c in clustering.counts.items() if c["old"] > 0 and c["new"] == 0
    ]
    assert old_only, "fixture must plant an old-only sense"
    export = export_dwug(clustering, split, method="pca", seed=0)
    new_senses = {p["sense"] for p in export.view("new")}
    old_senses = {p["sense"] for p in export.view("old")}
    for sense in old_only:
        assert sense not in new_senses
        assert sense in old_senses


def test_dwug_same_seed_identical(clustered_word):
    clustering, split = clustered_word
    params = {"perplexity": 10.0, "iterations": 150}
    a = export_dwug(clustering, split, method="tsne", params=params, seed=5)
    b = export_dwug(clustering, split, method="tsne", params=params, seed=5)
    assert a.points == b.points


def test_dwug_records_effective_perplexity(clustered_word):
    clustering, split = clustered_word
    export = export_dwug(
        clustering, split, method="tsne", params={"perplexity": 50.0, "iterations": 50}, seed=0
    )
    assert export.params["effective_perplexity"] == pytest.approx(59 / 3)


def test_dwug_unknown_method_rejected(clustered_word):
    clustering, split = clustered_word
    with pytest.raises(ConfigError):
        export_dwug(clustering, split, method="umap")


def test_dwug_files_written(tmp_path, clustered_word):
    clustering, split = clustered_word
    export = export_dwug(clustering, split, method="pca", seed=0)
    files = write_dwug_files(export, tmp_path)
    names = {f.name for f in files}
    assert names == {
        "mujeres.json", "mujeres_old.svg", "mujeres_new.svg", "mujeres_combined.svg"
    }
    svg = (tmp_path / "mujeres_old.svg").read_text()
    assert svg.startswith("<svg")
    assert "circle" in svg


# --------------------------------------------------------------- neighbors

def build_single_sense(word: str, center, periods=("old", "new")):
    points = np.vstack([center, center]).astype(float)
    split = split_from_points(points, list(periods))
    from ssd_kit.clustering import build_sense_sets

    return build_sense_sets([0, 0], split, word=word)


def test_dominant_sense_is_the_most_frequent():
    points = np.vstack([np.tile([1.0, 0.0], (40, 1)), np.tile([0.0, 1.0], (10, 1))])
    periods = ["old"] * 50
    split = split_from_points(points, periods)
    from ssd_kit.clustering import build_sense_sets

    clustering = build_sense_sets([0] * 40 + [1] * 10, split, word="w")
    assert np.allclose(dominant_sense_centroid(clustering, "old"), [1.0, 0.0])


def test_dominant_sense_tie_breaks_low():
    points = np.vstack([np.tile([1.0, 0.0], (25, 1)), np.tile([0.0, 1.0], (25, 1))])
    split = split_from_points(points, ["old"] * 50)
    from ssd_kit.clustering import build_sense_sets

    clustering = build_sense_sets([0] * 25 + [1] * 25, split, word="w")
    assert np.allclose(dominant_sense_centroid(clustering, "old"), [1.0, 0.0])


def test_dominant_sense_empty_period_is_an_error():
    clustering = build_single_sense("w", [1.0, 0.0], periods=("old", "old"))
    with pytest.raises(DataError):
        dominant_sense_centroid(clustering, "new")


def test_neighbors_identical_centroid_ranks_first():
    target = build_single_sense("target", [1.0, 1.0])
    twin = build_single_sense("twin", [2.0, 2.0])  # same direction: CS = 1
    other = build_single_sense("other", [1.0, 0.0])
    report = diachronic_neighbors(target, [target, twin, other], "old")
    assert report.neighbors[0][0] == "twin"
    assert report.neighbors[0][1] == pytest.approx(1.0)
    assert report.short is True  # only 2 candidates survive self-exclusion


def test_neighbors_sorted_and_capped_at_top():
    rng = np.random.default_rng(10)
    target = build_single_sense("t", [1.0, 0.0, 0.0])
    candidates = [
        build_single_sense(f"c{i}", rng.normal(size=3)) for i in range(9)
    ]
    report = diachronic_neighbors(target, candidates, "old", top=5)
    assert len(report.neighbors) == 5
    sims = [s for _, s in report.neighbors]
    assert sims == sorted(sims, reverse=True)
    assert report.short is False
    assert isinstance(report, NeighborReport)
    assert all(word != "t" for word, _ in report.neighbors)


def test_neighbor_rankings_can_differ_between_periods():
    target_points = np.array([[1.0, 0.0], [0.0, 1.0]])
    split = split_from_points(target_points, ["old", "new"])
    from ssd_kit.clustering import build_sense_sets

    target = build_sense_sets([0, 0], split, word="revolucion")
    near_old = build_single_sense("sangre", [1.0, 0.05])
    near_new = build_single_sense("razon", [0.05, 1.0])
    old_rank = diachronic_neighbors(target, [near_old, near_new], "old")
    new_rank = diachronic_neighbors(target, [near_old, near_new], "new")
    assert old_rank.neighbors[0][0] == "sangre"
    assert new_rank.neighbors[0][0] == "razon"
