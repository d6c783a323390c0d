"""End-to-end pipeline: clean, chunk, find, embed, cluster, shift, dwug.

One YAML config drives every stage; the run writes each stage's artifacts
under the output directory and finishes with a manifest listing every file
with its SHA-256, so reruns with identical inputs and seed are verifiable
by hash comparison.
"""

from __future__ import annotations

import hashlib
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml

from . import jsonl
from .clustering import ClusteringConfig, SenseClustering, cluster_word
from .corpus import Chunk, CleaningConfig, Document, chunk_documents, clean
from .embeddings import (
    EmbeddingStore,
    StoreBackend,
    fetch_embeddings,
    read_store,
    split_by_period,
    write_store,
)
from .errors import ConfigError, DataError, SsdKitError
from .occurrences import (
    Occurrence,
    TargetWord,
    find_occurrences,
    load_targets,
    occurrence_census,
)
from .projection import export_dwug, write_dwug_files
from .shift import FrequencyRule, rank_words, sense_shift
from .tokenizer import load_vocabulary

log = logging.getLogger(__name__)

STAGES = ("clean", "chunk", "find", "embed", "cluster", "shift", "dwug")

CLI_ALGORITHMS = {
    "ap": "ap",
    "km-sil": "kmeans_silhouette",
    "km-inertia": "kmeans_inertia",
}


@dataclass
class PipelineConfig:
    seed: int
    corpus_old: Path
    corpus_new: Path
    vocab: Path
    targets: Path
    store: Path
    out_dir: Path
    cleaning: CleaningConfig = field(default_factory=CleaningConfig)
    max_tokens: int = 256
    clustering: ClusteringConfig = field(default_factory=ClusteringConfig)
    min_fraction: float = 0.10
    binary_threshold: float = 0.5
    projection_method: str = "tsne"
    perplexity: float = 50.0
    tsne_iterations: int = 1000
    workers: int = 1

    def validate(self) -> None:
        problems: list[str] = []
        for name in ("corpus_old", "corpus_new", "vocab", "targets", "store"):
            path = getattr(self, name)
            if not Path(path).exists():
                problems.append(f"paths.{name}: {path} does not exist")
        if self.max_tokens < 16:
            problems.append(f"chunking.max_tokens must be >= 16, got {self.max_tokens}")
        if not 0.0 <= self.min_fraction < 0.5:
            problems.append(f"shift.min_fraction {self.min_fraction} outside [0, 0.5)")
        if self.projection_method not in ("tsne", "pca"):
            problems.append(
                f"projection.method must be tsne or pca, got {self.projection_method!r}"
            )
        if self.perplexity <= 0:
            problems.append(f"projection.perplexity must be positive, got {self.perplexity}")
        if self.workers < 1:
            problems.append(f"workers must be >= 1, got {self.workers}")
        try:
            self.cleaning.validate()
        except ConfigError as exc:
            problems.extend(exc.problems)
        try:
            self.clustering.validate()
        except ConfigError as exc:
            problems.extend(exc.problems)
        if problems:
            raise ConfigError(
                "pipeline config invalid:\n  " + "\n  ".join(problems), problems
            )

    def effective_dict(self) -> dict[str, Any]:
        return {
            "seed": self.seed,
            "paths": {
                "corpus_old": str(self.corpus_old),
                "corpus_new": str(self.corpus_new),
                "vocab": str(self.vocab),
                "targets": str(self.targets),
                "store": str(self.store),
                "out_dir": str(self.out_dir),
            },
            "cleaning": {
                "min_confidence": self.cleaning.min_confidence,
                "min_tokens": self.cleaning.min_tokens,
                "max_nonalpha": self.cleaning.max_nonalpha,
            },
            "chunking": {"max_tokens": self.max_tokens},
            "clustering": {
                "algorithm": self.clustering.algorithm,
                "k_min": self.clustering.k_min,
                "k_max": self.clustering.k_max,
                "ap_damping": self.clustering.ap_damping,
                "ap_max_iter": self.clustering.ap_max_iter,
                "ap_convergence_iter": self.clustering.ap_convergence_iter,
                "n_init": self.clustering.n_init,
                "metric": self.clustering.metric,
            },
            "shift": {
                "min_fraction": self.min_fraction,
                "binary_threshold": self.binary_threshold,
            },
            "projection": {
                "method": self.projection_method,
                "perplexity": self.perplexity,
                "iterations": self.tsne_iterations,
            },
            "workers": self.workers,
        }


def load_config(path: str | Path, overrides: dict[str, Any] | None = None) -> PipelineConfig:
    """Parse the YAML config; CLI overrides win over file values."""
    path = Path(path)
    try:
        raw = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: invalid YAML: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: config must be a mapping")
    overrides = overrides or {}
    problems: list[str] = []

    def section(name: str) -> dict[str, Any]:
        value = raw.get(name, {})
        if value is None:
            return {}
        if not isinstance(value, dict):
            problems.append(f"{name}: must be a mapping")
            return {}
        return value

    paths = section("paths")
    base = path.parent

    def resolve(name: str) -> Path:
        value = overrides.get(name) or paths.get(name)
        if value is None:
            problems.append(f"paths.{name}: missing")
            return base / f"<missing {name}>"
        return (base / value).resolve() if not Path(value).is_absolute() else Path(value)

    seed = overrides.get("seed", raw.get("seed"))
    if seed is None:
        problems.append("seed: missing (runs must be explicitly seeded)")
        seed = 0

    cleaning_raw = section("cleaning")
    chunking_raw = section("chunking")
    clustering_raw = section("clustering")
    shift_raw = section("shift")
    projection_raw = section("projection")

    algorithm = overrides.get("algorithm", clustering_raw.get("algorithm", "ap"))
    algorithm = CLI_ALGORITHMS.get(algorithm, algorithm)

    config = PipelineConfig(
        seed=int(seed),
        corpus_old=resolve("corpus_old"),
        corpus_new=resolve("corpus_new"),
        vocab=resolve("vocab"),
        targets=resolve("targets"),
        store=resolve("store"),
        out_dir=(
            Path(overrides["out_dir"])
            if overrides.get("out_dir")
            else (base / paths.get("out_dir", "out")).resolve()
        ),
        cleaning=CleaningConfig(
            min_confidence=float(cleaning_raw.get("min_confidence", 0.5)),
            min_tokens=int(cleaning_raw.get("min_tokens", 5)),
            max_nonalpha=float(cleaning_raw.get("max_nonalpha", 0.5)),
        ),
        max_tokens=int(chunking_raw.get("max_tokens", 256)),
        clustering=ClusteringConfig(
            algorithm=algorithm,
            k_min=int(clustering_raw.get("k_min", 2)),
            k_max=int(clustering_raw.get("k_max", 10)),
            ap_damping=float(clustering_raw.get("ap_damping", 0.975)),
            ap_max_iter=int(clustering_raw.get("ap_max_iter", 1000)),
            ap_convergence_iter=int(clustering_raw.get("ap_convergence_iter", 100)),
            seed=int(seed),
            n_init=int(clustering_raw.get("n_init", 10)),
            metric=clustering_raw.get("metric", "euclidean"),
        ),
        min_fraction=float(shift_raw.get("min_fraction", 0.10)),
        binary_threshold=float(shift_raw.get("binary_threshold", 0.5)),
        projection_method=projection_raw.get("method", "tsne"),
        perplexity=float(projection_raw.get("perplexity", 50.0)),
        tsne_iterations=int(projection_raw.get("iterations", 1000)),
        workers=int(overrides.get("workers", raw.get("workers", 1))),
    )
    if problems:
        raise ConfigError("pipeline config invalid:\n  " + "\n  ".join(problems), problems)
    return config


def _sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(65536), b""):
            digest.update(block)
    return digest.hexdigest()


@dataclass
class WordResult:
    word: str
    clustering: SenseClustering | None
    skipped_reason: str | None = None
    dwug_files: list[Path] = field(default_factory=list)


def _process_word(
    target: TargetWord,
    occurrences: list[Occurrence],
    store: EmbeddingStore,
    config: PipelineConfig,
    dwug_dir: Path,
) -> WordResult:
    word_occurrences = [o for o in occurrences if o.word == target.lemma]
    census = occurrence_census(
        word_occurrences, target.lemma, target.min_occurrences_per_period
    )
    if not census.sufficient:
        return WordResult(
            word=target.lemma,
            clustering=None,
            skipped_reason=(
                f"insufficient occurrences (old {census.count_old}, "
                f"new {census.count_new}, need {census.min_per_period} each)"
            ),
        )
    split = split_by_period(store, word_occurrences)
    clustering = cluster_word(split, config.clustering, word=target.lemma)
    params: dict[str, Any] = (
        {"perplexity": config.perplexity, "iterations": config.tsne_iterations}
        if config.projection_method == "tsne"
        else {}
    )
    export = export_dwug(
        clustering,
        split,
        method=config.projection_method,
        params=params,
        seed=config.seed,
    )
    files = write_dwug_files(export, dwug_dir)
    return WordResult(word=target.lemma, clustering=clustering, dwug_files=files)


def run_pipeline(config: PipelineConfig) -> dict[str, Any]:
    """Execute all stages; returns the manifest (also written to disk).

    A stage failure propagates with the stage named; nothing after it runs.
    """
    config.validate()
    out_dir = config.out_dir
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest: dict[str, Any] = {"config": config.effective_dict(), "stages": []}

    def record(stage: str, outputs: list[Path], **meta: Any) -> None:
        manifest["stages"].append(
            {
                "name": stage,
                "outputs": [
                    {
                        "path": str(p.relative_to(out_dir)),
                        "sha256": _sha256(p),
                    }
                    for p in sorted(outputs)
                ],
                **meta,
            }
        )

    stage = "clean"
    try:
        vocab = load_vocabulary(config.vocab)
        targets = load_targets(config.targets)

        cleaned: dict[str, list[Document]] = {}
        clean_outputs = []
        reports = {}
        for period, source in (("old", config.corpus_old), ("new", config.corpus_new)):
            row_errors: list[str] = []
            rows = [r for _, r in jsonl.read_rows_lenient(source, row_errors)]
            docs, report = clean(rows, config.cleaning, vocab)
            report.errors = row_errors + report.errors
            cleaned[period] = docs
            out_path = out_dir / f"cleaned_{period}.jsonl"
            jsonl.write_rows(out_path, (d.to_row() for d in docs))
            clean_outputs.append(out_path)
            reports[period] = report.to_dict()
        report_path = out_dir / "clean_report.json"
        jsonl.dump_json(report_path, reports)
        record(stage, clean_outputs + [report_path])

        stage = "chunk"
        chunks: list[Chunk] = []
        for period in ("old", "new"):
            chunks.extend(
                chunk_documents(cleaned[period], config.max_tokens, period, vocab)
            )
        chunks_path = out_dir / "chunks.jsonl"
        jsonl.write_rows(chunks_path, (c.to_row() for c in chunks))
        record(stage, [chunks_path], chunk_count=len(chunks))

        stage = "find"
        occurrences: list[Occurrence] = []
        censuses = []
        for target in targets:
            found = find_occurrences(chunks, target, vocab)
            occurrences.extend(found)
            censuses.append(
                occurrence_census(
                    found, target.lemma, target.min_occurrences_per_period
                ).to_dict()
            )
        occ_path = out_dir / "occurrences.jsonl"
        jsonl.write_rows(occ_path, (o.to_row() for o in occurrences))
        census_path = out_dir / "census.json"
        jsonl.dump_json(census_path, censuses)
        record(stage, [occ_path, census_path], occurrence_count=len(occurrences))

        stage = "embed"
        backend = StoreBackend(read_store(config.store))
        chunk_texts = {c.ref: c.text for c in chunks}
        store = fetch_embeddings(
            occurrences, chunk_texts, backend, model_tag=backend.store.model_tag
        )
        store_path = out_dir / "store.ssde"
        write_store(store, store_path)
        record(stage, [store_path], dimension=store.dimension)

        stage = "cluster"
        dwug_dir = out_dir / "dwug"
        if config.workers > 1:
            # pool.map preserves input order, so the merge stays deterministic
            with ThreadPoolExecutor(max_workers=config.workers) as pool:
                results = list(
                    pool.map(
                        lambda t: _process_word(t, occurrences, store, config, dwug_dir),
                        targets,
                    )
                )
        else:
            results = [
                _process_word(t, occurrences, store, config, dwug_dir) for t in targets
            ]
        senses_payload = [
            r.clustering.to_dict() for r in results if r.clustering is not None
        ]
        skipped = {
            r.word: r.skipped_reason for r in results if r.skipped_reason is not None
        }
        senses_path = out_dir / "senses.json"
        jsonl.dump_json(senses_path, senses_payload)
        record(stage, [senses_path], skipped_words=skipped)

        stage = "shift"
        rule = FrequencyRule(min_fraction=config.min_fraction)
        shift_reports = [
            sense_shift(r.clustering, rule) for r in results if r.clustering is not None
        ]
        shift_path = out_dir / "shift.json"
        jsonl.dump_json(
            shift_path,
            {
                "words": [r.to_dict() for r in shift_reports],
                "ranking": rank_words(shift_reports),
            },
        )
        record(stage, [shift_path])

        stage = "dwug"
        dwug_files = [p for r in results for p in r.dwug_files]
        record(stage, dwug_files, words=len(dwug_files) // 4 if dwug_files else 0)
    except SsdKitError as exc:
        raise type(exc)(f"pipeline stage {stage!r} failed: {exc}") from exc
    except Exception as exc:
        raise DataError(f"pipeline stage {stage!r} failed: {exc}") from exc

    manifest_path = out_dir / "manifest.json"
    jsonl.dump_json(manifest_path, manifest)
    log.info("pipeline complete: %d stages, manifest at %s", len(STAGES), manifest_path)
    return manifest
