"""`ssd-kit`: every pipeline stage as a subcommand plus `pipeline` itself.

Logs go to stderr (plain or JSON lines via --json-logs); data only to the
paths given. Exit codes: 0 success, 1 validation error, 2 data error,
3 backend error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import jsonl
from .clustering import ClusteringConfig, SenseClustering, cluster_word
from .corpus import Chunk, CleaningConfig, chunk_documents, clean
from .embeddings import (
    HttpBackend,
    StoreBackend,
    fetch_embeddings,
    read_store,
    split_by_period,
    write_store,
)
from .errors import BackendError, ConfigError, DataError
from .evaluation import load_pairs, run_benchmark
from .occurrences import find_occurrences, load_targets, occurrence_census
from .pipeline import CLI_ALGORITHMS, load_config, run_pipeline
from .projection import diachronic_neighbors, export_dwug, write_dwug_files
from .shift import FrequencyRule, rank_words, sense_shift
from .tokenizer import load_vocabulary

log = logging.getLogger("ssd_kit")

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_DATA = 2
EXIT_BACKEND = 3


class _JsonLogFormatter(logging.Formatter):
    def format(self, record: logging.LogRecord) -> str:
        return json.dumps(
            {
                "level": record.levelname.lower(),
                "logger": record.name,
                "message": record.getMessage(),
            },
            ensure_ascii=False,
        )


def _setup_logging(json_logs: bool, verbose: bool) -> None:
    handler = logging.StreamHandler(sys.stderr)
    if json_logs:
        handler.setFormatter(_JsonLogFormatter())
    else:
        handler.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO, handlers=[handler]
    )


def _load_chunks(path: str) -> list[Chunk]:
    return [Chunk.from_row(row) for _, row in jsonl.read_rows(path)]


def _load_senses(path: str) -> list[SenseClustering]:
    source = Path(path)
    if source.is_dir():
        clusterings = []
        for child in sorted(source.glob("*.json")):
            payload = jsonl.load_json(child)
            entries = payload if isinstance(payload, list) else [payload]
            clusterings.extend(SenseClustering.from_dict(e) for e in entries)
        return clusterings
    payload = jsonl.load_json(source)
    entries = payload if isinstance(payload, list) else [payload]
    return [SenseClustering.from_dict(e) for e in entries]


def _make_backend(spec: str):
    if spec.startswith("file:"):
        return StoreBackend(read_store(spec[len("file:"):]))
    if spec.startswith("http:") or spec.startswith("https:"):
        return HttpBackend(spec)
    raise ConfigError(f"backend must look like file:<store.ssde> or http://..., got {spec!r}")


def _cmd_clean(args: argparse.Namespace) -> int:
    vocab = load_vocabulary(args.vocab)
    config = CleaningConfig(
        min_confidence=args.min_confidence,
        min_tokens=args.min_tokens,
        max_nonalpha=args.max_nonalpha,
    )
    row_errors: list[str] = []
    rows = [r for _, r in jsonl.read_rows_lenient(args.infile, row_errors)]
    documents, report = clean(rows, config, vocab)
    report.errors = row_errors + report.errors
    jsonl.write_rows(args.out, (d.to_row() for d in documents))
    jsonl.dump_json(args.report, report.to_dict())
    log.info(
        "clean: %d rows in, %d out (%d removed)",
        report.rows_in + len(row_errors),
        report.rows_out,
        report.removals(),
    )
    return EXIT_OK


def _cmd_chunk(args: argparse.Namespace) -> int:
    vocab = load_vocabulary(args.vocab)
    documents = []
    from .corpus import Document

    for _, row in jsonl.read_rows(args.infile):
        documents.append(Document.from_row(row))
    chunks = chunk_documents(documents, args.max_tokens, args.period, vocab)
    count = jsonl.write_rows(args.out, (c.to_row() for c in chunks))
    log.info("chunk: %d documents -> %d chunks", len(documents), count)
    return EXIT_OK


def _cmd_find(args: argparse.Namespace) -> int:
    vocab = load_vocabulary(args.vocab)
    chunks = _load_chunks(args.corpus)
    targets = load_targets(args.targets)
    rows = []
    for target in targets:
        found = find_occurrences(chunks, target, vocab)
        census = occurrence_census(found, target.lemma, target.min_occurrences_per_period)
        log.info(
            "find: %s -> %d old / %d new (%s)",
            target.lemma,
            census.count_old,
            census.count_new,
            "sufficient" if census.sufficient else "insufficient",
        )
        rows.extend(o.to_row() for o in found)
    jsonl.write_rows(args.out, rows)
    return EXIT_OK


def _sample_per_period(occurrences, cap: int, seed: int):
    """Seeded down-sampling to at most `cap` occurrences per (word, period)."""
    import zlib

    import numpy as np

    groups: dict[tuple[str, str], list] = {}
    for occ in sorted(occurrences, key=lambda o: o.id):
        groups.setdefault((occ.word, occ.period), []).append(occ)
    kept = []
    for key in sorted(groups):
        members = groups[key]
        if len(members) > cap:
            rng = np.random.default_rng([seed, zlib.crc32("/".join(key).encode())])
            picks = rng.choice(len(members), size=cap, replace=False)
            members = [members[i] for i in sorted(picks)]
        kept.extend(members)
    kept.sort(key=lambda o: (o.chunk_ref[0], o.chunk_ref[1], o.char_start))
    return kept


def _cmd_embed(args: argparse.Namespace) -> int:
    from .occurrences import Occurrence

    occurrences = [Occurrence.from_row(r) for _, r in jsonl.read_rows(args.occurrences)]
    if args.max_per_period:
        before = len(occurrences)
        occurrences = _sample_per_period(occurrences, args.max_per_period, args.seed)
        log.info(
            "embed: sampled %d of %d occurrences (cap %d per word and period)",
            len(occurrences), before, args.max_per_period,
        )
    chunks = _load_chunks(args.corpus)
    backend = _make_backend(args.backend)
    model_tag = (
        backend.store.model_tag if isinstance(backend, StoreBackend) else args.backend
    )
    store = fetch_embeddings(
        occurrences, {c.ref: c.text for c in chunks}, backend, model_tag=model_tag
    )
    write_store(store, args.out)
    log.info("embed: %d records, dimension %d", len(store), store.dimension)
    return EXIT_OK


def _cmd_cluster(args: argparse.Namespace) -> int:
    from .occurrences import Occurrence

    store = read_store(args.store)
    occurrences = [Occurrence.from_row(r) for _, r in jsonl.read_rows(args.occurrences)]
    config = ClusteringConfig(
        algorithm=CLI_ALGORITHMS.get(args.algo, args.algo),
        k_min=args.k_min,
        k_max=args.k_max,
        ap_damping=args.damping,
        seed=args.seed,
        n_init=args.n_init,
    )
    payload = []
    for word in sorted({o.word for o in occurrences}):
        word_occurrences = [o for o in occurrences if o.word == word]
        split = split_by_period(store, word_occurrences)
        clustering = cluster_word(split, config, word=word)
        log.info("cluster: %s -> %d senses (%s)", word, clustering.m, config.algorithm)
        payload.append(clustering.to_dict())
    jsonl.dump_json(args.out, payload)
    return EXIT_OK


def _cmd_shift(args: argparse.Namespace) -> int:
    clusterings = _load_senses(args.senses)
    rule = FrequencyRule(min_fraction=args.min_fraction)
    reports = [sense_shift(c, rule) for c in clusterings]
    jsonl.dump_json(
        args.out,
        {"words": [r.to_dict() for r in reports], "ranking": rank_words(reports)},
    )
    log.info("shift: %d words scored", len(reports))
    return EXIT_OK


def _cmd_dwug(args: argparse.Namespace) -> int:
    from .occurrences import Occurrence

    store = read_store(args.store)
    occurrences = [Occurrence.from_row(r) for _, r in jsonl.read_rows(args.occurrences)]
    clusterings = {c.word: c for c in _load_senses(args.senses)}
    params = (
        {"perplexity": args.perplexity, "iterations": args.iterations}
        if args.method == "tsne"
        else {}
    )
    for word, clustering in sorted(clusterings.items()):
        word_occurrences = [o for o in occurrences if o.word == word]
        if not word_occurrences:
            log.warning("dwug: no occurrences for %s, skipping", word)
            continue
        split = split_by_period(store, word_occurrences)
        export = export_dwug(
            clustering, split, method=args.method, params=params, seed=args.seed
        )
        files = write_dwug_files(export, args.out_dir)
        log.info("dwug: %s -> %d files", word, len(files))
    return EXIT_OK


def _cmd_neighbors(args: argparse.Namespace) -> int:
    clusterings = _load_senses(args.senses)
    by_word = {c.word: c for c in clusterings}
    words = args.words.split(",") if args.words else sorted(by_word)
    reports = []
    for word in words:
        if word not in by_word:
            raise DataError(f"no clustering for word {word!r} in {args.senses}")
        report = diachronic_neighbors(
            by_word[word], list(by_word.values()), args.period, top=args.top
        )
        reports.append(report.to_dict())
        shown = ", ".join(f"{w} ({s:.3f})" for w, s in report.neighbors)
        log.info("neighbors of %s (%s): %s", word, args.period, shown)
    if args.out:
        jsonl.dump_json(args.out, reports)
    else:
        json.dump(reports, sys.stdout, ensure_ascii=False, indent=2)
        sys.stdout.write("\n")
    return EXIT_OK


def _cmd_eval(args: argparse.Namespace) -> int:
    pairs = load_pairs(args.pairs)
    methods = args.methods.split(",")
    rename = {"km-sil": "km_silhouette", "km-inertia": "km_inertia"}
    methods = [rename.get(m, m) for m in methods]
    backend_spec = args.backend or (f"file:{args.store}" if args.store else None)
    if backend_spec is None:
        raise ConfigError("eval needs --backend or --store for pair embeddings")
    backend = _make_backend(backend_spec)
    clusterings: dict[str, dict[str, SenseClustering]] = {}
    senses_dir = Path(args.senses) if args.senses else None
    if senses_dir is not None:
        for method, filename in {
            "ap": "ap.json",
            "km_silhouette": "km-sil.json",
            "km_inertia": "km-inertia.json",
        }.items():
            path = senses_dir / filename
            if path.exists():
                clusterings[method] = {c.word: c for c in _load_senses(str(path))}
    report = run_benchmark(
        pairs,
        methods,
        backend,
        clusterings=clusterings,
        cd_threshold=args.cd_threshold,
        prt_threshold=args.prt_threshold,
    )
    payload = report.to_dict()
    if args.sweep:
        from .evaluation import sweep_threshold

        best_threshold, best_f1 = sweep_threshold(pairs, backend, method=args.sweep)
        payload["sweep"] = {
            "method": args.sweep, "best_threshold": best_threshold, "best_f1": best_f1,
        }
        log.info("eval sweep: %s best threshold %.3f (F1 %.4f)",
                 args.sweep, best_threshold, best_f1)
    jsonl.dump_json(args.out, payload)
    for result in report.results:
        log.info(
            "eval: %s F1=%.4f (precision %.4f, recall %.4f, %d pairs, %d skipped)",
            result.method,
            result.f1,
            result.precision,
            result.recall,
            result.n_pairs,
            result.n_skipped,
        )
    if report.average_clustering is not None:
        log.info("eval: average clustering F1=%.4f", report.average_clustering)
    if report.average_all is not None:
        log.info("eval: average all F1=%.4f", report.average_all)
    return EXIT_OK


def _cmd_pipeline(args: argparse.Namespace) -> int:
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.out_dir:
        overrides["out_dir"] = args.out_dir
    if args.workers is not None:
        overrides["workers"] = args.workers
    if args.algo:
        overrides["algorithm"] = args.algo
    config = load_config(args.config, overrides)
    manifest = run_pipeline(config)
    log.info(
        "pipeline: %d stages complete, manifest %s",
        len(manifest["stages"]),
        config.out_dir / "manifest.json",
    )
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ssd-kit",
        description="semantic shift detection over diachronic corpora",
    )
    parser.add_argument("--json-logs", action="store_true", help="emit JSON log lines")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("clean", help="apply the corpus cleaning filters")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--report", required=True)
    p.add_argument("--vocab", required=True)
    p.add_argument("--min-confidence", type=float, default=0.5,
                   help="drop rows with OCR confidence not above this (default 0.5)")
    p.add_argument("--min-tokens", type=int, default=5,
                   help="drop rows with fewer tokens than this (default 5)")
    p.add_argument("--max-nonalpha", type=float, default=0.5,
                   help="drop rows with a higher non-alphabetic ratio (default 0.5)")
    p.set_defaults(func=_cmd_clean)

    p = sub.add_parser("chunk", help="split documents to the token budget")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--vocab", required=True)
    p.add_argument("--max-tokens", type=int, default=256,
                   help="token budget per chunk (default 256)")
    p.add_argument("--period", choices=("old", "new"), required=True)
    p.set_defaults(func=_cmd_chunk)

    p = sub.add_parser("find", help="find target word occurrences")
    p.add_argument("--corpus", required=True, help="chunks JSONL")
    p.add_argument("--targets", required=True)
    p.add_argument("--vocab", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_find)

    p = sub.add_parser("embed", help="attach embeddings to occurrences")
    p.add_argument("--occurrences", required=True)
    p.add_argument("--corpus", required=True, help="chunks JSONL")
    p.add_argument("--backend", required=True, help="file:<store.ssde> or http:<url>")
    p.add_argument("--max-per-period", type=int, default=0,
                   help="seeded cap per (word, period); 0 disables sampling")
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_embed)

    p = sub.add_parser("cluster", help="cluster usages into senses")
    p.add_argument("--store", required=True)
    p.add_argument("--occurrences", required=True)
    p.add_argument("--algo", choices=tuple(CLI_ALGORITHMS), default="ap",
                   help="clustering algorithm (default ap, damping 0.975)")
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--k-min", type=int, default=2)
    p.add_argument("--k-max", type=int, default=10)
    p.add_argument("--damping", type=float, default=0.975,
                   help="affinity propagation damping (default 0.975)")
    p.add_argument("--n-init", type=int, default=10)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_cluster)

    p = sub.add_parser("shift", help="score per-sense semantic shift")
    p.add_argument("--senses", required=True)
    p.add_argument("--min-fraction", type=float, default=0.10,
                   help="presence floor as a fraction of the period (default 0.10)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_shift)

    p = sub.add_parser("dwug", help="export DWUG projections")
    p.add_argument("--senses", required=True)
    p.add_argument("--store", required=True)
    p.add_argument("--occurrences", required=True)
    p.add_argument("--method", choices=("tsne", "pca"), default="tsne")
    p.add_argument("--perplexity", type=float, default=50.0,
                   help="t-SNE perplexity (default 50)")
    p.add_argument("--iterations", type=int, default=1000)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=_cmd_dwug)

    p = sub.add_parser("neighbors", help="diachronic nearest-word comparison")
    p.add_argument("--senses", required=True)
    p.add_argument("--words", help="comma-separated targets (default: all)")
    p.add_argument("--period", choices=("old", "new"), required=True)
    p.add_argument("--top", type=int, default=5)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_neighbors)

    p = sub.add_parser("eval", help="binary change detection benchmark")
    p.add_argument("--pairs", required=True)
    p.add_argument("--senses", help="directory with ap.json / km-sil.json / km-inertia.json")
    p.add_argument("--store", help="store used to embed the pair usages (file backend)")
    p.add_argument("--backend", help="file:<store.ssde> or http:<url>; defaults to --store")
    p.add_argument("--methods", default="ap,km-sil,km-inertia,cd,prt")
    p.add_argument("--cd-threshold", type=float, default=0.5,
                   help="cosine distance decision threshold (default 0.5)")
    p.add_argument("--prt-threshold", type=float, default=2.0,
                   help="inverted-similarity decision threshold (default 2.0)")
    p.add_argument("--sweep", choices=("cd", "prt"),
                   help="also report the best-F1 threshold for a distance method")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("pipeline", help="run every stage from one config file")
    p.add_argument("--config", required=True, help="YAML pipeline config")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out-dir", default=None)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--algo", choices=tuple(CLI_ALGORITHMS), default=None)
    p.set_defaults(func=_cmd_pipeline)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    _setup_logging(args.json_logs, args.verbose)
    try:
        return args.func(args)
    except ConfigError as exc:
        log.error("%s", exc)
        return EXIT_CONFIG
    except BackendError as exc:
        log.error("%s", exc)
        if exc.missing_ids:
            log.error("missing ids: %s%s", exc.missing_ids[:10],
                      " ..." if len(exc.missing_ids) > 10 else "")
        return EXIT_BACKEND
    except DataError as exc:
        log.error("%s", exc)
        return EXIT_DATA
    except OSError as exc:
        log.error("%s", exc)
        return EXIT_DATA


if __name__ == "__main__":
    raise SystemExit(main())
