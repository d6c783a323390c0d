"""Deterministic synthetic corpus for demos and end-to-end tests.

Five target words with planted senses: one stays stable, two keep both
senses with drifting mixtures, one gains a sense in the modern period and
one loses a sense to the 10% frequency floor. Embeddings are Gaussian
clouds around per-(word, sense) centers, seeded per occurrence id so the
store is byte-identical across runs.

Run `python -m ssd_kit.synthetic --out <dir>` to materialize the corpus,
vocabulary, targets, embedding store and a ready pipeline config.
"""

from __future__ import annotations

import argparse
import zlib
from pathlib import Path

import numpy as np

from . import jsonl
from .corpus import CleaningConfig, Document, chunk_documents, clean
from .embeddings import EmbeddingStore, write_store
from .occurrences import TargetWord, find_occurrences
from .tokenizer import Vocabulary, save_vocabulary

DIMENSION = 16
MAX_TOKENS = 64
NOISE_SIGMA = 0.5

FILLER = (
    "el la los las un una de del en con por para que se su al lo como mas "
    "pero sobre entre cuando donde tiempo vida casa ciudad pueblo historia "
    "dia noche ano siglo mundo tierra agua camino nombre parte forma manera "
    "momento lugar hombre persona trabajo fuerza razon verdad obra palabra"
).split()

SENSE_CONTEXTS = {
    ("rey", 0): "corona trono palacio reino corte monarca".split(),
    ("gente", 0): "plaza mercado calle multitud vecinos fiesta".split(),
    ("gente", 1): "nacion pais costumbres cultura region lengua".split(),
    ("luces", 0): "lampara noche calle farol brillo claridad".split(),
    ("luces", 1): "ideas razon ilustracion saber ingenio talento".split(),
    ("infancia", 0): "ninos escuela juego familia madre cuidado".split(),
    ("infancia", 1): "nacion republica origen desarrollo comienzo etapa".split(),
    ("sentimiento", 0): "moral virtud espiritu religion arte elevado".split(),
    ("sentimiento", 1): "temor esperanza alegria corazon personal emocion".split(),
}

# docs per (word, sense) and period; one occurrence per document
SENSE_PLAN = {
    "rey": {"old": {0: 40}, "new": {0: 40}},
    "gente": {"old": {0: 25, 1: 15}, "new": {0: 20, 1: 20}},
    "luces": {"old": {0: 22, 1: 18}, "new": {0: 24, 1: 16}},
    "infancia": {"old": {0: 40}, "new": {0: 25, 1: 15}},
    # sense 0 drops to 2/40 = 5% in new: below the 10% floor, reported lost
    "sentimiento": {"old": {0: 12, 1: 28}, "new": {0: 2, 1: 38}},
}

SURFACE_FORMS = {"gente": ("jente",), "luces": ("luzes",)}

TARGET_WORDS = tuple(SENSE_PLAN)


def _occurrence_rng(seed: int, occurrence_id: str) -> np.random.Generator:
    return np.random.default_rng([seed, zlib.crc32(occurrence_id.encode("utf-8"))])


def build_vocabulary() -> Vocabulary:
    words = set(FILLER)
    for context in SENSE_CONTEXTS.values():
        words.update(context)
    words.update(TARGET_WORDS)
    for forms in SURFACE_FORMS.values():
        words.update(forms)
    words.update({"texto", "repetido", "prueba", "duplicados", "muy", "corto"})
    tokens = ["[UNK]", "##.", "##,"] + sorted(words)
    return Vocabulary(tokens=tuple(tokens), cased=False)


def _sentence(rng: np.random.Generator, word_form: str, context: list[str]) -> str:
    lead = rng.choice(FILLER, size=3)
    ctx = rng.choice(context, size=2, replace=False)
    tail = rng.choice(FILLER, size=2)
    return f"{lead[0]} {lead[1]} {ctx[0]} {word_form} {ctx[1]} {lead[2]} {tail[0]} {tail[1]}."


def _filler_sentence(rng: np.random.Generator) -> str:
    words = rng.choice(FILLER, size=int(rng.integers(6, 12)))
    return " ".join(words) + "."


def _dirty_rows(period: str) -> list[dict]:
    base = f"{period}-dirty"
    return [
        {"id": f"{base}-dup-a", "source": "synthetic", "year": 1850 if period == "old" else 2000,
         "text": "texto repetido para la prueba de duplicados."},
        {"id": f"{base}-dup-b", "source": "synthetic", "year": 1851 if period == "old" else 2001,
         "text": "texto repetido para la prueba de duplicados."},
        {"id": f"{base}-nonalpha", "source": "synthetic", "year": 1860 if period == "old" else 2005,
         "text": "1234 5678 9999 !!!! 0000 ---- 8888"},
        {"id": f"{base}-short", "source": "synthetic", "year": 1870 if period == "old" else 2010,
         "text": "muy corto."},
        {"id": f"{base}-lowconf", "source": "synthetic", "year": 1880 if period == "old" else 2015,
         "text": "una frase normal de palabras claras para la prueba de confianza.",
         "ocr_word_confidence": 0.31},
    ]


def make_corpus(out_dir: str | Path, seed: int = 7) -> dict[str, Path]:
    """Write the full fixture set and return the paths keyed by role."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    vocab = build_vocabulary()

    centers = {
        key: rng.normal(0.0, 4.0, size=DIMENSION) for key in sorted(SENSE_CONTEXTS)
    }

    paths = {
        "corpus_old": out_dir / "old.jsonl",
        "corpus_new": out_dir / "new.jsonl",
        "vocab": out_dir / "vocab.txt",
        "targets": out_dir / "targets.json",
        "store": out_dir / "store.ssde",
        "config": out_dir / "pipeline.yaml",
    }
    save_vocabulary(vocab, paths["vocab"])

    targets = [
        TargetWord(lemma=word, surface_forms=SURFACE_FORMS.get(word, ()))
        for word in TARGET_WORDS
    ]
    jsonl.dump_json(
        paths["targets"],
        [
            {"lemma": t.lemma, "surface_forms": list(t.surface_forms)}
            for t in targets
        ],
    )

    sense_of_doc: dict[str, tuple[str, int]] = {}
    documents: dict[str, list[dict]] = {"old": [], "new": []}
    for period in ("old", "new"):
        rows = []
        for word in TARGET_WORDS:
            for sense, doc_count in sorted(SENSE_PLAN[word][period].items()):
                for i in range(doc_count):
                    doc_id = f"{period}-{word}-{sense}-{i:03d}"
                    form = word
                    if period == "old" and word in SURFACE_FORMS and rng.random() < 0.5:
                        form = SURFACE_FORMS[word][0]
                    sentences = [_sentence(rng, form, SENSE_CONTEXTS[(word, sense)])]
                    extra = 6 if i % 4 == 0 else int(rng.integers(0, 3))
                    sentences += [_filler_sentence(rng) for _ in range(extra)]
                    year = int(rng.integers(1800, 1915)) if period == "old" else int(
                        rng.integers(1990, 2021)
                    )
                    row = {
                        "id": doc_id,
                        "source": "synthetic",
                        "year": year,
                        "text": " ".join(sentences),
                    }
                    if rng.random() < 0.5:
                        row["ocr_word_confidence"] = float(rng.uniform(0.6, 0.99))
                    rows.append(row)
                    sense_of_doc[doc_id] = (word, sense)
        rows.extend(_dirty_rows(period))
        order = rng.permutation(len(rows))
        documents[period] = [rows[i] for i in order]
    jsonl.write_rows(paths["corpus_old"], documents["old"])
    jsonl.write_rows(paths["corpus_new"], documents["new"])

    # mirror the bundled pipeline settings so the store covers every
    # occurrence id the pipeline will derive
    cleaning = CleaningConfig()
    store = EmbeddingStore(dimension=DIMENSION, model_tag=f"synthetic-seed{seed}")
    for period in ("old", "new"):
        docs = [Document.from_row(r) for r in documents[period]]
        kept, _ = clean(docs, cleaning, vocab)
        chunks = list(chunk_documents(kept, MAX_TOKENS, period, vocab))
        for target in targets:
            for occ in find_occurrences(chunks, target, vocab):
                word, sense = sense_of_doc[occ.chunk_ref[0]]
                noise_rng = _occurrence_rng(seed, occ.id)
                vector = centers[(word, sense)] + noise_rng.normal(
                    0.0, NOISE_SIGMA, size=DIMENSION
                )
                store.add(occ.id, vector.astype(np.float32))
    write_store(store, paths["store"])

    paths["config"].write_text(
        "\n".join(
            [
                f"seed: {seed}",
                "paths:",
                "  corpus_old: old.jsonl",
                "  corpus_new: new.jsonl",
                "  vocab: vocab.txt",
                "  targets: targets.json",
                "  store: store.ssde",
                "  out_dir: out",
                "cleaning:",
                "  min_confidence: 0.5",
                "  min_tokens: 5",
                "  max_nonalpha: 0.5",
                "chunking:",
                f"  max_tokens: {MAX_TOKENS}",
                "clustering:",
                "  algorithm: km-sil",
                "  k_min: 2",
                "  k_max: 6",
                "  n_init: 5",
                "shift:",
                "  min_fraction: 0.10",
                "  binary_threshold: 0.5",
                "projection:",
                "  method: tsne",
                "  perplexity: 30",
                "  iterations: 500",
                "workers: 1",
                "",
            ]
        ),
        encoding="utf-8",
    )
    return paths


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(description="generate the synthetic demo corpus")
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--seed", type=int, default=7)
    args = parser.parse_args(argv)
    paths = make_corpus(args.out, seed=args.seed)
    for role, path in paths.items():
        print(f"{role}: {path}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
