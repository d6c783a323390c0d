"""Run a BERT-like checkpoint over occurrence chunks and export vectors.

The occurrence char span is mapped to model subword positions through the
model's own fast-tokenizer offsets; hidden states are pooled over those
positions (mean by default, or the first subword). Inference runs in eval
mode with no gradients; deterministic mode pins seeds and thread counts so
reruns are byte-identical.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch
from transformers import AutoModel, AutoTokenizer

from .ssde import write_store

log = logging.getLogger(__name__)

LAYER_POLICIES = ("last", "sum_last_4")
POOLINGS = ("mean", "first_subword")


@dataclass
class ExportJob:
    model_id: str
    occurrences: Path
    corpus: Path
    output: Path
    layer: str = "last"
    pooling: str = "mean"
    batch_size: int = 16
    device: str = "cpu"
    deterministic: bool = True
    max_length: int = 512

    def validate(self) -> None:
        if self.layer not in LAYER_POLICIES:
            raise ValueError(f"layer must be one of {LAYER_POLICIES}, got {self.layer!r}")
        if self.pooling not in POOLINGS:
            raise ValueError(f"pooling must be one of {POOLINGS}, got {self.pooling!r}")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        for path in (self.occurrences, self.corpus):
            if not Path(path).exists():
                raise FileNotFoundError(f"input file {path} does not exist")


@dataclass
class Manifest:
    model_id: str
    layer: str
    pooling: str
    dimension: int
    count: int = 0
    skipped: list[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "model_id": self.model_id,
            "layer": self.layer,
            "pooling": self.pooling,
            "dimension": self.dimension,
            "count": self.count,
            "skipped": self.skipped,
        }


def _read_jsonl(path: Path) -> list[dict]:
    rows = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rows.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
    return rows


def _subword_positions(
    offsets: list[tuple[int, int]], span: tuple[int, int]
) -> list[int]:
    """Token indices whose character offsets overlap the occurrence span.

    Special tokens carry (0, 0) offsets and never overlap a non-empty span.
    """
    start, end = span
    positions = []
    for index, (tok_start, tok_end) in enumerate(offsets):
        if tok_start == tok_end:
            continue
        if tok_start < end and start < tok_end:
            positions.append(index)
    return positions


def export(job: ExportJob) -> Manifest:
    """Write one vector per mappable occurrence; returns the manifest.

    Occurrences whose span maps to zero subwords are skipped and listed in
    the manifest. Zero occurrences is a valid run: the manifest is written
    and no SSDE file is produced.
    """
    job.validate()
    if job.deterministic:
        torch.manual_seed(0)
        torch.set_num_threads(1)
        try:
            torch.use_deterministic_algorithms(True, warn_only=True)
        except TypeError:  # older torch without warn_only
            pass

    occurrences = _read_jsonl(Path(job.occurrences))
    chunks = {
        (row["doc_id"], int(row["chunk_index"])): row["text"]
        for row in _read_jsonl(Path(job.corpus))
    }
    missing_chunks = sorted(
        {
            (o["doc_id"], int(o["chunk_index"]))
            for o in occurrences
            if (o["doc_id"], int(o["chunk_index"])) not in chunks
        }
    )
    if missing_chunks:
        raise ValueError(
            f"{len(missing_chunks)} occurrence chunk(s) missing from the corpus "
            f"file, first: {missing_chunks[0]}"
        )

    tokenizer = AutoTokenizer.from_pretrained(job.model_id)
    model = AutoModel.from_pretrained(job.model_id)
    model.to(job.device)
    model.eval()
    dimension = int(model.config.hidden_size)
    manifest = Manifest(
        model_id=str(job.model_id), layer=job.layer, pooling=job.pooling,
        dimension=dimension,
    )

    records: list[tuple[str, np.ndarray]] = []
    with torch.no_grad():
        for batch_start in range(0, len(occurrences), job.batch_size):
            batch = occurrences[batch_start : batch_start + job.batch_size]
            texts = [chunks[(o["doc_id"], int(o["chunk_index"]))] for o in batch]
            encoded = tokenizer(
                texts,
                return_offsets_mapping=True,
                padding=True,
                truncation=True,
                max_length=job.max_length,
                return_tensors="pt",
            )
            offsets = encoded.pop("offset_mapping").tolist()
            encoded = {k: v.to(job.device) for k, v in encoded.items()}
            output = model(**encoded, output_hidden_states=job.layer == "sum_last_4")
            if job.layer == "sum_last_4":
                hidden = torch.stack(output.hidden_states[-4:]).sum(dim=0)
            else:
                hidden = output.last_hidden_state
            for row, occurrence, row_offsets in zip(hidden, batch, offsets):
                span = (int(occurrence["char_start"]), int(occurrence["char_end"]))
                positions = _subword_positions(
                    [tuple(pair) for pair in row_offsets], span
                )
                if not positions:
                    manifest.skipped.append(
                        {"id": occurrence["id"], "reason": "span maps to zero subwords"}
                    )
                    continue
                if job.pooling == "first_subword":
                    vector = row[positions[0]]
                else:
                    vector = row[positions].mean(dim=0)
                records.append(
                    (occurrence["id"], vector.cpu().numpy().astype(np.float32))
                )

    manifest.count = len(records)
    if records:
        write_store(job.output, dimension, str(job.model_id), records)
    else:
        log.warning("no mappable occurrences: manifest only, no SSDE file written")
    manifest_path = Path(str(job.output) + ".manifest.json")
    with open(manifest_path, "w", encoding="utf-8") as fh:
        json.dump(manifest.to_dict(), fh, ensure_ascii=False, sort_keys=True, indent=2)
        fh.write("\n")
    log.info(
        "exported %d vectors (dimension %d, %d skipped) from %s",
        manifest.count, dimension, len(manifest.skipped), job.model_id,
    )
    return manifest
