"""Per-occurrence embedding storage (SSDE binary format) and backends.

SSDE layout, little-endian: magic "SSDE", version u32 = 1, dimension u32,
count u64, model_tag (u32 length + UTF-8), then per record the occurrence
id (u32 length + UTF-8) followed by dimension x f32 values. The format
round-trips bit-exactly; stores reject NaN/Inf on both write and read.
"""

from __future__ import annotations

import logging
import struct
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping, Protocol, Sequence

import numpy as np

from .errors import BackendError, DataError
from .occurrences import Occurrence

log = logging.getLogger(__name__)

MAGIC = b"SSDE"
VERSION = 1


@dataclass
class EmbeddingStore:
    """Immutable-after-load map of occurrence id -> float32 vector."""

    dimension: int
    model_tag: str = ""
    records: dict[str, np.ndarray] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.records)

    def __contains__(self, occurrence_id: str) -> bool:
        return occurrence_id in self.records

    def vector(self, occurrence_id: str) -> np.ndarray:
        try:
            return self.records[occurrence_id]
        except KeyError:
            raise DataError(f"store has no embedding for occurrence {occurrence_id!r}") from None

    def add(self, occurrence_id: str, vector: np.ndarray) -> None:
        vec = np.asarray(vector, dtype=np.float32)
        if vec.shape != (self.dimension,):
            raise DataError(
                f"vector for {occurrence_id!r} has shape {vec.shape}, expected ({self.dimension},)"
            )
        if not np.all(np.isfinite(vec)):
            raise DataError(f"vector for {occurrence_id!r} contains NaN/Inf")
        if occurrence_id in self.records:
            raise DataError(f"duplicate occurrence id {occurrence_id!r} in store")
        self.records[occurrence_id] = vec


def write_store(store: EmbeddingStore, path: str | Path) -> None:
    if len(store) == 0:
        raise DataError("refusing to write an empty embedding store")
    if store.dimension < 1:
        raise DataError(f"store dimension must be >= 1, got {store.dimension}")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<IIQ", VERSION, store.dimension, len(store)))
        tag = store.model_tag.encode("utf-8")
        fh.write(struct.pack("<I", len(tag)))
        fh.write(tag)
        for occurrence_id, vec in store.records.items():
            if not np.all(np.isfinite(vec)):
                raise DataError(f"vector for {occurrence_id!r} contains NaN/Inf")
            raw = occurrence_id.encode("utf-8")
            fh.write(struct.pack("<I", len(raw)))
            fh.write(raw)
            fh.write(np.asarray(vec, dtype="<f4").tobytes())


def read_store(path: str | Path) -> EmbeddingStore:
    data = Path(path).read_bytes()

    def take(n: int, offset: int, what: str) -> tuple[bytes, int]:
        if offset + n > len(data):
            raise DataError(
                f"{path}: truncated file while reading {what} at byte {offset} "
                f"(need {n}, have {len(data) - offset})"
            )
        return data[offset : offset + n], offset + n

    raw, off = take(4, 0, "magic")
    if raw != MAGIC:
        raise DataError(f"{path}: bad magic {raw!r} at byte 0, expected {MAGIC!r}")
    raw, off = take(16, off, "header")
    version, dimension, count = struct.unpack("<IIQ", raw)
    if version != VERSION:
        raise DataError(f"{path}: unsupported version {version}")
    if dimension < 1:
        raise DataError(f"{path}: dimension must be >= 1, got {dimension}")
    raw, off = take(4, off, "model tag length")
    (tag_len,) = struct.unpack("<I", raw)
    raw, off = take(tag_len, off, "model tag")
    store = EmbeddingStore(dimension=dimension, model_tag=raw.decode("utf-8"))
    vec_bytes = dimension * 4
    for i in range(count):
        raw, off = take(4, off, f"record {i} id length")
        (id_len,) = struct.unpack("<I", raw)
        raw, off = take(id_len, off, f"record {i} id")
        occurrence_id = raw.decode("utf-8")
        raw, off = take(vec_bytes, off, f"record {i} vector")
        vec = np.frombuffer(raw, dtype="<f4").copy()
        if occurrence_id in store.records:
            raise DataError(f"{path}: duplicate occurrence id {occurrence_id!r} in record {i}")
        if not np.all(np.isfinite(vec)):
            raise DataError(f"{path}: record {i} ({occurrence_id!r}) contains NaN/Inf")
        store.records[occurrence_id] = vec
    if off != len(data):
        raise DataError(f"{path}: {len(data) - off} trailing bytes after record {count - 1}")
    return store


@dataclass(frozen=True)
class EmbedRequest:
    """One unit of work for a backend: where the usage lives in its text."""

    occurrence_id: str
    text: str
    span: tuple[int, int]


class EmbeddingBackend(Protocol):
    """Deterministic vector source: one fixed-dimension vector per request."""

    def embed(self, requests: Sequence[EmbedRequest]) -> dict[str, np.ndarray]:
        ...


class StoreBackend:
    """Pass-through over a precomputed store, keyed by occurrence id."""

    def __init__(self, store: EmbeddingStore):
        self.store = store

    def embed(self, requests: Sequence[EmbedRequest]) -> dict[str, np.ndarray]:
        return {
            r.occurrence_id: self.store.records[r.occurrence_id]
            for r in requests
            if r.occurrence_id in self.store.records
        }


class CallableBackend:
    """Adapter for a pure (text, span) -> vector function. Test-friendly."""

    def __init__(self, fn: Callable[[str, tuple[int, int]], np.ndarray]):
        self.fn = fn

    def embed(self, requests: Sequence[EmbedRequest]) -> dict[str, np.ndarray]:
        return {
            r.occurrence_id: np.asarray(self.fn(r.text, r.span), dtype=np.float32)
            for r in requests
        }


class HttpBackend:
    """POST /embed with {"texts": [...], "spans": [[start, end], ...]}.

    The service answers {"dimension": d, "vectors": [[...], ...]}; any
    non-200 status is an error. Disabled unless explicitly configured.
    """

    def __init__(self, url: str, timeout: float = 30.0, retries: int = 2, backoff: float = 0.5):
        self.url = url.rstrip("/") + "/embed"
        self.timeout = timeout
        self.retries = retries
        self.backoff = backoff

    def embed(self, requests: Sequence[EmbedRequest]) -> dict[str, np.ndarray]:
        import requests as requests_lib

        payload = {
            "texts": [r.text for r in requests],
            "spans": [[r.span[0], r.span[1]] for r in requests],
        }
        last_error: Exception | None = None
        for attempt in range(self.retries + 1):
            try:
                response = requests_lib.post(self.url, json=payload, timeout=self.timeout)
                if response.status_code != 200:
                    raise BackendError(
                        f"embedding service returned HTTP {response.status_code}: "
                        f"{response.text[:200]}"
                    )
                body = response.json()
                vectors = np.asarray(body["vectors"], dtype=np.float32)
                if vectors.shape != (len(requests), int(body["dimension"])):
                    raise BackendError(
                        f"embedding service shape mismatch: got {vectors.shape}"
                    )
                return {
                    r.occurrence_id: vectors[i] for i, r in enumerate(requests)
                }
            except (requests_lib.Timeout, requests_lib.ConnectionError) as exc:
                last_error = exc
                if attempt < self.retries:
                    time.sleep(self.backoff * (attempt + 1))
        raise BackendError(
            f"embedding service unreachable after {self.retries + 1} attempts: {last_error}",
            missing_ids=[r.occurrence_id for r in requests],
        )


def fetch_embeddings(
    occurrences: Sequence[Occurrence],
    chunk_texts: Mapping[tuple[str, int], str],
    backend: EmbeddingBackend,
    model_tag: str = "",
    batch_size: int = 64,
) -> EmbeddingStore:
    """One record per occurrence, fetched in batches.

    Raises DataError when an occurrence references a chunk that is not in
    `chunk_texts`, and BackendError (with the missing-id manifest) when the
    backend leaves requests unanswered.
    """
    if not occurrences:
        return EmbeddingStore(dimension=1, model_tag=model_tag)
    missing_chunks = sorted(
        {o.chunk_ref for o in occurrences if o.chunk_ref not in chunk_texts}
    )
    if missing_chunks:
        raise DataError(
            f"{len(missing_chunks)} occurrence chunk(s) missing from corpus, "
            f"first: {missing_chunks[0]}"
        )
    requests = [
        EmbedRequest(o.id, chunk_texts[o.chunk_ref], (o.char_start, o.char_end))
        for o in occurrences
    ]
    results: dict[str, np.ndarray] = {}
    for start in range(0, len(requests), batch_size):
        batch = requests[start : start + batch_size]
        results.update(backend.embed(batch))
    missing = [r.occurrence_id for r in requests if r.occurrence_id not in results]
    if missing:
        raise BackendError(
            f"backend returned no vector for {len(missing)} occurrence(s)",
            missing_ids=missing,
        )
    dimension = len(next(iter(results.values())))
    store = EmbeddingStore(dimension=dimension, model_tag=model_tag)
    for occ in occurrences:
        store.add(occ.id, results[occ.id])
    return store


@dataclass
class PeriodSplit:
    """Embeddings of one word partitioned by period, ordered by occurrence id."""

    old_ids: list[str]
    new_ids: list[str]
    old_vectors: np.ndarray
    new_vectors: np.ndarray

    @property
    def ids(self) -> list[str]:
        return self.old_ids + self.new_ids

    @property
    def periods(self) -> list[str]:
        return ["old"] * len(self.old_ids) + ["new"] * len(self.new_ids)

    @property
    def vectors(self) -> np.ndarray:
        return np.vstack([self.old_vectors, self.new_vectors])

    def __len__(self) -> int:
        return len(self.old_ids) + len(self.new_ids)


def split_by_period(
    store: EmbeddingStore, occurrences: Sequence[Occurrence]
) -> PeriodSplit:
    """Partition occurrence vectors into the old/new period sets."""
    missing = sorted(o.id for o in occurrences if o.id not in store)
    if missing:
        raise DataError(
            f"store is missing {len(missing)} occurrence id(s): {missing[:5]}"
        )
    old = sorted((o.id for o in occurrences if o.period == "old"))
    new = sorted((o.id for o in occurrences if o.period == "new"))
    dim = store.dimension
    return PeriodSplit(
        old_ids=old,
        new_ids=new,
        old_vectors=(
            np.vstack([store.records[i] for i in old])
            if old
            else np.empty((0, dim), dtype=np.float32)
        ),
        new_vectors=(
            np.vstack([store.records[i] for i in new])
            if new
            else np.empty((0, dim), dtype=np.float32)
        ),
    )
