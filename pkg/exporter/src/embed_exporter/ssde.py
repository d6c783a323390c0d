"""SSDE store writer (little-endian interchange format).

Layout: magic "SSDE", version u32 = 1, dimension u32, count u64, model_tag
(u32 length + UTF-8), then per record the id (u32 length + UTF-8) followed
by dimension x f32. Matches the consumer-side reader bit for bit.
"""

from __future__ import annotations

import struct
from pathlib import Path
from typing import Sequence

import numpy as np

MAGIC = b"SSDE"
VERSION = 1


def write_store(
    path: str | Path,
    dimension: int,
    model_tag: str,
    records: Sequence[tuple[str, np.ndarray]],
) -> None:
    if not records:
        raise ValueError("refusing to write an empty SSDE store")
    if dimension < 1:
        raise ValueError(f"dimension must be >= 1, got {dimension}")
    seen: set[str] = set()
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<IIQ", VERSION, dimension, len(records)))
        tag = model_tag.encode("utf-8")
        fh.write(struct.pack("<I", len(tag)))
        fh.write(tag)
        for record_id, vector in records:
            if record_id in seen:
                raise ValueError(f"duplicate record id {record_id!r}")
            seen.add(record_id)
            vec = np.asarray(vector, dtype="<f4")
            if vec.shape != (dimension,):
                raise ValueError(
                    f"record {record_id!r} has shape {vec.shape}, expected ({dimension},)"
                )
            if not np.all(np.isfinite(vec)):
                raise ValueError(f"record {record_id!r} contains NaN/Inf")
            raw = record_id.encode("utf-8")
            fh.write(struct.pack("<I", len(raw)))
            fh.write(raw)
            fh.write(vec.tobytes())
