# checkpoint.py
"""
Embedding checkpoint files.

Layout (all multi-byte numbers little-endian):

    line 1   b"RELPROBE-CHECKPOINT v1\\n"
    line 2   one UTF-8 JSON object + b"\\n" (the header)
    body     each block of header["blocks"], in listed order, as row-major float64
             then, for F-model stores, the pair index as int64 (n_pairs x 2)
             then the pair embeddings as float64 (n_pairs x K), rows sorted by (s, o)

Header keys: format, kind, rank, entity_count, relation_count, pair_seed,
blocks ([{"name", "shape"}]), pair_count. Reading the body back with the same
dtypes reproduces every parameter bit for bit.
"""

from __future__ import annotations

import json
import os
from pathlib import Path
from typing import Any, Dict, List

import numpy as np

from kg_core import InvalidArgument
from models import EmbeddingStore, ModelKind

MAGIC = b"RELPROBE-CHECKPOINT v1\n"
FORMAT_VERSION = 1
_F8 = np.dtype("<f8")
_I8 = np.dtype("<i8")


def _header(store: EmbeddingStore) -> Dict[str, Any]:
    return {
        "format": FORMAT_VERSION,
        "kind": store.kind.name,
        "rank": store.rank,
        "entity_count": store.entity_count,
        "relation_count": store.relation_count,
        "pair_seed": store.pair_seed,
        "blocks": [{"name": name, "shape": list(arr.shape)} for name, arr in store.blocks.items()],
        "pair_count": len(store.pairs),
    }


def save_checkpoint(path: Path, store: EmbeddingStore) -> Path:
    path = Path(path)
    if path.parent:
        os.makedirs(path.parent, exist_ok=True)
    header = json.dumps(_header(store), sort_keys=True, separators=(",", ":")).encode("utf-8")
    keys = sorted(store.pairs)
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(header + b"\n")
        for arr in store.blocks.values():
            f.write(np.ascontiguousarray(arr, dtype=_F8).tobytes(order="C"))
        if keys:
            f.write(np.asarray(keys, dtype=_I8).reshape(len(keys), 2).tobytes(order="C"))
            f.write(np.stack([store.pairs[k] for k in keys]).astype(_F8).tobytes(order="C"))
    return path


def load_checkpoint(path: Path) -> EmbeddingStore:
    path = Path(path)
    with open(path, "rb") as f:
        magic = f.readline()
        if magic != MAGIC:
            raise InvalidArgument(f"{path}: not a relprobe checkpoint")
        try:
            header = json.loads(f.readline().decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as e:
            raise InvalidArgument(f"{path}: unreadable checkpoint header: {e}") from e
        body = f.read()

    if header.get("format") != FORMAT_VERSION:
        raise InvalidArgument(f"{path}: unsupported checkpoint format {header.get('format')!r}")

    offset = 0

    def _take(dtype: np.dtype, shape: List[int]) -> np.ndarray:
        nonlocal offset
        count = int(np.prod(shape)) if shape else 1
        nbytes = count * dtype.itemsize
        if offset + nbytes > len(body):
            raise InvalidArgument(f"{path}: truncated checkpoint body")
        arr = np.frombuffer(body, dtype=dtype, count=count, offset=offset).reshape(shape).copy()
        offset += nbytes
        return arr

    blocks = {}
    for spec in header["blocks"]:
        blocks[spec["name"]] = _take(_F8, spec["shape"]).astype(np.float64)

    pairs = {}
    n_pairs = int(header.get("pair_count", 0))
    if n_pairs:
        idx = _take(_I8, [n_pairs, 2])
        vals = _take(_F8, [n_pairs, int(header["rank"])])
        for (s, o), row in zip(idx.tolist(), vals):
            pairs[(int(s), int(o))] = row.astype(np.float64)

    if offset != len(body):
        raise InvalidArgument(f"{path}: {len(body) - offset} trailing bytes after checkpoint body")

    return EmbeddingStore(
        kind=ModelKind.parse(header["kind"]),
        rank=int(header["rank"]),
        entity_count=int(header["entity_count"]),
        relation_count=int(header["relation_count"]),
        blocks=blocks,
        pair_seed=int(header["pair_seed"]),
        pairs=pairs,
    )
